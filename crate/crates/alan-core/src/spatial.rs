//! Uniform grid for neighbor queries, rebuilt every step from agent positions.

use crate::geom::Vec2;
use std::collections::HashMap;

/// Uniform hash grid with cell size equal to the query radius, so a query
/// only has to visit the 3x3 block of cells around the query point.
pub struct SpatialGrid {
    cell_size: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    pub fn build(positions: impl Iterator<Item = (usize, Vec2)>, cell_size: f64) -> SpatialGrid {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (index, p) in positions {
            cells
                .entry(Self::cell_of(p, cell_size))
                .or_default()
                .push(index);
        }
        SpatialGrid { cell_size, cells }
    }

    fn cell_of(p: Vec2, cell_size: f64) -> (i64, i64) {
        (
            (p.x / cell_size).floor() as i64,
            (p.y / cell_size).floor() as i64,
        )
    }

    /// Indices (excluding `exclude`) whose positions lie within `radius` of
    /// `p`, sorted by distance (ties by index) so downstream truncation is
    /// deterministic.
    pub fn neighbors_within(
        &self,
        p: Vec2,
        radius: f64,
        exclude: usize,
        positions: &[Vec2],
        out: &mut Vec<(f64, usize)>,
    ) {
        out.clear();
        let (cx, cy) = Self::cell_of(p, self.cell_size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in bucket {
                        if i == exclude {
                            continue;
                        }
                        let d = positions[i].dist(p);
                        if d <= radius {
                            out.push((d, i));
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
}
