//! Procedural generators for the eight builtin benchmark scenarios.
//!
//! The agent counts follow the benchmark definitions; concrete coordinates are
//! fixed here (corridor widths, block sizes, room size) and act as this
//! crate's reference geometry. All scenarios use 0.5 m agents with a 1.5 m/s
//! speed limit. Counts are overridable for scalability studies; `crowd` uses
//! the seed for random placement, all other generators are seed-independent.

use crate::geom::Vec2;
use crate::world::{AgentSpec, Obstacle, Scenario, ScenarioError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const RADIUS: f64 = 0.5;
pub const MAX_SPEED: f64 = 1.5;

/// Builtin scenario names, with their default agent counts.
pub const BUILTIN_SCENARIOS: [(&str, usize); 8] = [
    ("congested", 32),
    ("deadlock", 10),
    ("incoming", 16),
    ("blocks", 5),
    ("bidirectional", 18),
    ("circle", 80),
    ("intersection", 80),
    ("crowd", 400),
];

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("unknown scenario '{0}' (valid: congested, deadlock, incoming, blocks, bidirectional, circle, intersection, crowd)")]
    UnknownName(String),
    #[error("scenario '{name}' cannot fit {n} agents (max {max})")]
    InfeasibleCount { name: String, n: usize, max: usize },
    #[error("generated scenario failed validation: {0}")]
    Invalid(#[from] ScenarioError),
}

pub fn default_agent_count(name: &str) -> Option<usize> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| *c)
}

/// Generate a builtin scenario. Deterministic for a given (name, n, seed).
pub fn builtin_scenario(name: &str, n: usize, seed: u64) -> Result<Scenario, GeneratorError> {
    let scenario = match name {
        "congested" => congested(n)?,
        "deadlock" => deadlock(n)?,
        "incoming" => incoming(n)?,
        "blocks" => blocks(n)?,
        "bidirectional" => bidirectional(n)?,
        "circle" => circle(n)?,
        "intersection" => intersection(n)?,
        "crowd" => crowd(n, seed)?,
        other => return Err(GeneratorError::UnknownName(other.to_string())),
    };
    scenario.validate()?;
    Ok(scenario)
}

fn agent(id: u32, start: Vec2, goal: Vec2) -> AgentSpec {
    AgentSpec {
        id,
        start,
        goal,
        radius: RADIUS,
        max_speed: MAX_SPEED,
    }
}

fn wall(a: (f64, f64), b: (f64, f64)) -> Obstacle {
    Obstacle::new(Vec2::new(a.0, a.1), Vec2::new(b.0, b.1))
}

fn square_block(cx: f64, cy: f64, half: f64) -> Vec<Obstacle> {
    let corners = [
        Vec2::new(cx - half, cy - half),
        Vec2::new(cx + half, cy - half),
        Vec2::new(cx + half, cy + half),
        Vec2::new(cx - half, cy + half),
    ];
    (0..4)
        .map(|i| Obstacle::new(corners[i], corners[(i + 1) % 4]))
        .collect()
}

/// Agents packed in an open hallway, escaping through a narrow exit.
fn congested(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 36;
    if n == 0 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "congested".into(),
            n,
            max,
        });
    }
    let obstacles = vec![
        wall((-12.0, 3.0), (0.0, 3.0)),
        wall((-12.0, -3.0), (0.0, -3.0)),
        // exit barrier with a 1.4 m doorway
        wall((0.0, 3.0), (0.0, 0.7)),
        wall((0.0, -3.0), (0.0, -0.7)),
        // baffle past the exit: agents must turn around it to reach the goals
        wall((2.5, -3.0), (2.5, 3.0)),
    ];
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let row = i % 4;
        let col = i / 4;
        let start = Vec2::new(-1.5 - col as f64 * 1.1, (row as f64 - 1.5) * 1.1);
        let goal = Vec2::new(5.5, ((i % 8) as f64 - 3.5) * 0.8);
        agents.push(agent(i as u32, start, goal));
    }
    Ok(Scenario {
        name: "congested".into(),
        agents,
        obstacles,
    })
}

/// Two closed rooms joined by a single-file corridor (width 1.5 = 1.5 * 2r,
/// so opposing agents cannot pass each other inside it). The left group's
/// starts mirror the right group's goals and vice versa.
fn two_rooms(name: &str, n_left: usize, n_right: usize) -> Scenario {
    let hw = 0.75; // corridor half-width
    let cx = 2.0; // corridor half-length
    let ry = 2.5; // room half-height
    let cols = n_left.max(n_right).div_ceil(3);
    let rx = cx + 1.3 + 1.05 * cols as f64 + 0.8; // room outer wall
    let mut obstacles = vec![wall((-cx, hw), (cx, hw)), wall((-cx, -hw), (cx, -hw))];
    for s in [-1.0, 1.0] {
        obstacles.push(wall((s * rx, ry), (s * cx, ry)));
        obstacles.push(wall((s * rx, -ry), (s * cx, -ry)));
        obstacles.push(wall((s * rx, -ry), (s * rx, ry)));
        obstacles.push(wall((s * cx, hw), (s * cx, ry)));
        obstacles.push(wall((s * cx, -ry), (s * cx, -hw)));
    }
    let slot = |k: usize, side: f64| {
        let col = k / 3;
        let row = k % 3;
        Vec2::new(
            side * (cx + 1.3 + 1.05 * col as f64),
            (row as f64 - 1.0) * (ry - 1.0),
        )
    };
    let mut agents = Vec::with_capacity(n_left + n_right);
    for k in 0..n_left {
        let s = slot(k, -1.0);
        agents.push(agent(agents.len() as u32, s, Vec2::new(-s.x, s.y)));
    }
    for k in 0..n_right {
        let s = slot(k, 1.0);
        agents.push(agent(agents.len() as u32, s, Vec2::new(-s.x, s.y)));
    }
    Scenario {
        name: name.into(),
        agents,
        obstacles,
    }
}

/// Two equal groups swap rooms through a corridor only one agent wide;
/// opposing traffic must take turns or jam head-on.
fn deadlock(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 24;
    if n < 2 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "deadlock".into(),
            n,
            max,
        });
    }
    let n_left = n.div_ceil(2);
    Ok(two_rooms("deadlock", n_left, n - n_left))
}

/// A single agent against a group walking the opposite way through the same
/// single-file corridor; the lone agent must yield or be trapped head-on.
fn incoming(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 61;
    if n < 2 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "incoming".into(),
            n,
            max,
        });
    }
    Ok(two_rooms("incoming", 1, n - 1))
}

/// Agents crossing a field of square blocks that sit directly on their
/// straight goal paths.
fn blocks(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 40;
    if n == 0 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "blocks".into(),
            n,
            max,
        });
    }
    let mut obstacles = Vec::new();
    for cx in [-3.6, 0.0, 3.6] {
        obstacles.extend(square_block(cx, 0.0, 1.2));
    }
    // Lanes chosen so every straight start-goal line hits a block.
    let lanes = [-4.0, -2.8, 0.0, 2.8, 4.0];
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let x = lanes[i % lanes.len()];
        let row = (i / lanes.len()) as f64;
        agents.push(agent(
            i as u32,
            Vec2::new(x, -6.0 - 1.2 * row),
            Vec2::new(x, 6.0 + 1.2 * row),
        ));
    }
    Ok(Scenario {
        name: "blocks".into(),
        agents,
        obstacles,
    })
}

/// Two groups passing through a shared corridor in opposite directions.
fn bidirectional(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 54;
    if n < 2 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "bidirectional".into(),
            n,
            max,
        });
    }
    let obstacles = vec![
        wall((-12.0, 2.0), (12.0, 2.0)),
        wall((-12.0, -2.0), (12.0, -2.0)),
    ];
    let n_left = n.div_ceil(2);
    let mut agents = Vec::with_capacity(n);
    for i in 0..n_left {
        let row = i % 3;
        let col = i / 3;
        let start = Vec2::new(-5.0 - 1.1 * col as f64, (row as f64 - 1.0) * 1.1);
        agents.push(agent(
            agents.len() as u32,
            start,
            start + Vec2::new(14.0, 0.0),
        ));
    }
    for i in 0..n - n_left {
        let row = i % 3;
        let col = i / 3;
        let start = Vec2::new(5.0 + 1.1 * col as f64, (row as f64 - 1.0) * 1.1);
        agents.push(agent(
            agents.len() as u32,
            start,
            start - Vec2::new(14.0, 0.0),
        ));
    }
    Ok(Scenario {
        name: "bidirectional".into(),
        agents,
        obstacles,
    })
}

/// Agents on a circle walking to their antipodal points.
fn circle(n: usize) -> Result<Scenario, GeneratorError> {
    if n < 2 || n > 400 {
        return Err(GeneratorError::InfeasibleCount {
            name: "circle".into(),
            n,
            max: 400,
        });
    }
    let radius = (1.25 * n as f64 / (2.0 * std::f64::consts::PI)).max(3.0);
    let agents = (0..n)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let start = Vec2::new(radius * theta.cos(), radius * theta.sin());
            agent(i as u32, start, -start)
        })
        .collect();
    Ok(Scenario {
        name: "circle".into(),
        agents,
        obstacles: vec![],
    })
}

/// Four perpendicular streams meeting in a plus-shaped intersection.
fn intersection(n: usize) -> Result<Scenario, GeneratorError> {
    let max = 176; // 44 per arm: 22 rows of 2 down each corridor
    if n < 4 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "intersection".into(),
            n,
            max,
        });
    }
    let mut obstacles = Vec::new();
    let reach = 34.0;
    for s in [1.0, -1.0] {
        obstacles.push(wall((2.0, 2.0 * s), (reach, 2.0 * s)));
        obstacles.push(wall((-2.0, 2.0 * s), (-reach, 2.0 * s)));
        obstacles.push(wall((2.0 * s, 2.0), (2.0 * s, reach)));
        obstacles.push(wall((2.0 * s, -2.0), (2.0 * s, -reach)));
    }
    // Split agents across the four arms; each arm marches through the center
    // to the mirrored position on the far side.
    let mut agents = Vec::with_capacity(n);
    for arm in 0..4usize {
        let m = n / 4 + usize::from(arm < n % 4);
        let rot = std::f64::consts::FRAC_PI_2 * arm as f64;
        for i in 0..m {
            let lane = if i % 2 == 0 { 0.8 } else { -0.8 };
            let row = (i / 2) as f64;
            let local = Vec2::new(-6.0 - 1.2 * row, lane);
            let start = local.rotated(rot);
            let goal = Vec2::new(-local.x, local.y).rotated(rot);
            agents.push(agent(agents.len() as u32, start, goal));
        }
    }
    Ok(Scenario {
        name: "intersection".into(),
        agents,
        obstacles,
    })
}

/// Randomly placed agents with random goals inside a square room.
fn crowd(n: usize, seed: u64) -> Result<Scenario, GeneratorError> {
    let max = 600;
    if n == 0 || n > max {
        return Err(GeneratorError::InfeasibleCount {
            name: "crowd".into(),
            n,
            max,
        });
    }
    // Room area scales with the head count so density stays constant; the
    // floor keeps grid cells wide enough for the spacing guarantee below.
    let cols = (n as f64).sqrt().ceil() as usize;
    let min_gap = 2.0 * RADIUS + 0.1;
    let half = ((n as f64).sqrt() * 0.75)
        .max(0.5 * min_gap * cols as f64 + 1.55)
        .max(5.0);
    let inner = half - 1.5;
    let obstacles = vec![
        wall((-half, -half), (half, -half)),
        wall((half, -half), (half, half)),
        wall((half, half), (-half, half)),
        wall((-half, half), (-half, -half)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Jittered grid: one agent per cell, jitter bounded so that any two
    // starts stay at least `min_gap` apart.
    let rows = n.div_ceil(cols);
    let cell_w = 2.0 * inner / cols as f64;
    let cell_h = 2.0 * inner / rows as f64;
    let jitter_w = 0.5 * (cell_w - min_gap).max(0.0);
    let jitter_h = 0.5 * (cell_h - min_gap).max(0.0);
    let mut starts: Vec<Vec2> = Vec::with_capacity(n);
    for i in 0..n {
        let cx = -inner + cell_w * (0.5 + (i % cols) as f64);
        let cy = -inner + cell_h * (0.5 + (i / cols) as f64);
        starts.push(Vec2::new(
            cx + rng.gen_range(-1.0..1.0) * jitter_w,
            cy + rng.gen_range(-1.0..1.0) * jitter_h,
        ));
    }
    let agents = starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| {
            let goal = Vec2::new(rng.gen_range(-inner..inner), rng.gen_range(-inner..inner));
            agent(i as u32, start, goal)
        })
        .collect();
    Ok(Scenario {
        name: "crowd".into(),
        agents,
        obstacles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_default_is_antipodal() {
        let s = builtin_scenario("circle", 80, 0).unwrap();
        assert_eq!(s.agents.len(), 80);
        for a in &s.agents {
            assert!((a.goal + a.start).norm() < 1e-9);
        }
    }

    #[test]
    fn incoming_is_one_versus_group() {
        let s = builtin_scenario("incoming", 16, 0).unwrap();
        assert_eq!(s.agents.len(), 16);
        let single = &s.agents[0];
        assert!(single.goal.x > single.start.x);
        for a in &s.agents[1..] {
            assert!(a.goal.x < a.start.x);
        }
    }

    #[test]
    fn crowd_seed_determinism() {
        let a = builtin_scenario("crowd", 100, 1).unwrap();
        let b = builtin_scenario("crowd", 100, 1).unwrap();
        let c = builtin_scenario("crowd", 100, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(
            builtin_scenario("warehouse", 10, 0),
            Err(GeneratorError::UnknownName(_))
        ));
    }

    #[test]
    fn infeasible_count_rejected() {
        assert!(matches!(
            builtin_scenario("congested", 1000, 0),
            Err(GeneratorError::InfeasibleCount { .. })
        ));
    }

    #[test]
    fn all_builtins_validate_over_count_range() {
        // Generators must satisfy the start non-overlap invariants for every
        // name and a spread of agent counts.
        for (name, default_n) in BUILTIN_SCENARIOS {
            for n in [default_n / 2, default_n] {
                if n == 0 {
                    continue;
                }
                let n = n.max(4);
                let s = builtin_scenario(name, n, 7).unwrap();
                assert_eq!(s.agents.len(), n, "{name} with {n} agents");
                s.validate().unwrap();
            }
        }
    }
}
