//! Travel-time statistics and the interaction-overhead metric.
//!
//! The aggregate travel time of a run is mean plus three sample standard
//! deviations of the per-agent times. The baseline is the same aggregate over
//! each agent's shortest obstacle-avoiding path (with disc-radius clearance)
//! at maximum speed; interaction overhead is the difference.

use crate::engine::SimulationResult;
use crate::geom::{dist_segment_segment, Vec2};
use crate::world::Scenario;
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty set of travel times")]
    EmptyTimes,
    #[error("agent {0} cannot reach its goal (no path with required clearance)")]
    Unreachable(u32),
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    /// mu + 3 sigma of arrival times; absent for incomplete runs.
    pub ttime: Option<f64>,
    /// mu + 3 sigma of the unconstrained shortest-path times.
    pub min_ttime: f64,
    pub interaction_overhead: Option<f64>,
    pub mean: Option<f64>,
    pub stdev: Option<f64>,
    pub n_agents: usize,
    pub completed: bool,
}

/// Mean plus three sample standard deviations (n-1 denominator; a single
/// sample has zero spread).
pub fn ttime(times: &[f64]) -> Result<f64, MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::EmptyTimes);
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let stdev = sample_stdev(times, mean);
    Ok(mean + 3.0 * stdev)
}

fn sample_stdev(times: &[f64], mean: f64) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() as f64 - 1.0);
    var.sqrt()
}

/// Aggregate travel time with non-arrived agents charged the time cap.
/// Finite and monotone in failure; used by sweeps and the offline optimizer.
pub fn ttime_with_cap(result: &SimulationResult) -> f64 {
    let times = result.arrival_times_or(result.time_cap);
    if times.is_empty() {
        0.0
    } else {
        ttime(&times).unwrap()
    }
}

/// The mu + 3 sigma aggregate of each agent's shortest-path travel time.
pub fn min_ttime(scenario: &Scenario) -> Result<f64, MetricsError> {
    if scenario.agents.is_empty() {
        return Ok(0.0);
    }
    let times = min_goal_times(scenario)?;
    ttime(&times)
}

/// Per-agent lower-bound travel time: clearance-aware shortest path length
/// divided by max speed.
pub fn min_goal_times(scenario: &Scenario) -> Result<Vec<f64>, MetricsError> {
    let mut times = Vec::with_capacity(scenario.agents.len());
    // All benchmark agents share one radius; cache the graph per radius.
    let mut graphs: Vec<(f64, VisibilityGraph)> = Vec::new();
    for agent in &scenario.agents {
        let graph = match graphs.iter().position(|(r, _)| *r == agent.radius) {
            Some(i) => &graphs[i].1,
            None => {
                graphs.push((
                    agent.radius,
                    VisibilityGraph::build(scenario, agent.radius),
                ));
                &graphs.last().unwrap().1
            }
        };
        let length = graph
            .path_length(agent.start, agent.goal)
            .ok_or(MetricsError::Unreachable(agent.id))?;
        times.push(length / agent.max_speed);
    }
    Ok(times)
}

/// Full report for one finished (or capped) run.
pub fn interaction_overhead(
    result: &SimulationResult,
    scenario: &Scenario,
) -> Result<MetricsReport, MetricsError> {
    let min_tt = min_ttime(scenario)?;
    if !result.completed {
        return Ok(MetricsReport {
            ttime: None,
            min_ttime: min_tt,
            interaction_overhead: None,
            mean: None,
            stdev: None,
            n_agents: scenario.agents.len(),
            completed: false,
        });
    }
    if scenario.agents.is_empty() {
        return Ok(MetricsReport {
            ttime: Some(0.0),
            min_ttime: 0.0,
            interaction_overhead: Some(0.0),
            mean: Some(0.0),
            stdev: Some(0.0),
            n_agents: 0,
            completed: true,
        });
    }
    let times: Vec<f64> = result.arrival_times.iter().map(|t| t.unwrap()).collect();
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let stdev = sample_stdev(&times, mean);
    let tt = mean + 3.0 * stdev;
    Ok(MetricsReport {
        ttime: Some(tt),
        min_ttime: min_tt,
        interaction_overhead: Some(tt - min_tt),
        mean: Some(mean),
        stdev: Some(stdev),
        n_agents: times.len(),
        completed: true,
    })
}

/// Shortest paths around line-segment obstacles with disc clearance.
///
/// Obstacle endpoints are rounded off with rings of waypoint nodes slightly
/// outside the clearance radius; any two nodes whose connecting segment keeps
/// clearance from every obstacle are joined. Start and goal are attached per
/// query.
pub struct VisibilityGraph {
    radius: f64,
    obstacles: Vec<[Vec2; 2]>,
    nodes: Vec<Vec2>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

const RING_POINTS: usize = 48;
const RING_SCALE: f64 = 1.02;

impl VisibilityGraph {
    pub fn build(scenario: &Scenario, radius: f64) -> VisibilityGraph {
        let obstacles: Vec<[Vec2; 2]> = scenario.obstacles.iter().map(|o| o.endpoints).collect();
        let mut graph = VisibilityGraph {
            radius,
            obstacles,
            nodes: Vec::new(),
            adjacency: Vec::new(),
        };
        let mut candidates = Vec::new();
        for seg in &graph.obstacles {
            for endpoint in seg {
                for k in 0..RING_POINTS {
                    let theta = 2.0 * std::f64::consts::PI * k as f64 / RING_POINTS as f64;
                    let p = *endpoint + Vec2::new(theta.cos(), theta.sin()) * (radius * RING_SCALE);
                    if graph.point_clear(p) {
                        candidates.push(p);
                    }
                }
            }
        }
        graph.nodes = candidates;
        graph.adjacency = vec![Vec::new(); graph.nodes.len()];
        for i in 0..graph.nodes.len() {
            for j in i + 1..graph.nodes.len() {
                if graph.edge_clear(graph.nodes[i], graph.nodes[j]) {
                    let d = graph.nodes[i].dist(graph.nodes[j]);
                    graph.adjacency[i].push((j, d));
                    graph.adjacency[j].push((i, d));
                }
            }
        }
        graph
    }

    fn point_clear(&self, p: Vec2) -> bool {
        self.obstacles
            .iter()
            .all(|seg| crate::geom::dist_point_segment(p, seg[0], seg[1]) > self.radius)
    }

    fn edge_clear(&self, a: Vec2, b: Vec2) -> bool {
        self.obstacles
            .iter()
            .all(|seg| dist_segment_segment(a, b, seg[0], seg[1]) > self.radius)
    }

    /// Length of the shortest clearance-respecting path, if one exists.
    pub fn path_length(&self, start: Vec2, goal: Vec2) -> Option<f64> {
        if !self.point_clear(goal) {
            return None;
        }
        if self.edge_clear(start, goal) {
            return Some(start.dist(goal));
        }
        // Dijkstra over static nodes plus the two query endpoints.
        let n = self.nodes.len();
        let start_id = n;
        let goal_id = n + 1;
        let mut extra: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2];
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, &p) in self.nodes.iter().enumerate() {
            if self.edge_clear(start, p) {
                extra[0].push((i, start.dist(p)));
            }
            if self.edge_clear(goal, p) {
                incoming[i].push((goal_id, goal.dist(p)));
            }
        }
        let mut dist = vec![f64::INFINITY; n + 2];
        let mut heap: BinaryHeap<Reverse<(Ordered, usize)>> = BinaryHeap::new();
        dist[start_id] = 0.0;
        heap.push(Reverse((Ordered(0.0), start_id)));
        while let Some(Reverse((Ordered(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == goal_id {
                return Some(d);
            }
            let mut edges: Vec<(usize, f64)> = if u == start_id {
                extra[0].clone()
            } else {
                self.adjacency[u].clone()
            };
            if u < n {
                edges.extend_from_slice(&incoming[u]);
            }
            for (v, w) in edges {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Ordered(nd), v)));
                }
            }
        }
        None
    }
}

// f64 ordering shim for the Dijkstra heap (all distances are finite).
#[derive(PartialEq, PartialOrd)]
struct Ordered(f64);
impl Eq for Ordered {}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap()
    }
}
