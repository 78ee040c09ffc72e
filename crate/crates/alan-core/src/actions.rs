//! Per-agent action layer: preferred-velocity templates, the reward function,
//! the moving reward window, and the selection strategies (Softmax,
//! epsilon-greedy, UCB).

use crate::geom::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A preferred-velocity template: an angle offset from the agent's current
/// goal direction (positive = counterclockwise) and a speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Radians in (-pi, pi].
    pub angle_offset: f64,
    /// m/s, within the agent's speed limit.
    pub speed: f64,
}

/// The ordered set of actions an agent chooses from. The goal-directed action
/// (zero offset) always exists.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSet {
    pub actions: Vec<Action>,
    pub goal_action_index: usize,
}

#[derive(Debug, Error)]
pub enum ActionSetError {
    #[error("action-set parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("action set must be nonempty")]
    Empty,
    #[error("action set must contain a zero-offset (goal-directed) action")]
    NoGoalAction,
    #[error("action {index}: {problem}")]
    BadAction { index: usize, problem: &'static str },
}

/// On-disk form of one action: degrees at the boundary, radians internally.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFileEntry {
    angle_deg: f64,
    speed: f64,
}

impl ActionSet {
    pub fn new(actions: Vec<Action>) -> Result<ActionSet, ActionSetError> {
        if actions.is_empty() {
            return Err(ActionSetError::Empty);
        }
        for (index, a) in actions.iter().enumerate() {
            if !a.angle_offset.is_finite() || a.angle_offset <= -std::f64::consts::PI - 1e-9
                || a.angle_offset > std::f64::consts::PI + 1e-9
            {
                return Err(ActionSetError::BadAction {
                    index,
                    problem: "angle offset outside (-pi, pi]",
                });
            }
            if !a.speed.is_finite() || a.speed < 0.0 {
                return Err(ActionSetError::BadAction {
                    index,
                    problem: "speed must be nonnegative and finite",
                });
            }
        }
        let goal_action_index = actions
            .iter()
            .position(|a| a.angle_offset == 0.0)
            .ok_or(ActionSetError::NoGoalAction)?;
        Ok(ActionSet {
            actions,
            goal_action_index,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The eight-direction 1.5 m/s benchmark set: 0, 45, 90, 135, -45, -90,
    /// -135 and 180 degrees, in that id order.
    pub fn sample() -> ActionSet {
        let degs = [0.0, 45.0, 90.0, 135.0, -45.0, -90.0, -135.0, 180.0];
        ActionSet::new(
            degs.iter()
                .map(|d| Action {
                    angle_offset: d * std::f64::consts::PI / 180.0,
                    speed: 1.5,
                })
                .collect(),
        )
        .unwrap()
    }

    /// A multi-scenario tuned set: asymmetric, with half the actions moving
    /// the agent backwards from its goal. Useful as a default when nothing is
    /// known about the environment.
    pub fn multi_scenario() -> ActionSet {
        let degs = [0.0, 40.0, -35.0, 115.0, 150.0, -140.0];
        ActionSet::new(
            degs.iter()
                .map(|d| Action {
                    angle_offset: d * std::f64::consts::PI / 180.0,
                    speed: 1.5,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Single goal-directed action; turns the learning loop into plain
    /// goal-oriented collision avoidance.
    pub fn goal_only(speed: f64) -> ActionSet {
        ActionSet::new(vec![Action {
            angle_offset: 0.0,
            speed,
        }])
        .unwrap()
    }

    /// Parse from the JSON file form: an array of `{angle_deg, speed}`.
    pub fn load(source: &str) -> Result<ActionSet, ActionSetError> {
        let entries: Vec<ActionFileEntry> = serde_json::from_str(source)?;
        ActionSet::new(
            entries
                .iter()
                .map(|e| Action {
                    angle_offset: e.angle_deg * std::f64::consts::PI / 180.0,
                    speed: e.speed,
                })
                .collect(),
        )
    }

    pub fn save(&self) -> String {
        let entries: Vec<ActionFileEntry> = self
            .actions
            .iter()
            .map(|a| ActionFileEntry {
                angle_deg: a.angle_offset * 180.0 / std::f64::consts::PI,
                speed: a.speed,
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("action-set serialization cannot fail")
    }
}

/// Map an action to a preferred velocity at the agent's current position.
/// Returns the zero vector for an agent already at its goal.
pub fn preferred_velocity(action: &Action, position: Vec2, goal: Vec2) -> Vec2 {
    match (goal - position).normalized() {
        Some(dir) => dir.rotated(action.angle_offset) * action.speed,
        None => Vec2::ZERO,
    }
}

/// Projection of the executed collision-free velocity onto the goal direction.
pub fn goal_reward(v_new: Vec2, position: Vec2, goal: Vec2) -> f64 {
    match (goal - position).normalized() {
        Some(dir) => v_new.dot(dir),
        None => 0.0,
    }
}

/// Dot product of the executed and preferred velocities; equals
/// `||v_pref||^2` when collision avoidance left the choice untouched.
pub fn polite_reward(v_new: Vec2, v_pref: Vec2) -> f64 {
    v_new.dot(v_pref)
}

/// Convex combination of the goal and politeness components.
pub fn combined_reward(r_goal: f64, r_polite: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * r_goal + gamma * r_polite
}

/// Moving window of the most recent reward per action. An entry older than
/// `window_length` counts as never sampled; unsampled actions value zero.
#[derive(Clone, Debug)]
pub struct RewardWindow {
    entries: Vec<Option<(f64, f64)>>, // (reward, timestamp)
    pub window_length: f64,
}

impl RewardWindow {
    pub fn new(n_actions: usize, window_length: f64) -> RewardWindow {
        RewardWindow {
            entries: vec![None; n_actions],
            window_length,
        }
    }

    pub fn record(&mut self, action: usize, reward: f64, timestamp: f64) {
        self.entries[action] = Some((reward, timestamp));
    }

    /// Current value of every action at time `now`.
    pub fn action_values(&self, now: f64) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| match e {
                Some((reward, t)) if now - t <= self.window_length => *reward,
                _ => 0.0,
            })
            .collect()
    }
}

/// Which bandit strategy drives action selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Softmax,
    EpsilonGreedy,
    Ucb,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    /// Softmax temperature.
    pub temperature: f64,
    /// Exploration probability for epsilon-greedy.
    pub epsilon: f64,
    /// Coordination factor weighting politeness against goal progress.
    pub gamma: f64,
    /// Reward window length in seconds.
    pub window_length: f64,
    /// UCB exploration constant.
    pub ucb_c: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            strategy: Strategy::Softmax,
            temperature: 0.2,
            epsilon: 0.1,
            gamma: 0.4,
            window_length: 2.0,
            ucb_c: 1.0,
        }
    }
}

/// Boltzmann probabilities over action values, computed with max-subtraction.
pub fn softmax_probs(values: &[f64], temperature: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax_lowest_index(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for (i, v) in values.into_iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    best_i
}

/// Draw the next action index. `counts` and `total_pulls` feed UCB; the other
/// strategies ignore them. Deterministic given the rng state.
pub fn select_action<R: Rng>(
    values: &[f64],
    cfg: &SelectionConfig,
    rng: &mut R,
    counts: &[u64],
    total_pulls: u64,
) -> usize {
    debug_assert!(!values.is_empty());
    match cfg.strategy {
        Strategy::Softmax => {
            let probs = softmax_probs(values, cfg.temperature);
            let mut x: f64 = rng.gen();
            for (i, p) in probs.iter().enumerate() {
                x -= p;
                if x <= 0.0 {
                    return i;
                }
            }
            probs.len() - 1
        }
        Strategy::EpsilonGreedy => {
            if cfg.epsilon > 0.0 && rng.gen::<f64>() < cfg.epsilon {
                rng.gen_range(0..values.len())
            } else {
                argmax_lowest_index(values.iter().cloned())
            }
        }
        Strategy::Ucb => {
            if let Some(i) = counts.iter().position(|&c| c == 0) {
                return i;
            }
            let total = total_pulls.max(1) as f64;
            argmax_lowest_index(values.iter().zip(counts).map(|(v, &c)| {
                v + cfg.ucb_c * (2.0 * total.ln() / c as f64).sqrt()
            }))
        }
    }
}
