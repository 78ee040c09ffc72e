//! Offline action-set optimization by Markov-chain Monte Carlo with
//! simulated annealing.
//!
//! The chain walks over action sets: each iteration proposes modifying one
//! action's angle, adding a new action, or removing one, and accepts with the
//! Metropolis-Hastings rule `min(1, q * exp((F - F') / T))` where F is the
//! (lower is better) objective and q corrects for asymmetric proposal
//! probabilities across set sizes. Temperature, the modification range, and
//! the number of evaluation repetitions are annealed linearly. The best set
//! seen anywhere along the chain is returned.

use crate::actions::{Action, ActionSet};
use crate::engine::{run, EngineConfig, Policy};
use crate::geom::wrap_angle;
use crate::metrics::ttime_with_cap;
use crate::world::Scenario;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest action set the chain may grow to.
pub const MAX_ACTIONS: usize = 12;

const WEIGHT_MODIFY: f64 = 0.6;
const WEIGHT_ADD: f64 = 0.2;
const WEIGHT_REMOVE: f64 = 0.2;

/// Linear annealing schedule for the chain.
#[derive(Clone, Copy, Debug)]
pub struct AnnealSchedule {
    pub t_init: f64,
    pub t_final: f64,
    pub n_iterations: usize,
    /// Objective evaluation repetitions at the start / end of the chain.
    pub evals_start: usize,
    pub evals_end: usize,
    /// Half-width of the angle perturbation at the start / end (rad).
    pub range_start: f64,
    pub range_end: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t_init: 2.0,
            t_final: 0.05,
            n_iterations: 300,
            evals_start: 3,
            evals_end: 10,
            range_start: 60.0_f64.to_radians(),
            range_end: 10.0_f64.to_radians(),
        }
    }
}

impl AnnealSchedule {
    /// Fraction of the chain completed before iteration `iter`.
    fn progress(&self, iter: usize) -> f64 {
        if self.n_iterations <= 1 {
            0.0
        } else {
            iter as f64 / (self.n_iterations - 1) as f64
        }
    }

    pub fn temperature(&self, iter: usize) -> f64 {
        lerp(self.t_init, self.t_final, self.progress(iter))
    }

    pub fn modification_range(&self, iter: usize) -> f64 {
        lerp(self.range_start, self.range_end, self.progress(iter))
    }

    pub fn evals(&self, iter: usize) -> usize {
        lerp(
            self.evals_start as f64,
            self.evals_end as f64,
            self.progress(iter),
        )
        .round() as usize
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    Modify,
    Add,
    Remove,
}

/// One proposed move, with its Hastings correction factor.
#[derive(Clone, Copy, Debug)]
pub struct Proposal {
    pub kind: ProposalKind,
    /// Target action index (modify/remove) or insertion position (add).
    pub index: usize,
    /// New angle offset for modify/add (rad).
    pub angle: f64,
    /// Ratio of reverse to forward proposal probability.
    pub q: f64,
}

/// Sum of the weights of the kinds available for a set with `len` actions.
/// The goal action is never modified or removed, so sets holding only the
/// goal action can only grow.
fn kind_weight_sum(len: usize) -> f64 {
    let mut w = 0.0;
    if len > 1 {
        w += WEIGHT_MODIFY + WEIGHT_REMOVE;
    }
    if len < MAX_ACTIONS {
        w += WEIGHT_ADD;
    }
    w
}

/// Draw a proposal for `set` at the given modification half-width.
pub fn select_modification<R: Rng>(
    set: &ActionSet,
    range: f64,
    rng: &mut R,
) -> Proposal {
    let n = set.len();
    let w_total = kind_weight_sum(n);
    let mut pick = rng.gen::<f64>() * w_total;
    let kind = if n > 1 && pick < WEIGHT_MODIFY {
        ProposalKind::Modify
    } else {
        if n > 1 {
            pick -= WEIGHT_MODIFY;
        }
        if n > 1 && pick < WEIGHT_REMOVE {
            ProposalKind::Remove
        } else {
            ProposalKind::Add
        }
    };
    // Non-goal indices are everything except goal_action_index.
    let pick_non_goal = |rng: &mut R| {
        let k = rng.gen_range(0..n - 1);
        if k >= set.goal_action_index {
            k + 1
        } else {
            k
        }
    };
    match kind {
        ProposalKind::Modify => {
            let index = pick_non_goal(rng);
            let delta = rng.gen_range(-range..=range);
            Proposal {
                kind,
                index,
                angle: wrap_angle(set.actions[index].angle_offset + delta),
                q: 1.0,
            }
        }
        ProposalKind::Add => {
            let angle = wrap_angle(rng.gen_range(-PI..PI));
            // Forward: choose "add" (w_a / W_n), angle density 1 / 2pi.
            // Reverse: choose "remove" in the grown set (w_r / W_{n+1}) and
            // pick this action among its n non-goal actions.
            let forward = WEIGHT_ADD / w_total / (2.0 * PI);
            let reverse = WEIGHT_REMOVE / kind_weight_sum(n + 1) / n as f64;
            Proposal {
                kind,
                index: n,
                angle,
                q: reverse / forward,
            }
        }
        ProposalKind::Remove => {
            let index = pick_non_goal(rng);
            let forward = WEIGHT_REMOVE / w_total / (n - 1) as f64;
            let reverse = WEIGHT_ADD / kind_weight_sum(n - 1) / (2.0 * PI);
            Proposal {
                kind,
                index,
                angle: 0.0,
                q: reverse / forward,
            }
        }
    }
}

/// Apply a proposal, producing the candidate set.
pub fn apply_modification(set: &ActionSet, proposal: &Proposal) -> ActionSet {
    let mut actions = set.actions.clone();
    let mut goal = set.goal_action_index;
    match proposal.kind {
        ProposalKind::Modify => actions[proposal.index].angle_offset = proposal.angle,
        ProposalKind::Add => actions.push(Action {
            angle_offset: proposal.angle,
            speed: actions[goal].speed,
        }),
        ProposalKind::Remove => {
            actions.remove(proposal.index);
            if proposal.index < goal {
                goal -= 1;
            }
        }
    }
    ActionSet {
        actions,
        goal_action_index: goal,
    }
}

/// Metropolis-Hastings acceptance probability for moving from objective `f`
/// to `f_new` at temperature `t`.
pub fn acceptance_probability(f: f64, f_new: f64, t: f64, q: f64) -> f64 {
    if t <= 0.0 {
        return if f_new < f { 1.0 } else { 0.0 };
    }
    let exponent = ((f - f_new) / t).min(0.0);
    (q * exponent.exp()).min(1.0)
}

/// One row of the chain log.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainRow {
    pub iteration: usize,
    pub f: f64,
    pub accepted: bool,
    pub set_size: usize,
    pub temperature: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub best_set: ActionSet,
    pub best_f: f64,
    pub chain: Vec<ChainRow>,
}

/// Objective: mean capped travel-time aggregate over scenarios x repetitions,
/// simulated with the online policy using the candidate action set.
pub struct SimObjective {
    pub scenarios: Vec<Scenario>,
    pub cfg: EngineConfig,
    pub base_seed: u64,
}

impl SimObjective {
    pub fn evaluate(&self, set: &ActionSet, reps: usize) -> f64 {
        let mut total = 0.0;
        let mut count = 0;
        for scenario in &self.scenarios {
            for rep in 0..reps {
                let mut cfg = self.cfg;
                cfg.seed = self.base_seed.wrapping_add(rep as u64);
                let result = run(scenario, set, Policy::Alan, cfg);
                total += ttime_with_cap(&result);
                count += 1;
            }
        }
        total / count as f64
    }
}

/// Run the annealed chain. `objective(set, reps)` must be deterministic for a
/// fixed argument pair; all chain randomness comes from `seed`.
pub fn optimize(
    objective: &mut dyn FnMut(&ActionSet, usize) -> f64,
    schedule: &AnnealSchedule,
    seed: u64,
) -> OptimizeOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Start from the goal action plus one random direction.
    let goal_speed = 1.5;
    let mut current = ActionSet {
        actions: vec![
            Action {
                angle_offset: 0.0,
                speed: goal_speed,
            },
            Action {
                angle_offset: wrap_angle(rng.gen_range(-PI..PI)),
                speed: goal_speed,
            },
        ],
        goal_action_index: 0,
    };
    let mut f_current = objective(&current, schedule.evals(0));
    let mut best_set = current.clone();
    let mut best_f = f_current;
    let mut chain = Vec::with_capacity(schedule.n_iterations);
    for iter in 0..schedule.n_iterations {
        let t = schedule.temperature(iter);
        let range = schedule.modification_range(iter);
        let reps = schedule.evals(iter);
        let proposal = select_modification(&current, range, &mut rng);
        let candidate = apply_modification(&current, &proposal);
        let f_candidate = objective(&candidate, reps);
        let a = acceptance_probability(f_current, f_candidate, t, proposal.q);
        let accepted = rng.gen::<f64>() < a;
        if accepted {
            current = candidate;
            f_current = f_candidate;
            if f_current < best_f {
                best_f = f_current;
                best_set = current.clone();
            }
        }
        chain.push(ChainRow {
            iteration: iter,
            f: f_current,
            accepted,
            set_size: current.len(),
            temperature: t,
        });
    }
    OptimizeOutcome {
        best_set,
        best_f,
        chain,
    }
}
