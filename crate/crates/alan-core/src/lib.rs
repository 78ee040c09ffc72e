//! Decentralized multi-agent navigation: reciprocal collision avoidance with
//! online action selection, plus offline action-set optimization and the
//! travel-time metrics used to evaluate both.

pub mod actions;
pub mod engine;
pub mod geom;
pub mod mcmc;
pub mod metrics;
pub mod orca;
pub mod scenarios;
pub mod spatial;
pub mod world;

pub use actions::{Action, ActionSet, SelectionConfig, Strategy};
pub use engine::{run, EngineConfig, Policy, SimulationResult};
pub use geom::Vec2;
pub use metrics::MetricsReport;
pub use world::{AgentSpec, Obstacle, Scenario};
