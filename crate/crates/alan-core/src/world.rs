//! Agents, obstacles and scenarios, plus the JSON scenario file format.

use crate::geom::{dist_point_segment, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One simulated agent: a disc moving on the plane towards a goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: u32,
    pub start: Vec2,
    pub goal: Vec2,
    /// Disc radius in meters.
    pub radius: f64,
    /// Speed limit in m/s.
    pub max_speed: f64,
}

/// A static obstacle approximated by a line segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub endpoints: [Vec2; 2],
}

impl Obstacle {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Obstacle { endpoints: [a, b] }
    }

    pub fn dist_to_point(&self, p: Vec2) -> f64 {
        dist_point_segment(p, self.endpoints[0], self.endpoints[1])
    }
}

/// A navigation problem: agents with starts and goals, plus static obstacles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub agents: Vec<AgentSpec>,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("agent {id}: {field} must be {requirement}")]
    BadAgentField {
        id: u32,
        field: &'static str,
        requirement: &'static str,
    },
    #[error("duplicate agent id {0}")]
    DuplicateId(u32),
    #[error("agent {id}: non-finite {field}")]
    NonFinite { id: u32, field: &'static str },
    #[error("obstacle {0}: endpoints must be distinct")]
    DegenerateObstacle(usize),
    #[error("obstacle {0}: non-finite endpoint")]
    NonFiniteObstacle(usize),
    #[error("agents {0} and {1} start overlapping (center distance <= r_i + r_j)")]
    OverlappingStarts(u32, u32),
    #[error("agent {agent} starts penetrating obstacle {obstacle}")]
    PenetratingObstacle { agent: u32, obstacle: usize },
}

impl Scenario {
    /// Parse and fully validate a scenario from its JSON text form.
    pub fn load(source: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(source)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for a in &self.agents {
            if !a.start.is_finite() || !a.goal.is_finite() {
                return Err(ScenarioError::NonFinite {
                    id: a.id,
                    field: "position",
                });
            }
            if !a.radius.is_finite() || a.radius <= 0.0 {
                return Err(ScenarioError::BadAgentField {
                    id: a.id,
                    field: "radius",
                    requirement: "positive and finite",
                });
            }
            if !a.max_speed.is_finite() || a.max_speed <= 0.0 {
                return Err(ScenarioError::BadAgentField {
                    id: a.id,
                    field: "max_speed",
                    requirement: "positive and finite",
                });
            }
        }
        let mut ids: Vec<u32> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(ScenarioError::DuplicateId(w[0]));
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !o.endpoints[0].is_finite() || !o.endpoints[1].is_finite() {
                return Err(ScenarioError::NonFiniteObstacle(k));
            }
            if o.endpoints[0] == o.endpoints[1] {
                return Err(ScenarioError::DegenerateObstacle(k));
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                if a.start.dist(b.start) <= a.radius + b.radius {
                    return Err(ScenarioError::OverlappingStarts(a.id, b.id));
                }
            }
            for (k, o) in self.obstacles.iter().enumerate() {
                if o.dist_to_point(a.start) <= a.radius {
                    return Err(ScenarioError::PenetratingObstacle {
                        agent: a.id,
                        obstacle: k,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: u32, start: Vec2, goal: Vec2) -> AgentSpec {
        AgentSpec {
            id,
            start,
            goal,
            radius: 0.5,
            max_speed: 1.5,
        }
    }

    #[test]
    fn minimal_two_agent_file() {
        let src = r#"{
            "name": "pair",
            "agents": [
                {"id": 0, "start": {"x": 0, "y": 0}, "goal": {"x": 5, "y": 0}, "radius": 0.5, "max_speed": 1.5},
                {"id": 1, "start": {"x": 5, "y": 2}, "goal": {"x": 0, "y": 2}, "radius": 0.5, "max_speed": 1.5}
            ],
            "obstacles": []
        }"#;
        let s = Scenario::load(src).unwrap();
        assert_eq!(s.agents.len(), 2);
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let s = Scenario {
            name: "dup".into(),
            agents: vec![
                agent(3, Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
                agent(3, Vec2::new(5.0, 0.0), Vec2::new(6.0, 0.0)),
            ],
            obstacles: vec![],
        };
        assert!(matches!(s.validate(), Err(ScenarioError::DuplicateId(3))));
    }

    #[test]
    fn unknown_field_rejected() {
        let src = r#"{"name": "x", "agents": [], "obstacles": [], "extra": 1}"#;
        assert!(matches!(Scenario::load(src), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn overlapping_starts_rejected() {
        let s = Scenario {
            name: "overlap".into(),
            agents: vec![
                agent(0, Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
                agent(1, Vec2::new(0.9, 0.0), Vec2::new(2.0, 0.0)),
            ],
            obstacles: vec![],
        };
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::OverlappingStarts(0, 1))
        ));
    }

    #[test]
    fn round_trip_is_identical() {
        let s = Scenario {
            name: "rt".into(),
            agents: vec![agent(0, Vec2::new(0.25, -1.5), Vec2::new(3.75, 2.0))],
            obstacles: vec![Obstacle::new(Vec2::new(-1.0, 3.0), Vec2::new(2.0, 3.0))],
        };
        let reloaded = Scenario::load(&s.save()).unwrap();
        assert_eq!(s, reloaded);
    }
}
