//! ORCA half-plane construction and the nearest-point linear program.
//!
//! Each neighbor (agent or obstacle) contributes a linear constraint in the
//! ego agent's velocity space. The feasible set is the intersection of all
//! half-planes with the speed-limit disc; the solver returns the feasible
//! velocity closest to the preferred one, falling back to a least-violation
//! solution when the intersection is empty.

use crate::geom::{closest_point_on_segment, Vec2};
use crate::world::Obstacle;

/// A linear constraint in velocity space. The permitted set is
/// `{ v : (v - point) . normal >= 0 }`; `normal` is unit length and points
/// into the permitted side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    pub normal: Vec2,
}

impl HalfPlane {
    /// Signed slack of a velocity against this constraint (negative = violated).
    pub fn slack(&self, v: Vec2) -> f64 {
        (v - self.point).dot(self.normal)
    }
}

/// What the ego agent knows about one neighboring agent.
#[derive(Clone, Copy, Debug)]
pub struct NeighborView {
    /// Neighbor position minus ego position (m).
    pub relative_position: Vec2,
    /// Ego velocity minus neighbor velocity (m/s).
    pub relative_velocity: Vec2,
    /// Sum of the two radii (m).
    pub combined_radius: f64,
    /// Neighbor's current velocity (m/s).
    pub neighbor_velocity: Vec2,
}

/// An ORCA constraint, flagged when it comes from an already-overlapping pair
/// (separation constraint instead of a velocity-obstacle boundary).
#[derive(Clone, Copy, Debug)]
pub struct Constraint {
    pub plane: HalfPlane,
    pub colliding: bool,
}

/// Build the reciprocal ORCA half-plane induced on the ego agent by one
/// neighbor. `u` is the minimum change in relative velocity needed to exit
/// the velocity obstacle truncated at `horizon`; the ego agent takes half of
/// it, so the boundary passes through `v_ego + u/2` with normal `u_hat`.
///
/// Overlapping agents get a separation constraint that resolves the contact
/// within one `dt`.
pub fn agent_halfplane(view: &NeighborView, horizon: f64, dt: f64) -> Constraint {
    let rel_pos = view.relative_position;
    let rel_vel = view.relative_velocity;
    let r = view.combined_radius;
    let ego_velocity = rel_vel + view.neighbor_velocity;

    let dist_sq = rel_pos.norm_sq();
    let r_sq = r * r;

    let (u, normal, colliding) = if dist_sq > r_sq {
        // w is the offset from the truncation disc center to the relative velocity.
        let w = rel_vel - rel_pos * (1.0 / horizon);
        let w_len_sq = w.norm_sq();
        let dot = w.dot(rel_pos);
        if dot < 0.0 && dot * dot > r_sq * w_len_sq {
            // Nearest exit is through the truncation arc.
            let w_len = w_len_sq.sqrt();
            let unit_w = w * (1.0 / w_len);
            (unit_w * (r / horizon - w_len), unit_w, false)
        } else {
            // Nearest exit is through one of the cone legs. An exact head-on
            // tie (cross product zero) resolves to the right leg, so u has
            // negative cross(rel_pos, u).
            let leg = (dist_sq - r_sq).sqrt();
            let dir = if rel_pos.cross(w) > 0.0 {
                Vec2::new(rel_pos.x * leg - rel_pos.y * r, rel_pos.x * r + rel_pos.y * leg)
                    * (1.0 / dist_sq)
            } else {
                -Vec2::new(rel_pos.x * leg + rel_pos.y * r, -rel_pos.x * r + rel_pos.y * leg)
                    * (1.0 / dist_sq)
            };
            let u = dir * rel_vel.dot(dir) - rel_vel;
            let normal = Vec2::new(-dir.y, dir.x);
            (u, normal, false)
        }
    } else {
        // Already overlapping: require the contact to resolve within one step.
        let w = rel_vel - rel_pos * (1.0 / dt);
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 {
            w * (1.0 / w_len)
        } else {
            rel_pos.normalized().map(|n| -n).unwrap_or(Vec2::new(1.0, 0.0))
        };
        (unit_w * (r / dt - w_len), unit_w, true)
    };

    Constraint {
        plane: HalfPlane {
            point: ego_velocity + u * 0.5,
            normal,
        },
        colliding,
    }
}

/// Build the half-plane keeping the ego agent clear of a static obstacle.
///
/// Obstacles do not reciprocate, so the agent takes full responsibility: the
/// approach speed towards the closest obstacle point is capped so the gap
/// cannot close within `horizon`. Returns `None` when even full speed cannot
/// reach the obstacle within the horizon.
pub fn obstacle_halfplane(
    position: Vec2,
    radius: f64,
    max_speed: f64,
    obstacle: &Obstacle,
    horizon: f64,
    dt: f64,
) -> Option<Constraint> {
    let closest = closest_point_on_segment(position, obstacle.endpoints[0], obstacle.endpoints[1]);
    let away = position - closest;
    let dist = away.norm();
    let normal = away.normalized().unwrap_or(Vec2::new(0.0, 1.0));
    let gap = dist - radius;
    if gap > max_speed * horizon {
        return None;
    }
    let (limit, colliding) = if gap >= 0.0 {
        // v . normal >= -gap / horizon
        (-gap / horizon, false)
    } else {
        // Penetrating: push out within one step.
        (-gap / dt, true)
    };
    Some(Constraint {
        plane: HalfPlane {
            point: normal * limit,
            normal,
        },
        colliding,
    })
}

/// Result of the nearest-point LP.
#[derive(Clone, Copy, Debug)]
pub struct LpResult {
    pub velocity: Vec2,
    /// False when the half-plane intersection was empty and the fallback
    /// (least maximum violation, hard constraints kept) was used.
    pub feasible: bool,
}

// Internal line form: points on the boundary are `point + t * direction`;
// the permitted side is to the left of `direction`.
#[derive(Clone, Copy)]
struct Line {
    point: Vec2,
    direction: Vec2,
}

impl From<&HalfPlane> for Line {
    fn from(h: &HalfPlane) -> Line {
        Line {
            point: h.point,
            direction: Vec2::new(h.normal.y, -h.normal.x),
        }
    }
}

/// Solve `argmin ||v - v_pref||` over the intersection of `constraints` with
/// the disc of radius `v_max`. The first `n_hard` constraints are obstacle
/// constraints: when the program is infeasible they are kept hard while the
/// remaining (agent) constraints are relaxed uniformly, minimizing the
/// maximum violation. Deterministic: constraints are processed in order.
pub fn solve_lp(constraints: &[HalfPlane], n_hard: usize, v_pref: Vec2, v_max: f64) -> LpResult {
    let lines: Vec<Line> = constraints.iter().map(Line::from).collect();
    let mut result = Vec2::ZERO;
    match solve_2d(&lines, v_max, v_pref, false, &mut result) {
        None => LpResult {
            velocity: result,
            feasible: true,
        },
        Some(failed) => {
            solve_3d(&lines, n_hard.min(lines.len()), failed, v_max, &mut result);
            LpResult {
                velocity: result,
                feasible: false,
            }
        }
    }
}

/// Project onto the boundary of `lines[index]`, staying inside the disc and
/// all earlier constraints. Returns false when that intersection is empty.
fn solve_1d(
    lines: &[Line],
    index: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = &lines[index];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        // The line misses the speed disc entirely.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..index] {
        let denominator = line.direction.cross(other.direction);
        let numerator = other.direction.cross(line.point - other.point);
        if denominator.abs() <= 1e-12 {
            // Parallel lines.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        // Optimize direction: take the extreme point along opt_velocity.
        if opt_velocity.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        ((opt_velocity - line.point).dot(line.direction)).clamp(t_left, t_right)
    };
    *result = line.point + line.direction * t;
    true
}

/// Incremental insertion; on a violated constraint the current optimum is
/// re-projected onto that constraint's boundary. Returns the index of the
/// first constraint that made the program infeasible, if any.
fn solve_2d(
    lines: &[Line],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> Option<usize> {
    *result = if direction_opt {
        opt_velocity * radius
    } else if opt_velocity.norm_sq() > radius * radius {
        opt_velocity.normalized().unwrap() * radius
    } else {
        opt_velocity
    };

    for (i, line) in lines.iter().enumerate() {
        if line.direction.cross(line.point - *result) > 0.0 {
            let temp = *result;
            if !solve_1d(lines, i, radius, opt_velocity, direction_opt, result) {
                *result = temp;
                return Some(i);
            }
        }
    }
    None
}

/// Infeasible fallback: move the soft constraints back at equal speed until a
/// single point satisfies all of them, keeping the first `n_hard` constraints
/// fixed. Minimizes the maximum violation over the soft constraints.
fn solve_3d(lines: &[Line], n_hard: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].direction.cross(lines[i].point - *result) > distance {
            let mut proj_lines: Vec<Line> = lines[..n_hard].to_vec();
            for j in n_hard..i {
                let determinant = lines[i].direction.cross(lines[j].direction);
                let point = if determinant.abs() <= 1e-12 {
                    if lines[i].direction.dot(lines[j].direction) > 0.0 {
                        continue;
                    }
                    (lines[i].point + lines[j].point) * 0.5
                } else {
                    lines[i].point
                        + lines[i].direction
                            * (lines[j].direction.cross(lines[i].point - lines[j].point)
                                / determinant)
                };
                let direction = match (lines[j].direction - lines[i].direction).normalized() {
                    Some(d) => d,
                    None => continue,
                };
                proj_lines.push(Line { point, direction });
            }
            let temp = *result;
            let perpendicular = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
            if solve_2d(&proj_lines, radius, perpendicular, true, result).is_some() {
                // Should not happen by construction; keep the previous result.
                *result = temp;
            }
            distance = lines[i].direction.cross(lines[i].point - *result);
        }
    }
}
