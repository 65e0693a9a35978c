//! Target motion and analytic leader trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quarter_turn, rotation, Vec2};

/// Position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub p: Vec2,
    pub v: Vec2,
    pub a: Vec2,
}

/// Constant-velocity target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMotion {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl TargetMotion {
    pub fn at(&self, t: f64) -> Kinematics {
        Kinematics {
            p: self.position + self.velocity * t,
            v: self.velocity,
            a: Vec2::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderGenerator {
    Static {
        position: Vec2,
    },
    Translating {
        position: Vec2,
        velocity: Vec2,
    },
    /// Offset from the target rotating at `omega` rad/s, carried along with it.
    Circular {
        offset: Vec2,
        omega: f64,
    },
}

impl LeaderGenerator {
    pub fn at(&self, t: f64, target: &TargetMotion) -> Kinematics {
        match *self {
            LeaderGenerator::Static { position } => Kinematics {
                p: position,
                v: Vec2::zeros(),
                a: Vec2::zeros(),
            },
            LeaderGenerator::Translating { position, velocity } => Kinematics {
                p: position + velocity * t,
                v: velocity,
                a: Vec2::zeros(),
            },
            LeaderGenerator::Circular { offset, omega } => {
                let o = rotation(omega * t) * offset;
                let center = target.at(t);
                Kinematics {
                    p: center.p + o,
                    v: center.v + omega * (quarter_turn() * o),
                    a: center.a - omega * omega * o,
                }
            }
        }
    }

    /// Upper bound on `‖v̇‖` over all time.
    pub fn acceleration_bound(&self) -> f64 {
        match *self {
            LeaderGenerator::Static { .. } | LeaderGenerator::Translating { .. } => 0.0,
            LeaderGenerator::Circular { offset, omega } => omega * omega * offset.norm(),
        }
    }

    pub fn validate(&self, leader: usize) -> Result<()> {
        let finite = |v: &Vec2| v.iter().all(|x| x.is_finite());
        let ok = match self {
            LeaderGenerator::Static { position } => finite(position),
            LeaderGenerator::Translating { position, velocity } => finite(position) && finite(velocity),
            LeaderGenerator::Circular { offset, omega } => {
                if offset.norm() == 0.0 {
                    return Err(Error::ZeroOffset { leader });
                }
                finite(offset) && omega.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "leader {leader} trajectory is not finite"
            )))
        }
    }
}

/// Leaders that start at `initial_positions` and circle the target, the
/// first at `base_rate` rad/s and the rest at the rate that gives them the
/// same linear speed relative to the target.
pub fn leader_generator_circular(
    target: &TargetMotion,
    initial_positions: &[Vec2],
    base_rate: f64,
) -> Result<Vec<LeaderGenerator>> {
    let offsets: Vec<Vec2> = initial_positions.iter().map(|p| p - target.position).collect();
    for (k, o) in offsets.iter().enumerate() {
        if o.norm() == 0.0 {
            return Err(Error::ZeroOffset { leader: k + 1 });
        }
    }
    let Some(first) = offsets.first() else {
        return Ok(Vec::new());
    };
    let reference = first.norm();
    Ok(offsets
        .iter()
        .map(|&offset| LeaderGenerator::Circular {
            offset,
            omega: base_rate * reference / offset.norm(),
        })
        .collect())
}

/// `√Σ sup‖v̇_i‖²`, a bound on the stacked leader acceleration.
pub fn stacked_acceleration_bound(leaders: &[LeaderGenerator]) -> f64 {
    leaders
        .iter()
        .map(|g| g.acceleration_bound().powi(2))
        .sum::<f64>()
        .sqrt()
}
