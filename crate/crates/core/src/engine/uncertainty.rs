//! Bounded matched uncertainty acting on follower accelerations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyModel {
    #[default]
    Zero,
    Constant {
        value: Vec2,
    },
    /// `amplitude · sin(frequency · t + phase)`.
    Sinusoid {
        amplitude: Vec2,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `values[k]` holds from `times[k]` until the next switch; zero before
    /// the first.
    Piecewise {
        times: Vec<f64>,
        values: Vec<Vec2>,
    },
}

impl UncertaintyModel {
    pub fn at(&self, t: f64) -> Vec2 {
        match self {
            UncertaintyModel::Zero => Vec2::zeros(),
            UncertaintyModel::Constant { value } => *value,
            UncertaintyModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            UncertaintyModel::Piecewise { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    Vec2::zeros()
                } else {
                    values[k - 1]
                }
            }
        }
    }

    /// `sup_t ‖Δ(t)‖`.
    pub fn bound(&self) -> f64 {
        match self {
            UncertaintyModel::Zero => 0.0,
            UncertaintyModel::Constant { value } => value.norm(),
            UncertaintyModel::Sinusoid { amplitude, .. } => amplitude.norm(),
            UncertaintyModel::Piecewise { values, .. } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec2| v.iter().all(|x| x.is_finite());
        let ok = match self {
            UncertaintyModel::Zero => true,
            UncertaintyModel::Constant { value } => finite(value),
            UncertaintyModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => finite(amplitude) && frequency.is_finite() && phase.is_finite(),
            UncertaintyModel::Piecewise { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::InvalidScenario(format!(
                        "piecewise uncertainty has {} switch times but {} values",
                        times.len(),
                        values.len()
                    )));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidScenario(
                        "piecewise uncertainty switch times must increase".into(),
                    ));
                }
                times.iter().all(|t| t.is_finite()) && values.iter().all(finite)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario("uncertainty parameters are not finite".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sinusoid_bound_and_value() {
        let a = 0.2 / 2f64.sqrt();
        let m = UncertaintyModel::Sinusoid {
            amplitude: Vec2::new(a, a),
            frequency: 0.1,
            phase: 0.0,
        };
        assert_abs_diff_eq!(m.bound(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.at(5.0 * std::f64::consts::PI).norm(), 0.2, epsilon = 1e-15);
        assert_eq!(m.at(0.0), Vec2::zeros());
    }

    #[test]
    fn piecewise_switches() {
        let m = UncertaintyModel::Piecewise {
            times: vec![1.0, 2.0],
            values: vec![Vec2::new(0.1, 0.0), Vec2::new(0.0, -0.3)],
        };
        m.validate().unwrap();
        assert_eq!(m.at(0.5), Vec2::zeros());
        assert_eq!(m.at(1.0), Vec2::new(0.1, 0.0));
        assert_eq!(m.at(5.0), Vec2::new(0.0, -0.3));
        assert_abs_diff_eq!(m.bound(), 0.3);
    }

    #[test]
    fn malformed_piecewise_is_rejected() {
        let m = UncertaintyModel::Piecewise {
            times: vec![2.0, 1.0],
            values: vec![Vec2::zeros(), Vec2::zeros()],
        };
        assert!(m.validate().is_err());
        let m = UncertaintyModel::Piecewise {
            times: vec![1.0],
            values: vec![],
        };
        assert!(m.validate().is_err());
    }

    proptest! {
        #[test]
        fn values_respect_bound(ax in -1.0..1.0f64, ay in -1.0..1.0f64, f in 0.0..10.0f64, ph in -3.0..3.0f64, t in 0.0..100.0f64) {
            let m = UncertaintyModel::Sinusoid { amplitude: Vec2::new(ax, ay), frequency: f, phase: ph };
            prop_assert!(m.at(t).norm() <= m.bound() * (1.0 + 1e-12));
        }
    }
}
