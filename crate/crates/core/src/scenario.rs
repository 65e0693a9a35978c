//! Scenario files: JSON description of a run, with one-based agent labels.
//!
//! ```json
//! {
//!   "name": "example",
//!   "agents": [{"role": "leader", "r": [2, 0]}, ...],
//!   "stress": {"edges": [{"i": 1, "j": 2, "weight": 0.2714}, ...], "projection": "none"},
//!   "target": {"position": [0.667, 0], "velocity": [0.5, 0.5]},
//!   "leaders": {"kind": "circular", "initial_positions": [[4, 0], ...], "base_rate": 0.628},
//!   "followers": {"kind": "desired_offset", "position_offsets": [[0.3, 0.2], ...]},
//!   "estimator": {"k1": 1.0, "initial": 1.0},
//!   "gains": {"k_p": 1, "k_v": 1.5, "k_delta": 4, "delta_bar": 0.2},
//!   "uncertainty": [{"kind": "sinusoid", "amplitude": [0.1414, 0.1414], "frequency": 0.1}],
//!   "integrator": {"method": "euler", "dt": 0.001, "horizon": 60, "sample_period": 0.01},
//!   "pe": {"sigma_v": 5, "eps_v": 0.5, "sigma_omega": 5, "eps_omega": 0.1},
//!   "avoidance": {"clearance": 0.05}
//! }
//! ```
//!
//! A single uncertainty entry applies to every follower; otherwise there is
//! one per follower.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{ControlGains, SignMode};
use crate::engine::leader_generator_circular;
use crate::engine::world::DEFAULT_COLLISION_THRESHOLD;
use crate::engine::{
    Feed, Integrator, LeaderGenerator, PeParams, RunConfig, Sensing, Simulation, SimulationSpec, TargetMotion,
    UncertaintyModel,
};
use crate::error::{Error, Result};
use crate::estimation::DirectedEdge;
use crate::formation::{project_to_equilibrium, Configuration, StressMatrix};
use crate::geometry::Vec2;

pub const DEFAULT_INITIAL_ESTIMATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub role: Role,
    /// Position in the reference configuration.
    pub r: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Weights as given.
    #[default]
    None,
    /// Nearest weights that put the reference configuration in exact equilibrium.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressSpec {
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub projection: Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderSpec {
    /// Leaders start at absolute positions and circle the target, speed-matched
    /// to the first.
    Circular {
        initial_positions: Vec<Vec2>,
        base_rate: f64,
    },
    Explicit {
        generators: Vec<LeaderGenerator>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerState {
    pub p: Vec2,
    pub v: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FollowerSpec {
    /// Desired positions at `t = 0` plus offsets; velocities default to zero.
    DesiredOffset {
        position_offsets: Vec<Vec2>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocities: Option<Vec<Vec2>>,
    },
    Explicit {
        states: Vec<FollowerState>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOverride {
    pub from: usize,
    pub to: usize,
    pub rho_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub k1: f64,
    #[serde(default = "default_initial")]
    pub initial: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<EstimateOverride>,
}

fn default_initial() -> f64 {
    DEFAULT_INITIAL_ESTIMATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSpec {
    pub k_p: f64,
    pub k_v: f64,
    pub k_delta: f64,
    pub delta_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: Integrator,
    pub dt: f64,
    pub horizon: f64,
    pub sample_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidanceSpec {
    /// `c_c`, the clearance the certificate must guarantee, m.
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub agents: Vec<AgentSpec>,
    pub stress: StressSpec,
    pub target: TargetMotion,
    pub leaders: LeaderSpec,
    pub followers: FollowerSpec,
    pub estimator: EstimatorSpec,
    pub gains: GainSpec,
    /// Bound on `sup ‖v̇_f*‖` for the gain check; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follower_accel_bound: Option<f64>,
    pub uncertainty: Vec<UncertaintyModel>,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub sensing: Sensing,
    #[serde(default)]
    pub feed: Feed,
    pub pe: PeParams,
    pub avoidance: AvoidanceSpec,
    #[serde(default = "default_collision_threshold")]
    pub collision_threshold: f64,
    /// Boundary-layer width for the switching term; exact sign when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_sgn: Option<f64>,
    /// Reserved for noise models; runs are deterministic without one.
    #[serde(default)]
    pub seed: u64,
}

fn default_collision_threshold() -> f64 {
    DEFAULT_COLLISION_THRESHOLD
}

/// A scenario turned into engine inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub simulation: Simulation,
    pub run: RunConfig,
    pub accel_bound: Option<f64>,
    pub clearance: f64,
    pub sample_period: f64,
}

impl Scenario {
    /// Parses and checks the schema-level invariants.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.check_structure().map_err(|(key, message)| {
            let (line, column) = locate_key(text, key);
            Error::Parse { line, column, message }
        })?;
        Ok(scenario)
    }

    /// Entry point for arbitrary bytes.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            message: format!("scenario is not UTF-8: {e}"),
        })?;
        Self::from_json_str(text)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario values serialize")
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn n_leaders(&self) -> usize {
        self.agents.iter().filter(|a| a.role == Role::Leader).count()
    }

    pub fn n_followers(&self) -> usize {
        self.n() - self.n_leaders()
    }

    /// Structural problems, reported with the key they concern.
    fn check_structure(&self) -> std::result::Result<(), (&'static str, String)> {
        let n = self.n();
        let n_l = self.n_leaders();
        if let Some(k) = self
            .agents
            .windows(2)
            .position(|w| w[0].role == Role::Follower && w[1].role == Role::Leader)
        {
            return Err(("agents", format!("agents[{}]: leaders must precede followers", k + 1)));
        }
        for (k, e) in self.stress.edges.iter().enumerate() {
            for node in [e.i, e.j] {
                if node == 0 || node > n {
                    return Err(("edges", format!("stress.edges[{k}]: node {node} is not in 1..={n}")));
                }
            }
        }
        let leader_count = match &self.leaders {
            LeaderSpec::Circular { initial_positions, .. } => initial_positions.len(),
            LeaderSpec::Explicit { generators } => generators.len(),
        };
        if leader_count != n_l {
            return Err((
                "leaders",
                format!("leaders: {leader_count} trajectories for {n_l} leaders"),
            ));
        }
        let follower_count = match &self.followers {
            FollowerSpec::DesiredOffset {
                position_offsets,
                velocities,
            } => {
                if let Some(v) = velocities {
                    if v.len() != position_offsets.len() {
                        return Err((
                            "velocities",
                            format!(
                                "followers: {} velocities for {} offsets",
                                v.len(),
                                position_offsets.len()
                            ),
                        ));
                    }
                }
                position_offsets.len()
            }
            FollowerSpec::Explicit { states } => states.len(),
        };
        if follower_count != n - n_l {
            return Err((
                "followers",
                format!("followers: {follower_count} initial states for {} followers", n - n_l),
            ));
        }
        let u = self.uncertainty.len();
        if u != 1 && u != n - n_l {
            return Err((
                "uncertainty",
                format!("uncertainty: expected 1 or {} entries, got {u}", n - n_l),
            ));
        }
        for (k, o) in self.estimator.overrides.iter().enumerate() {
            if o.from <= n_l || o.from > n || o.to == 0 || o.to > n {
                return Err((
                    "overrides",
                    format!(
                        "estimator.overrides[{k}]: {}-{} is not an edge from a follower",
                        o.from, o.to
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<Configuration> {
        Configuration::new(self.agents.iter().map(|a| a.r).collect(), self.n_leaders())
    }

    /// Stress matrix as given, before any projection.
    pub fn published_stress(&self) -> Result<StressMatrix> {
        StressMatrix::from_edges(
            self.n(),
            self.n_leaders(),
            self.stress.edges.iter().map(|e| (e.i - 1, e.j - 1, e.weight)),
        )
    }

    /// Stress matrix used by the controller.
    pub fn stress_matrix(&self, reference: &Configuration) -> Result<StressMatrix> {
        let given = self.published_stress()?;
        match self.stress.projection {
            Projection::None => Ok(given),
            Projection::Equilibrium => project_to_equilibrium(&given, reference),
        }
    }

    pub fn gains(&self) -> Result<ControlGains> {
        let g = &self.gains;
        ControlGains::new(g.k_p, g.k_v, g.k_delta, g.delta_bar)
    }

    pub fn leader_generators(&self) -> Result<Vec<LeaderGenerator>> {
        match &self.leaders {
            LeaderSpec::Circular {
                initial_positions,
                base_rate,
            } => leader_generator_circular(&self.target, initial_positions, *base_rate),
            LeaderSpec::Explicit { generators } => Ok(generators.clone()),
        }
    }

    /// Builds the simulation and run configuration.
    pub fn prepare(&self) -> Result<Prepared> {
        let reference = self.reference()?;
        let stress = self.stress_matrix(&reference)?;
        let gains = self.gains()?;
        let n_f = self.n_followers();
        let uncertainty = if self.uncertainty.len() == 1 {
            vec![self.uncertainty[0].clone(); n_f]
        } else {
            self.uncertainty.clone()
        };
        for (k, u) in uncertainty.iter().enumerate() {
            if u.bound() > gains.delta_bar * (1.0 + 1e-12) {
                return Err(Error::InvalidScenario(format!(
                    "uncertainty on follower {} reaches {} above delta_bar = {}",
                    self.n_leaders() + k + 1,
                    u.bound(),
                    gains.delta_bar
                )));
            }
        }
        let sign = match self.smooth_sgn {
            None => SignMode::Exact,
            Some(epsilon) => SignMode::Smooth { epsilon },
        };
        let simulation = Simulation::new(SimulationSpec {
            reference,
            stress,
            target: self.target,
            leaders: self.leader_generators()?,
            uncertainty,
            gains,
            k1: self.estimator.k1,
            sign,
            sensing: self.sensing,
            feed: self.feed,
            integrator: self.integrator.method,
            collision_threshold: self.collision_threshold,
        })?;

        let desired = simulation.desired(0.0)?;
        let n_l = self.n_leaders();
        let followers: Vec<(Vec2, Vec2)> = match &self.followers {
            FollowerSpec::DesiredOffset {
                position_offsets,
                velocities,
            } => position_offsets
                .iter()
                .enumerate()
                .map(|(k, off)| {
                    let v = velocities.as_ref().map_or(Vec2::zeros(), |v| v[k]);
                    (desired.agents[n_l + k].p + off, v)
                })
                .collect(),
            FollowerSpec::Explicit { states } => states.iter().map(|s| (s.p, s.v)).collect(),
        };

        if !(self.estimator.initial > 0.0 && self.estimator.initial.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "initial distance estimate must be positive, got {}",
                self.estimator.initial
            )));
        }
        let mut rho_hat: BTreeMap<DirectedEdge, f64> = simulation
            .edges()
            .into_iter()
            .map(|e| (e, self.estimator.initial))
            .collect();
        for o in &self.estimator.overrides {
            let edge = DirectedEdge::new(o.from - 1, o.to - 1);
            match rho_hat.get_mut(&edge) {
                Some(v) => *v = o.rho_hat,
                None => {
                    return Err(Error::InvalidScenario(format!("{edge} is not a follower edge")));
                }
            }
        }

        let it = &self.integrator;
        let sample_every = sample_steps(it.sample_period, it.dt)?;
        if !(self.avoidance.clearance > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "clearance must be positive, got {}",
                self.avoidance.clearance
            )));
        }
        if let Some(b) = self.follower_accel_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "follower_accel_bound must be nonnegative, got {b}"
                )));
            }
        }
        let run = RunConfig {
            dt: it.dt,
            horizon: it.horizon,
            sample_every,
            pe: self.pe,
            followers,
            rho_hat,
        };
        run.steps()?;
        Ok(Prepared {
            simulation,
            run,
            accel_bound: self.follower_accel_bound,
            clearance: self.avoidance.clearance,
            sample_period: it.sample_period,
        })
    }
}

/// Whole number of steps in a sample period.
pub fn sample_steps(sample_period: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidScenario(format!("dt must be positive, got {dt}")));
    }
    if !(sample_period > 0.0 && sample_period.is_finite()) {
        return Err(Error::InvalidScenario(format!(
            "sample period must be positive, got {sample_period}"
        )));
    }
    let k = (sample_period / dt).round();
    if k < 1.0 || (k * dt - sample_period).abs() > 1e-9 * sample_period {
        return Err(Error::InvalidScenario(format!(
            "sample period {sample_period} is not a multiple of dt {dt}"
        )));
    }
    Ok(k as usize)
}

/// One-based line and column of the first `"key"` in `text`, or `(0, 0)`.
fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(offset) => {
            let before = &text[..offset];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    }
}
