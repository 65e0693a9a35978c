//! Closed-loop world state and the fixed-step integrator.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::control::{control_input, ControlGains, NeighborTerm, SignMode};
use crate::error::{Error, Result};
use crate::estimation::{DirectedEdge, EdgeObservation, EstimatorState};
use crate::formation::{affine_fit, apply_map, Configuration, StressMatrix};
use crate::geometry::{bearing_with_threshold, Bearing, Vec2, DEFAULT_MIN_SEPARATION};

use super::leader::{Kinematics, LeaderGenerator, TargetMotion};
use super::uncertainty::UncertaintyModel;

pub const DEFAULT_COLLISION_THRESHOLD: f64 = 1e-3;

/// Any state component beyond this magnitude aborts the run.
pub const BLOWUP_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// Source of the bearing rate handed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensing {
    /// `(I − φφᵀ) v_ij / ρ` from ground truth.
    #[default]
    Exact,
    /// Difference of successive bearings, projected onto the perpendicular.
    FiniteDifference,
}

/// Distance the controller uses to build `p̂_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feed {
    #[default]
    Estimated,
    /// True distances; the nominal loop without estimation error.
    Exact,
}

/// Everything that stays fixed during a run.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub reference: Configuration,
    pub stress: StressMatrix,
    pub target: TargetMotion,
    pub leaders: Vec<LeaderGenerator>,
    /// One model per follower.
    pub uncertainty: Vec<UncertaintyModel>,
    pub gains: ControlGains,
    pub k1: f64,
    pub sign: SignMode,
    pub sensing: Sensing,
    pub feed: Feed,
    pub integrator: Integrator,
    pub collision_threshold: f64,
}

/// Desired states of every agent at one instant.
#[derive(Debug, Clone)]
pub struct DesiredState {
    pub agents: Vec<Kinematics>,
    /// Rate of the affine matrix, `Ȧ`.
    pub a_dot: Matrix2<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    spec: SimulationSpec,
    /// Neighbors `(j, l_ij)` of each follower, in follower order.
    neighbors: Vec<Vec<(usize, f64)>>,
    /// `−L_ff⁻¹ L_fl`.
    follower_map: DMatrix<f64>,
}

impl Simulation {
    pub fn new(spec: SimulationSpec) -> Result<Self> {
        let n = spec.reference.len();
        let n_l = spec.reference.n_leaders();
        if spec.stress.n() != n || spec.stress.n_leaders() != n_l {
            return Err(Error::DimensionMismatch(format!(
                "stress matrix is for {} agents ({} leaders) but the configuration has {} ({})",
                spec.stress.n(),
                spec.stress.n_leaders(),
                n,
                n_l
            )));
        }
        if spec.leaders.len() != n_l {
            return Err(Error::DimensionMismatch(format!(
                "{} leader trajectories for {} leaders",
                spec.leaders.len(),
                n_l
            )));
        }
        if spec.uncertainty.len() != n - n_l {
            return Err(Error::DimensionMismatch(format!(
                "{} uncertainty models for {} followers",
                spec.uncertainty.len(),
                n - n_l
            )));
        }
        for (k, g) in spec.leaders.iter().enumerate() {
            g.validate(k + 1)?;
        }
        for u in &spec.uncertainty {
            u.validate()?;
        }
        if !(spec.k1 > 0.0 && spec.k1.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "estimator gain must be positive, got {}",
                spec.k1
            )));
        }
        if !(spec.collision_threshold >= 0.0) {
            return Err(Error::InvalidScenario("collision threshold must be nonnegative".into()));
        }
        if let SignMode::Smooth { epsilon } = spec.sign {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "smoothing width must be positive, got {epsilon}"
                )));
            }
        }
        if spec.integrator == Integrator::Rk4 && spec.sensing == Sensing::FiniteDifference {
            return Err(Error::InvalidScenario(
                "finite-difference sensing needs the Euler integrator".into(),
            ));
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (n_l..n).map(|i| spec.stress.neighbors(i)).collect();
        for (k, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::NoNeighbors { agent: n_l + k + 1 });
            }
        }
        let follower_map = spec.stress.follower_map()?;
        Ok(Simulation {
            spec,
            neighbors,
            follower_map,
        })
    }

    pub fn spec(&self) -> &SimulationSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.reference.len()
    }

    pub fn n_leaders(&self) -> usize {
        self.spec.reference.n_leaders()
    }

    pub fn n_followers(&self) -> usize {
        self.spec.reference.n_followers()
    }

    pub fn follower_map(&self) -> &DMatrix<f64> {
        &self.follower_map
    }

    /// Every follower edge, ordered by follower then neighbor.
    pub fn edges(&self) -> Vec<DirectedEdge> {
        let n_l = self.n_leaders();
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, list)| list.iter().map(move |&(j, _)| DirectedEdge::new(n_l + k, j)))
            .collect()
    }

    pub fn leader_states(&self, t: f64) -> Vec<Kinematics> {
        self.spec.leaders.iter().map(|g| g.at(t, &self.spec.target)).collect()
    }

    /// Leaders from their generators, followers from the stress relation.
    pub fn desired(&self, t: f64) -> Result<DesiredState> {
        let leaders = self.leader_states(t);
        let p: Vec<Vec2> = leaders.iter().map(|k| k.p).collect();
        let v: Vec<Vec2> = leaders.iter().map(|k| k.v).collect();
        let a: Vec<Vec2> = leaders.iter().map(|k| k.a).collect();
        let a_dot = affine_fit(&v, &self.spec.reference)?.a;
        let fp = apply_map(&self.follower_map, &p);
        let fv = apply_map(&self.follower_map, &v);
        let fa = apply_map(&self.follower_map, &a);
        let mut agents = leaders;
        agents.extend((0..fp.len()).map(|k| Kinematics {
            p: fp[k],
            v: fv[k],
            a: fa[k],
        }));
        Ok(DesiredState { agents, a_dot })
    }

    /// Leaders on their trajectories at `t`, followers at the given states.
    pub fn initial_state(
        &self,
        t: f64,
        followers: &[(Vec2, Vec2)],
        rho_hat: BTreeMap<DirectedEdge, f64>,
    ) -> Result<WorldState> {
        if followers.len() != self.n_followers() {
            return Err(Error::DimensionMismatch(format!(
                "{} follower states for {} followers",
                followers.len(),
                self.n_followers()
            )));
        }
        let edges = self.edges();
        if let Some(e) = rho_hat.keys().find(|e| !edges.contains(e)) {
            return Err(Error::InvalidScenario(format!(
                "estimate given for {e}, which is not a follower edge"
            )));
        }
        if let Some(e) = edges.iter().find(|e| !rho_hat.contains_key(e)) {
            return Err(Error::InvalidScenario(format!("no initial estimate for edge {e}")));
        }
        let leaders = self.leader_states(t);
        let mut positions: Vec<Vec2> = leaders.iter().map(|k| k.p).collect();
        let mut velocities: Vec<Vec2> = leaders.iter().map(|k| k.v).collect();
        positions.extend(followers.iter().map(|s| s.0));
        velocities.extend(followers.iter().map(|s| s.1));
        let world = WorldState {
            t,
            target: self.spec.target.at(t).p,
            positions,
            velocities,
            estimator: EstimatorState::new(self.spec.k1, rho_hat)?,
            previous_bearings: None,
        };
        world.check_finite()?;
        Ok(world)
    }

    /// Observations, control inputs, uncertainty and estimator rates at the
    /// world's current state.
    pub fn evaluate(&self, world: &WorldState) -> Result<Evaluation> {
        let n_l = self.n_leaders();
        let mut observations = BTreeMap::new();
        let mut bearings = BTreeMap::new();
        let mut inputs = Vec::with_capacity(self.n_followers());
        let mut terms = Vec::new();
        for (k, list) in self.neighbors.iter().enumerate() {
            let i = n_l + k;
            terms.clear();
            for &(j, weight) in list {
                let edge = DirectedEdge::new(i, j);
                let (p_i, v_i) = (world.positions[i], world.velocities[i]);
                let (p_j, v_j) = (world.positions[j], world.velocities[j]);
                let obs = match (self.spec.sensing, &world.previous_bearings) {
                    (Sensing::FiniteDifference, Some(prev)) => {
                        let phi = bearing_with_threshold(&p_i, &p_j, DEFAULT_MIN_SEPARATION)?;
                        let dt = world.t - prev.t;
                        match prev.bearings.get(&edge) {
                            Some(old) if dt > 0.0 => EdgeObservation::from_bearing_difference(phi, old, v_j - v_i, dt),
                            _ => EdgeObservation::from_states(&p_i, &v_i, &p_j, &v_j, DEFAULT_MIN_SEPARATION)?,
                        }
                    }
                    _ => EdgeObservation::from_states(&p_i, &v_i, &p_j, &v_j, DEFAULT_MIN_SEPARATION)?,
                };
                let rho_hat = match self.spec.feed {
                    Feed::Estimated => world.estimator.get(&edge).unwrap_or(0.0),
                    Feed::Exact => (p_j - p_i).norm(),
                };
                terms.push(NeighborTerm { weight, rho_hat, obs });
                bearings.insert(edge, obs.phi);
                observations.insert(edge, obs);
            }
            inputs.push(control_input(i + 1, &terms, &self.spec.gains, self.spec.sign)?);
        }
        let uncertainty = self.spec.uncertainty.iter().map(|m| m.at(world.t)).collect();
        let rho_rates = world.estimator.rates(&observations);
        Ok(Evaluation {
            observations,
            bearings,
            inputs,
            uncertainty,
            rho_rates,
        })
    }

    /// Advances one step of length `dt`.
    pub fn step(&self, world: &WorldState, dt: f64) -> Result<WorldState> {
        self.check_collision(world)?;
        let eval = self.evaluate(world)?;
        self.step_to(world, &eval, world.t + dt)
    }

    /// Advances to `t_next` reusing an evaluation of the current state.
    pub fn step_to(&self, world: &WorldState, eval: &Evaluation, t_next: f64) -> Result<WorldState> {
        let dt = t_next - world.t;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidScenario(format!("step must be positive, got {dt}")));
        }
        self.check_collision(world)?;
        let mut next = match self.spec.integrator {
            Integrator::Euler => self.euler(world, eval, dt),
            Integrator::Rk4 => self.rk4(world, eval, dt)?,
        };
        next.t = t_next;
        next.target = self.spec.target.at(t_next).p;
        for (k, s) in self.leader_states(t_next).into_iter().enumerate() {
            next.positions[k] = s.p;
            next.velocities[k] = s.v;
        }
        next.previous_bearings = match self.spec.sensing {
            Sensing::FiniteDifference => Some(BearingSnapshot {
                t: world.t,
                bearings: eval.bearings.clone(),
            }),
            Sensing::Exact => None,
        };
        next.check_finite()?;
        self.check_collision(&next)?;
        Ok(next)
    }

    fn euler(&self, world: &WorldState, eval: &Evaluation, dt: f64) -> WorldState {
        let n_l = self.n_leaders();
        let mut next = world.clone();
        for k in 0..self.n_followers() {
            let i = n_l + k;
            next.positions[i] += dt * world.velocities[i];
            next.velocities[i] += dt * (eval.inputs[k] + eval.uncertainty[k]);
        }
        next.estimator = world.estimator.advanced(&eval.rho_rates, dt);
        next
    }

    fn rk4(&self, world: &WorldState, k1: &Evaluation, dt: f64) -> Result<WorldState> {
        let stage = |base: &WorldState, slope: &Evaluation, h: f64, t: f64| -> Result<(WorldState, Evaluation)> {
            let mut s = self.euler(base, slope, h);
            s.t = t;
            for (k, l) in self.leader_states(t).into_iter().enumerate() {
                s.positions[k] = l.p;
                s.velocities[k] = l.v;
            }
            s.check_finite()?;
            let e = self.evaluate(&s)?;
            Ok((s, e))
        };
        let t = world.t;
        let (s2, k2) = stage(world, k1, dt / 2.0, t + dt / 2.0)?;
        let (s3, k3) = stage(world, &k2, dt / 2.0, t + dt / 2.0)?;
        let (s4, k4) = stage(world, &k3, dt, t + dt)?;

        let n_l = self.n_leaders();
        let mut next = world.clone();
        for k in 0..self.n_followers() {
            let i = n_l + k;
            let vel = world.velocities[i] + 2.0 * s2.velocities[i] + 2.0 * s3.velocities[i] + s4.velocities[i];
            next.positions[i] += dt / 6.0 * vel;
            let acc = |e: &Evaluation| e.inputs[k] + e.uncertainty[k];
            next.velocities[i] += dt / 6.0 * (acc(k1) + 2.0 * acc(&k2) + 2.0 * acc(&k3) + acc(&k4));
        }
        let mut rates = BTreeMap::new();
        for (e, r1) in &k1.rho_rates {
            let get = |ev: &Evaluation| ev.rho_rates.get(e).copied().unwrap_or(0.0);
            rates.insert(*e, (r1 + 2.0 * get(&k2) + 2.0 * get(&k3) + get(&k4)) / 6.0);
        }
        next.estimator = world.estimator.advanced(&rates, dt);
        Ok(next)
    }

    pub(crate) fn check_collision(&self, world: &WorldState) -> Result<()> {
        let (gap, pair) = collision_monitor(&world.positions);
        if let Some((i, j)) = pair {
            if gap < self.spec.collision_threshold {
                return Err(Error::CollisionDetected {
                    t: world.t,
                    i: i + 1,
                    j: j + 1,
                    distance: gap,
                });
            }
        }
        Ok(())
    }
}

/// Bearings seen at an earlier instant, for finite-difference sensing.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingSnapshot {
    pub t: f64,
    pub bearings: BTreeMap<DirectedEdge, Bearing>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub target: Vec2,
    /// All agents, leaders first.
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub estimator: EstimatorState,
    pub previous_bearings: Option<BearingSnapshot>,
}

impl WorldState {
    fn check_finite(&self) -> Result<()> {
        let bad_vec = |v: &Vec2| !(v.x.abs() <= BLOWUP_LIMIT && v.y.abs() <= BLOWUP_LIMIT);
        let what = if let Some(k) = self.positions.iter().position(bad_vec) {
            Some(format!("position of agent {}", k + 1))
        } else if let Some(k) = self.velocities.iter().position(bad_vec) {
            Some(format!("velocity of agent {}", k + 1))
        } else {
            self.estimator
                .iter()
                .find(|(_, v)| !(v.abs() <= BLOWUP_LIMIT))
                .map(|(e, _)| format!("distance estimate on edge {e}"))
        };
        match what {
            Some(what) => Err(Error::NumericalBlowup { t: self.t, what }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub observations: BTreeMap<DirectedEdge, EdgeObservation>,
    pub bearings: BTreeMap<DirectedEdge, Bearing>,
    /// Control input of each follower.
    pub inputs: Vec<Vec2>,
    /// Uncertainty acting on each follower.
    pub uncertainty: Vec<Vec2>,
    pub rho_rates: BTreeMap<DirectedEdge, f64>,
}

/// Smallest pairwise distance and the (zero-based) pair attaining it;
/// `+∞` and no pair when there are fewer than two points.
pub fn collision_monitor(positions: &[Vec2]) -> (f64, Option<(usize, usize)>) {
    let mut best = (f64::INFINITY, None);
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = (positions[i] - positions[j]).norm();
            if d < best.0 || best.1.is_none() {
                best = (d, Some((i, j)));
            }
        }
    }
    best
}
