//! Full runs: the closed loop over a horizon, the desired-trajectory
//! excitation check and the certificate bundle.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{
    avoidance_certificate, definiteness, lyapunov_matrices, stability_certificate, sup_follower_accel, validate_gains,
    AvoidanceCertificate, Definiteness, GainReport, StabilityCertificate,
};
use crate::error::{Error, Result};
use crate::estimation::{gamma_rate, DirectedEdge, EdgeObservation, PeStatus, PeWindow};
use crate::formation::{desired_relative_velocity, validate_stress, ValidationReport};
use crate::geometry::{Vec2, DEFAULT_MIN_SEPARATION};

use super::leader::stacked_acceleration_bound;
use super::trace::Trace;
use super::world::{collision_monitor, DesiredState, Simulation, WorldState};

/// Windows and thresholds of the two excitation conditions: `σ_v, ε_v` on
/// the desired relative-velocity directions, `σ_ω, ε_ω` on the bearings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeParams {
    pub sigma_v: f64,
    pub eps_v: f64,
    pub sigma_omega: f64,
    pub eps_omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Record one trace row every this many steps.
    pub sample_every: usize,
    pub pe: PeParams,
    /// Initial `(p, v)` of each follower.
    pub followers: Vec<(Vec2, Vec2)>,
    pub rho_hat: BTreeMap<DirectedEdge, f64>,
}

impl RunConfig {
    /// Number of steps; the horizon must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidScenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidScenario("sample period must be at least one step".into()));
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(self.dt) {
            return Err(Error::InvalidScenario(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Errors of the closed loop at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSnapshot {
    pub t: f64,
    /// `max |ρ̂ − ρ|` over follower edges.
    pub max_abs_rho_err: f64,
    /// Stacked `‖δ_p‖` over followers.
    pub delta_p: f64,
    pub delta_v: f64,
    pub ef_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeReport {
    pub edge: String,
    pub verdict: PeStatus,
    pub min_integral: Option<f64>,
    pub margin: Option<f64>,
}

impl PeReport {
    fn from_window(edge: String, w: &PeWindow) -> Self {
        PeReport {
            edge,
            verdict: w.verdict(),
            min_integral: w.min_full_integral(),
            margin: w.margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub decay_rate: f64,
    pub envelope_coeff: f64,
    pub checked: usize,
    pub violations: usize,
    /// Largest `‖e_f(t)‖ / bound(t)`.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    pub samples: usize,
    pub initial: ErrorSnapshot,
    pub terminal: ErrorSnapshot,
    /// `ρ̂ − ρ` per follower edge at the horizon.
    pub terminal_rho_err: BTreeMap<String, f64>,
    pub min_gap: f64,
    pub min_gap_time: f64,
    pub min_gap_pair: Option<[usize; 2]>,
    /// Edges whose estimate went negative at some step.
    pub negative_estimates: Vec<String>,
    pub estimator_pe: Vec<PeReport>,
    pub leader_pe: Vec<PeReport>,
    /// Present when the gains admit a stability certificate.
    pub envelope: Option<EnvelopeReport>,
    /// `sup ‖v̇_f*‖` over the steps of the run.
    pub sampled_sup_vdot_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: Summary,
}

/// Window and the last `(t, γ*)` sample of an undirected edge.
type LeaderMonitor = (PeWindow, Option<(f64, Vec2)>);

struct Monitors {
    estimator: BTreeMap<DirectedEdge, PeWindow>,
    leader: BTreeMap<(usize, usize), LeaderMonitor>,
}

impl Monitors {
    fn new(sim: &Simulation, pe: &PeParams) -> Result<Self> {
        let mut estimator = BTreeMap::new();
        for e in sim.edges() {
            estimator.insert(e, PeWindow::new(pe.sigma_omega, pe.eps_omega)?);
        }
        let mut leader = BTreeMap::new();
        for (i, j, _) in sim.spec().stress.edges() {
            leader.insert((i, j), (PeWindow::new(pe.sigma_v, pe.eps_v)?, None));
        }
        Ok(Monitors { estimator, leader })
    }

    fn push(
        &mut self,
        sim: &Simulation,
        desired: &DesiredState,
        observations: &BTreeMap<DirectedEdge, EdgeObservation>,
        dt: f64,
    ) {
        for (e, w) in self.estimator.iter_mut() {
            if let Some(obs) = observations.get(e) {
                w.push(obs.excitation(), dt);
            }
        }
        let r = sim.spec().reference.points();
        for ((i, j), (w, prev)) in self.leader.iter_mut() {
            let rv = desired_relative_velocity(&desired.a_dot, &r[*i], &r[*j]);
            let cur = (rv.magnitude, rv.direction);
            if let Some(p) = prev {
                w.push(gamma_rate(*p, cur, dt).norm(), dt);
            }
            *prev = Some(cur);
        }
    }

    fn reports(&self) -> (Vec<PeReport>, Vec<PeReport>) {
        let est = self
            .estimator
            .iter()
            .map(|(e, w)| PeReport::from_window(e.to_string(), w))
            .collect();
        let lead = self
            .leader
            .iter()
            .map(|((i, j), (w, _))| PeReport::from_window(format!("{}-{}", i + 1, j + 1), w))
            .collect();
        (est, lead)
    }
}

fn stacked_errors(sim: &Simulation, world: &WorldState, desired: &DesiredState) -> (Vec<Vec2>, Vec<Vec2>) {
    let n_l = sim.n_leaders();
    (n_l..sim.n())
        .map(|i| {
            (
                world.positions[i] - desired.agents[i].p,
                world.velocities[i] - desired.agents[i].v,
            )
        })
        .unzip()
}

fn stacked_norm(v: &[Vec2]) -> f64 {
    v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// `[δp; δv]` with interleaved coordinates, matching `P`.
fn error_vector(dp: &[Vec2], dv: &[Vec2]) -> DVector<f64> {
    DVector::from_iterator(4 * dp.len(), dp.iter().chain(dv.iter()).flat_map(|v| [v.x, v.y]))
}

fn rho_errors(world: &WorldState) -> BTreeMap<DirectedEdge, (f64, f64)> {
    world
        .estimator
        .iter()
        .map(|(e, rho_hat)| {
            let rho = (world.positions[e.to] - world.positions[e.from]).norm();
            (e, (rho_hat, rho))
        })
        .collect()
}

/// Integrates the closed loop from `cfg`'s initial state to the horizon.
pub fn run(sim: &Simulation, cfg: &RunConfig) -> Result<RunOutput> {
    let steps = cfg.steps()?;
    let dt = cfg.dt;
    let mut world = sim.initial_state(0.0, &cfg.followers, cfg.rho_hat.clone())?;
    let edges = sim.edges();
    let mut trace = Trace::new(sim.n(), sim.n_leaders(), &edges);
    let mut monitors = Monitors::new(sim, &cfg.pe)?;
    let p_matrix = lyapunov_matrices(&sim.spec().gains, &sim.spec().stress.blocks().ff).p;
    let certificate = stability_certificate(&sim.spec().gains, &sim.spec().stress).ok();
    let mut envelope = certificate.as_ref().map(|c| EnvelopeReport {
        decay_rate: c.decay_rate,
        envelope_coeff: c.envelope_coeff,
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    });

    let mut negative: BTreeSet<DirectedEdge> = BTreeSet::new();
    let mut min_gap = (f64::INFINITY, 0.0, None);
    let mut sup_vdot_f: f64 = 0.0;
    let mut initial = None;
    let mut e0_norm = 0.0;
    let mut terminal = None;
    let mut terminal_rho_err = BTreeMap::new();

    for k in 0..=steps {
        let t = k as f64 * dt;
        let desired = sim.desired(t)?;
        let (dp, dv) = stacked_errors(sim, &world, &desired);
        let ef = error_vector(&dp, &dv);
        let ef_norm = ef.norm();
        let rho = rho_errors(&world);
        let max_abs_rho_err = rho.values().map(|(h, r)| (h - r).abs()).fold(0.0, f64::max);
        let snapshot = ErrorSnapshot {
            t,
            max_abs_rho_err,
            delta_p: stacked_norm(&dp),
            delta_v: stacked_norm(&dv),
            ef_norm,
        };
        if k == 0 {
            initial = Some(snapshot);
            e0_norm = ef_norm;
        }
        let fa: Vec<Vec2> = desired.agents[sim.n_leaders()..].iter().map(|s| s.a).collect();
        sup_vdot_f = sup_vdot_f.max(stacked_norm(&fa));

        let (gap, pair) = collision_monitor(&world.positions);
        if gap < min_gap.0 {
            min_gap = (gap, t, pair.map(|(i, j)| [i + 1, j + 1]));
        }

        for (e, (h, _)) in &rho {
            if *h < 0.0 && negative.insert(*e) {
                log::warn!("distance estimate on edge {e} is negative ({h:.4}) at t = {t:.3} s");
            }
        }

        if let (Some(env), Some(cert)) = (envelope.as_mut(), certificate.as_ref()) {
            let bound = cert.envelope(e0_norm, t);
            env.checked += 1;
            if ef_norm > bound * (1.0 + 1e-9) + 1e-12 {
                env.violations += 1;
            }
            let ratio = if bound > 0.0 {
                ef_norm / bound
            } else if ef_norm > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            env.worst_ratio = env.worst_ratio.max(ratio);
        }

        sim.check_collision(&world)?;
        let eval = sim.evaluate(&world)?;
        monitors.push(sim, &desired, &eval.observations, dt);

        if steps > 0 && k % cfg.sample_every == 0 {
            let mut row = Vec::with_capacity(trace.columns().len());
            row.extend([t, world.target.x, world.target.y]);
            for i in 0..sim.n() {
                row.extend([world.positions[i].x, world.positions[i].y]);
                row.extend([world.velocities[i].x, world.velocities[i].y]);
            }
            for f in 0..sim.n_followers() {
                row.extend([eval.inputs[f].x, eval.inputs[f].y]);
                row.extend([dp[f].x, dp[f].y, dv[f].x, dv[f].y]);
            }
            for e in &edges {
                let (h, r) = rho[e];
                let pe = monitors.estimator[e].integral();
                row.extend([h, r, h - r, pe]);
            }
            let v_c = 0.5 * ef.dot(&(&p_matrix * &ef));
            row.extend([ef_norm, v_c, gap]);
            trace.push(row);
        }

        if k == steps {
            terminal = Some(snapshot);
            terminal_rho_err = rho.iter().map(|(e, (h, r))| (e.to_string(), h - r)).collect();
            break;
        }
        world = sim.step_to(&world, &eval, (k + 1) as f64 * dt)?;
    }

    if let Some(env) = &envelope {
        if env.violations > 0 {
            log::warn!(
                "exponential envelope violated at {} of {} steps",
                env.violations,
                env.checked
            );
        }
    }
    let (estimator_pe, leader_pe) = monitors.reports();
    let samples = trace.len();
    Ok(RunOutput {
        trace,
        summary: Summary {
            dt,
            horizon: cfg.horizon,
            steps,
            samples,
            initial: initial.expect("loop runs at least once"),
            terminal: terminal.expect("loop ends at the horizon"),
            terminal_rho_err,
            min_gap: min_gap.0,
            min_gap_time: min_gap.1,
            min_gap_pair: min_gap.2,
            negative_estimates: negative.iter().map(|e| e.to_string()).collect(),
            estimator_pe,
            leader_pe,
            envelope,
            sampled_sup_vdot_f: sup_vdot_f,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeCheck {
    pub horizon: f64,
    pub dt: f64,
    /// Condition on the desired relative-velocity directions, per edge.
    pub leader: Vec<PeReport>,
    /// Bearing excitation along the desired trajectories, per follower edge.
    pub estimator: Vec<PeReport>,
}

impl PeCheck {
    pub fn all_leader_edges(&self, status: PeStatus) -> bool {
        self.leader.iter().all(|r| r.verdict == status)
    }
}

/// Runs both excitation monitors along the desired trajectories only.
pub fn check_pe(sim: &Simulation, horizon: f64, dt: f64, pe: &PeParams) -> Result<PeCheck> {
    let probe = RunConfig {
        dt,
        horizon,
        sample_every: 1,
        pe: *pe,
        followers: Vec::new(),
        rho_hat: BTreeMap::new(),
    };
    let steps = probe.steps()?;
    let mut monitors = Monitors::new(sim, pe)?;
    let edges = sim.edges();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let desired = sim.desired(t)?;
        let mut observations = BTreeMap::new();
        for e in &edges {
            let (a, b) = (&desired.agents[e.from], &desired.agents[e.to]);
            let obs = EdgeObservation::from_states(&a.p, &a.v, &b.p, &b.v, DEFAULT_MIN_SEPARATION)?;
            observations.insert(*e, obs);
        }
        monitors.push(sim, &desired, &observations, dt);
    }
    let (estimator, leader) = monitors.reports();
    Ok(PeCheck {
        horizon,
        dt,
        leader,
        estimator,
    })
}

/// Extremes of the desired trajectories sampled over a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesiredSweep {
    pub min_desired_gap: f64,
    pub sup_vdot_f: f64,
    pub samples: usize,
}

/// Samples the desired trajectories every `period` seconds over `[0, horizon]`.
pub fn sweep_desired(sim: &Simulation, horizon: f64, period: f64) -> Result<DesiredSweep> {
    if !(period > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "sample period must be positive, got {period}"
        )));
    }
    let n = (horizon / period).floor() as usize;
    let mut out = DesiredSweep {
        min_desired_gap: f64::INFINITY,
        sup_vdot_f: 0.0,
        samples: 0,
    };
    for k in 0..=n {
        let d = sim.desired(k as f64 * period)?;
        let p: Vec<Vec2> = d.agents.iter().map(|s| s.p).collect();
        out.min_desired_gap = out.min_desired_gap.min(collision_monitor(&p).0);
        let fa: Vec<Vec2> = d.agents[sim.n_leaders()..].iter().map(|s| s.a).collect();
        out.sup_vdot_f = out.sup_vdot_f.max(stacked_norm(&fa));
        out.samples += 1;
    }
    Ok(out)
}

/// Scalars of a stability certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    pub decay_rate: f64,
    pub envelope_coeff: f64,
}

impl From<&StabilityCertificate> for StabilitySummary {
    fn from(c: &StabilityCertificate) -> Self {
        StabilitySummary {
            lambda_min_p: c.lambda_min_p,
            lambda_max_p: c.lambda_max_p,
            lambda_min_q: c.lambda_min_q,
            decay_rate: c.decay_rate,
            envelope_coeff: c.envelope_coeff,
        }
    }
}

/// Every static check on a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub assumption: ValidationReport,
    /// Bound used for `sup ‖v̇_f*‖` in the gain check.
    pub sup_vdot_f_used: f64,
    /// `‖L_ff⁻¹ L_fl‖₂ · sup ‖v̇_l*‖` from the leader generators.
    pub sup_vdot_f_bound: f64,
    pub desired: DesiredSweep,
    pub gains: GainReport,
    pub definiteness: Definiteness,
    pub stability: Option<StabilitySummary>,
    pub stability_error: Option<String>,
    pub avoidance: Option<AvoidanceCertificate>,
    pub avoidance_error: Option<String>,
    /// Assumption, gain and stability checks together; avoidance is advisory.
    pub mandatory_pass: bool,
}

/// Runs the assumption, gain, stability and avoidance checks.
///
/// `accel_bound` replaces the computed `sup ‖v̇_f*‖` bound when given.
pub fn certify(
    sim: &Simulation,
    cfg: &RunConfig,
    accel_bound: Option<f64>,
    clearance: f64,
    sweep_period: f64,
) -> Result<Certificates> {
    let spec = sim.spec();
    let assumption = validate_stress(&spec.stress, &spec.reference)?;
    let sup_vdot_f_bound = sup_follower_accel(&spec.stress, stacked_acceleration_bound(&spec.leaders))?;
    let sup_vdot_f_used = accel_bound.unwrap_or(sup_vdot_f_bound);
    let desired = sweep_desired(sim, cfg.horizon, sweep_period)?;
    let gains = validate_gains(&spec.gains, &spec.stress, sup_vdot_f_used);
    let definiteness = definiteness(&spec.gains, &spec.stress.blocks().ff);
    let (stability, stability_error, avoidance, avoidance_error) =
        match stability_certificate(&spec.gains, &spec.stress) {
            Ok(cert) => {
                let world = sim.initial_state(0.0, &cfg.followers, cfg.rho_hat.clone())?;
                let d0 = sim.desired(0.0)?;
                let (dp, dv) = stacked_errors(sim, &world, &d0);
                let e0 = error_vector(&dp, &dv).norm();
                let errs: BTreeMap<DirectedEdge, f64> =
                    rho_errors(&world).into_iter().map(|(e, (h, r))| (e, h - r)).collect();
                let av = avoidance_certificate(
                    e0,
                    &errs,
                    &spec.gains,
                    &spec.stress,
                    &cert,
                    desired.min_desired_gap,
                    clearance,
                );
                let summary = Some(StabilitySummary::from(&cert));
                match av {
                    Ok(a) => {
                        if !a.passes {
                            log::warn!(
                                "avoidance certificate fails ({:.4} > {:.4}); collisions are not ruled out",
                                a.lhs,
                                a.rhs
                            );
                        }
                        (summary, None, Some(a), None)
                    }
                    Err(e) => (summary, None, None, Some(e.to_string())),
                }
            }
            Err(e) => {
                log::warn!("{e}");
                (
                    None,
                    Some(e.to_string()),
                    None,
                    Some("no stability certificate".to_string()),
                )
            }
        };
    let mandatory_pass = assumption.passes && gains.passes && stability.is_some();
    Ok(Certificates {
        assumption,
        sup_vdot_f_used,
        sup_vdot_f_bound,
        desired,
        gains,
        definiteness,
        stability,
        stability_error,
        avoidance,
        avoidance_error,
        mandatory_pass,
    })
}
