//! Per-edge bearing observations, the bearing-only distance estimator and
//! sliding-window persistent-excitation monitors.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{bearing_rate, bearing_with_threshold, perp, Bearing, Vec2};

/// Largest `|φᵀφ̇|` accepted for an observation.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;

/// What follower `i` senses about neighbor `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeObservation {
    pub phi: Bearing,
    pub phi_dot: Vec2,
    pub v_ij: Vec2,
}

impl EdgeObservation {
    pub fn new(phi: Bearing, phi_dot: Vec2, v_ij: Vec2) -> Result<Self> {
        let drift = phi.as_vec().dot(&phi_dot);
        if !(drift.abs() <= ORTHOGONALITY_TOLERANCE) {
            return Err(Error::InvalidScenario(format!(
                "bearing rate is not orthogonal to the bearing (φᵀφ̇ = {drift:e})"
            )));
        }
        Ok(EdgeObservation { phi, phi_dot, v_ij })
    }

    /// Exact sensing from ground truth positions and velocities.
    pub fn from_states(p_i: &Vec2, v_i: &Vec2, p_j: &Vec2, v_j: &Vec2, min_separation: f64) -> Result<Self> {
        let phi = bearing_with_threshold(p_i, p_j, min_separation)?;
        let v_ij = v_j - v_i;
        let phi_dot = bearing_rate(&phi, &v_ij, (p_j - p_i).norm())?;
        Ok(EdgeObservation { phi, phi_dot, v_ij })
    }

    /// Bearing rate from two successive bearings, projected onto the
    /// perpendicular of the current bearing so the observation stays
    /// consistent.
    pub fn from_bearing_difference(phi: Bearing, previous: &Bearing, v_ij: Vec2, dt: f64) -> Self {
        let raw = (phi.as_vec() - previous.as_vec()) / dt;
        let phi_dot = phi.orthogonal_projector() * raw;
        EdgeObservation { phi, phi_dot, v_ij }
    }

    /// `|φ̄ᵀφ̇|`, the quantity whose windowed integral drives convergence.
    pub fn excitation(&self) -> f64 {
        perp(&self.phi).as_vec().dot(&self.phi_dot).abs()
    }
}

/// `ρ̂̇ = φᵀv − k₁(ρ̂|φ̄ᵀφ̇| − |φ̄ᵀv|)`.
pub fn estimator_rhs(rho_hat: f64, obs: &EdgeObservation, k1: f64) -> f64 {
    let phi = obs.phi.as_vec();
    let phi_bar = perp(&obs.phi).as_vec();
    phi.dot(&obs.v_ij) - k1 * (rho_hat * phi_bar.dot(&obs.phi_dot).abs() - phi_bar.dot(&obs.v_ij).abs())
}

/// `p̂_ij = ρ̂_ij φ_ij`. Negative estimates point backwards along the bearing.
pub fn displacement_estimate(rho_hat: f64, phi: &Bearing) -> Vec2 {
    rho_hat * phi.as_vec()
}

/// Edge from follower `from` toward neighbor `to` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
}

impl DirectedEdge {
    pub fn new(from: usize, to: usize) -> Self {
        DirectedEdge { from, to }
    }
}

impl std::fmt::Display for DirectedEdge {
    /// One-based labels, e.g. `4-6`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.from + 1, self.to + 1)
    }
}

/// Distance estimates for every follower edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    gain: f64,
    estimates: BTreeMap<DirectedEdge, f64>,
}

impl EstimatorState {
    pub fn new(gain: f64, estimates: BTreeMap<DirectedEdge, f64>) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "estimator gain must be positive, got {gain}"
            )));
        }
        if let Some((e, _)) = estimates.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "initial distance estimate on edge {e} is not finite"
            )));
        }
        Ok(EstimatorState { gain, estimates })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn get(&self, edge: &DirectedEdge) -> Option<f64> {
        self.estimates.get(edge).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DirectedEdge, f64)> + '_ {
        self.estimates.iter().map(|(&e, &v)| (e, v))
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Estimator right-hand side for every edge that has an observation.
    pub fn rates(&self, observations: &BTreeMap<DirectedEdge, EdgeObservation>) -> BTreeMap<DirectedEdge, f64> {
        self.estimates
            .iter()
            .filter_map(|(e, &rho_hat)| {
                observations
                    .get(e)
                    .map(|obs| (*e, estimator_rhs(rho_hat, obs, self.gain)))
            })
            .collect()
    }

    /// `ρ̂ ← ρ̂ + scale · rate` on every edge present in `rates`.
    pub fn advanced(&self, rates: &BTreeMap<DirectedEdge, f64>, scale: f64) -> Self {
        let mut next = self.clone();
        for (e, rate) in rates {
            if let Some(v) = next.estimates.get_mut(e) {
                *v += scale * rate;
            }
        }
        next
    }

    pub fn is_finite(&self) -> bool {
        self.estimates.values().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeStatus {
    /// Less than one full window has elapsed.
    Indeterminate,
    Satisfied,
    NotSatisfied,
}

/// Sliding-window trapezoidal integral of a nonnegative signal, compared
/// against a threshold over every full window.
#[derive(Debug, Clone)]
pub struct PeWindow {
    window: f64,
    threshold: f64,
    segments: VecDeque<(f64, f64)>,
    span: f64,
    integral: f64,
    last_value: Option<f64>,
    min_full_integral: Option<f64>,
}

impl PeWindow {
    pub fn new(window: f64, threshold: f64) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "excitation window must be positive, got {window}"
            )));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "excitation threshold must be positive, got {threshold}"
            )));
        }
        Ok(PeWindow {
            window,
            threshold,
            segments: VecDeque::new(),
            span: 0.0,
            integral: 0.0,
            last_value: None,
            min_full_integral: None,
        })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Adds a sample taken `dt` after the previous one. The first sample only
    /// anchors the trapezoid.
    pub fn push(&mut self, value: f64, dt: f64) -> PeStatus {
        if let Some(prev) = self.last_value {
            let area = 0.5 * (prev + value) * dt;
            self.segments.push_back((dt, area));
            self.span += dt;
            self.integral += area;
            let slack = self.window * 1e-9;
            while let Some(&(front_dt, front_area)) = self.segments.front() {
                if self.span - front_dt >= self.window - slack {
                    self.segments.pop_front();
                    self.span -= front_dt;
                    self.integral -= front_area;
                } else {
                    break;
                }
            }
            self.integral = self.integral.max(0.0);
            if self.is_full() {
                let m = self.min_full_integral.map_or(self.integral, |m| m.min(self.integral));
                self.min_full_integral = Some(m);
            }
        }
        self.last_value = Some(value);
        self.status()
    }

    fn is_full(&self) -> bool {
        self.span >= self.window * (1.0 - 1e-9)
    }

    /// Integral over the most recent window (partial before the first full one).
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Status of the most recent window.
    pub fn status(&self) -> PeStatus {
        if !self.is_full() {
            PeStatus::Indeterminate
        } else if self.integral > self.threshold {
            PeStatus::Satisfied
        } else {
            PeStatus::NotSatisfied
        }
    }

    /// Smallest integral over every full window seen so far.
    pub fn min_full_integral(&self) -> Option<f64> {
        self.min_full_integral
    }

    /// Verdict over the whole history: satisfied only if every full window
    /// exceeded the threshold.
    pub fn verdict(&self) -> PeStatus {
        match self.min_full_integral {
            None => PeStatus::Indeterminate,
            Some(m) if m > self.threshold => PeStatus::Satisfied,
            Some(_) => PeStatus::NotSatisfied,
        }
    }

    /// `min_full_integral − threshold`, when at least one window is full.
    pub fn margin(&self) -> Option<f64> {
        self.min_full_integral.map(|m| m - self.threshold)
    }
}

/// Feeds `|φ̄ᵀφ̇|` into the estimator excitation monitor.
pub fn pe_estimator_update(w: &mut PeWindow, obs: &EdgeObservation, dt: f64) -> PeStatus {
    w.push(obs.excitation(), dt)
}

/// Feeds `‖γ̇*‖` into the leader-trajectory excitation monitor.
pub fn pe_leader_update(w: &mut PeWindow, gamma_dot: &Vec2, dt: f64) -> PeStatus {
    w.push(gamma_dot.norm(), dt)
}

/// Finite-difference `γ̇*` between two steps; zero when the desired relative
/// velocity vanishes at either end.
pub fn gamma_rate(previous: (f64, Vec2), current: (f64, Vec2), dt: f64) -> Vec2 {
    if previous.0 == 0.0 || current.0 == 0.0 {
        Vec2::zeros()
    } else {
        (current.1 - previous.1) / dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn obs(phi: (f64, f64), phi_dot: (f64, f64), v: (f64, f64)) -> EdgeObservation {
        let phi = Bearing::from_vector(Vec2::new(phi.0, phi.1), 0.0).unwrap();
        EdgeObservation::new(phi, Vec2::new(phi_dot.0, phi_dot.1), Vec2::new(v.0, v.1)).unwrap()
    }

    #[test]
    fn estimator_rhs_examples() {
        assert_eq!(estimator_rhs(7.0, &obs((1.0, 0.0), (0.0, 0.0), (0.0, 0.0)), 1.0), 0.0);
        let moving = obs((1.0, 0.0), (0.0, 0.5), (0.0, 1.0));
        assert_abs_diff_eq!(estimator_rhs(3.0, &moving, 1.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(estimator_rhs(2.0, &moving, 1.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn displacement_estimate_examples() {
        let east = Bearing::from_vector(Vec2::new(1.0, 0.0), 0.0).unwrap();
        let north = Bearing::from_vector(Vec2::new(0.0, 1.0), 0.0).unwrap();
        assert_eq!(displacement_estimate(2.0, &east), Vec2::new(2.0, 0.0));
        assert_eq!(displacement_estimate(0.0, &north), Vec2::zeros());
        assert_eq!(displacement_estimate(-1.0, &north), Vec2::new(0.0, -1.0));
    }

    #[test]
    fn observation_rejects_non_orthogonal_rate() {
        let phi = Bearing::from_vector(Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert!(EdgeObservation::new(phi, Vec2::new(0.1, 0.0), Vec2::zeros()).is_err());
    }

    #[test]
    fn finite_difference_rate_stays_orthogonal() {
        let prev = Bearing::from_vector(Vec2::new(1.0, 0.0), 0.0).unwrap();
        let cur = Bearing::from_vector(Vec2::new(0.01f64.cos(), 0.01f64.sin()), 0.0).unwrap();
        let o = EdgeObservation::from_bearing_difference(cur, &prev, Vec2::zeros(), 0.01);
        assert!(o.phi.as_vec().dot(&o.phi_dot).abs() < 1e-12);
        assert_abs_diff_eq!(o.excitation(), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn constant_bearing_is_not_exciting() {
        let mut w = PeWindow::new(2.0, 0.1).unwrap();
        let o = obs((0.0, 1.0), (0.0, 0.0), (0.0, 3.0));
        let mut status = PeStatus::Indeterminate;
        for _ in 0..=300 {
            status = pe_estimator_update(&mut w, &o, 0.01);
        }
        assert_eq!(status, PeStatus::NotSatisfied);
        assert_eq!(w.integral(), 0.0);
        assert_eq!(w.verdict(), PeStatus::NotSatisfied);
    }

    #[test]
    fn circular_motion_integrates_to_rate_times_window() {
        // Neighbor circling at ω = 0.5 rad/s: |φ̄ᵀφ̇| = ω, so each window holds ωσ = 2.
        let (omega, radius, dt, sigma) = (0.5, 3.0, 1e-3, 4.0);
        let mut w = PeWindow::new(sigma, 1.9).unwrap();
        let mut t = 0.0;
        let mut status = PeStatus::Indeterminate;
        for k in 0..=6000 {
            t = k as f64 * dt;
            let (s, c) = (omega * t).sin_cos();
            let p_j = Vec2::new(radius * c, radius * s);
            let v_j = Vec2::new(-radius * omega * s, radius * omega * c);
            let o = EdgeObservation::from_states(&Vec2::zeros(), &Vec2::zeros(), &p_j, &v_j, 1e-9).unwrap();
            status = pe_estimator_update(&mut w, &o, dt);
            if t < sigma - 1e-9 {
                assert_eq!(status, PeStatus::Indeterminate, "t = {t}");
            }
        }
        assert!(t > sigma);
        assert_eq!(status, PeStatus::Satisfied);
        assert_abs_diff_eq!(w.integral(), omega * sigma, epsilon = 1e-9);
        assert_abs_diff_eq!(w.margin().unwrap(), 0.1, epsilon = 1e-9);
    }

    #[test]
    fn leader_monitor_examples() {
        // Constant γ*: zero rate.
        let mut w = PeWindow::new(1.0, 0.5).unwrap();
        for _ in 0..=200 {
            pe_leader_update(&mut w, &Vec2::zeros(), 0.01);
        }
        assert_eq!(w.verdict(), PeStatus::NotSatisfied);

        // Vanishing desired relative velocity forces γ̇* = 0.
        let g = gamma_rate((0.0, Vec2::zeros()), (1.0, Vec2::new(1.0, 0.0)), 0.01);
        assert_eq!(g, Vec2::zeros());
        let g = gamma_rate((2.0, Vec2::new(1.0, 0.0)), (2.0, Vec2::new(0.0, 1.0)), 0.5);
        assert_eq!(g, Vec2::new(-2.0, 2.0));

        // Window not yet full.
        let mut w = PeWindow::new(10.0, 0.5).unwrap();
        for _ in 0..=100 {
            assert_eq!(
                pe_leader_update(&mut w, &Vec2::new(1.0, 0.0), 0.01),
                PeStatus::Indeterminate
            );
        }
        assert_eq!(w.verdict(), PeStatus::Indeterminate);
    }

    #[test]
    fn window_parameters_must_be_positive() {
        assert!(PeWindow::new(0.0, 1.0).is_err());
        assert!(PeWindow::new(1.0, 0.0).is_err());
        assert!(PeWindow::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn estimator_state_validates() {
        let mut m = BTreeMap::new();
        m.insert(DirectedEdge::new(3, 0), 1.0);
        assert!(EstimatorState::new(0.0, m.clone()).is_err());
        assert!(EstimatorState::new(1.0, m.clone()).is_ok());
        m.insert(DirectedEdge::new(3, 1), f64::NAN);
        assert!(EstimatorState::new(1.0, m).is_err());
        assert_eq!(DirectedEdge::new(3, 5).to_string(), "4-6");
    }

    /// Integrates one edge with exact sensing: `i` static at the origin, `j`
    /// following `path(t) -> (p, v)`. Returns `(t, ρ̃, φ)` samples.
    fn run_edge<F>(path: F, rho_hat0: f64, k1: f64, dt: f64, horizon: f64) -> Vec<(f64, f64, Vec2)>
    where
        F: Fn(f64) -> (Vec2, Vec2),
    {
        let steps = (horizon / dt).round() as usize;
        let mut rho_hat = rho_hat0;
        let mut out = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * dt;
            let (p, v) = path(t);
            let o = EdgeObservation::from_states(&Vec2::zeros(), &Vec2::zeros(), &p, &v, 1e-9).unwrap();
            out.push((t, rho_hat - p.norm(), o.phi.as_vec()));
            rho_hat += dt * estimator_rhs(rho_hat, &o, k1);
        }
        out
    }

    #[test]
    fn circular_motion_contracts_error_monotonically() {
        let (omega, radius) = (0.5, 3.0);
        let path = |t: f64| {
            let (s, c) = (omega * t).sin_cos();
            (
                Vec2::new(radius * c, radius * s),
                Vec2::new(-radius * omega * s, radius * omega * c),
            )
        };
        let trace = run_edge(path, 1.0, 1.0, 1e-3, 20.0);
        for pair in trace.windows(2) {
            assert!(pair[1].1.abs() <= pair[0].1.abs());
        }
        assert!(trace.last().unwrap().1.abs() < 1e-3);
    }

    #[test]
    fn static_agents_freeze_error_and_bearing() {
        let p = Vec2::new(2.0, -1.0);
        let trace = run_edge(|_| (p, Vec2::zeros()), 0.5, 1.0, 1e-3, 10.0);
        let (_, e0, phi0) = trace[0];
        for (_, e, phi) in &trace {
            assert!((e - e0).abs() <= 1e-9);
            assert!((phi - phi0).norm() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn true_distance_is_a_fixed_point(
            px in -20.0..20.0f64, py in -20.0..20.0f64,
            vx in -5.0..5.0f64, vy in -5.0..5.0f64,
            k1 in 0.1..10.0f64,
        ) {
            let p = Vec2::new(px, py);
            prop_assume!(p.norm() > 0.1);
            let v = Vec2::new(vx, vy);
            let o = EdgeObservation::from_states(&Vec2::zeros(), &Vec2::zeros(), &p, &v, 1e-9).unwrap();
            let rho = p.norm();
            let rho_dot = p.dot(&v) / rho;
            let scale = 1.0 + v.norm() * (1.0 + k1);
            prop_assert!((estimator_rhs(rho, &o, k1) - rho_dot).abs() <= 1e-10 * scale);
            prop_assert!((o.excitation() - o.phi_dot.norm()).abs() <= 1e-9);
        }
    }
}
