//! Signum-robust follower controller, gain-condition checks and the
//! Lyapunov and collision-avoidance certificates that back it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{displacement_estimate, DirectedEdge, EdgeObservation};
use crate::formation::StressMatrix;
use crate::geometry::Vec2;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlGains {
    pub kp: f64,
    pub kv: f64,
    pub k_delta: f64,
    /// Bound on the uncertainty norm, m/s².
    pub delta_bar: f64,
}

impl ControlGains {
    pub fn new(kp: f64, kv: f64, k_delta: f64, delta_bar: f64) -> Result<Self> {
        for (name, value) in [("k_p", kp), ("k_v", kv), ("k_delta", k_delta), ("delta_bar", delta_bar)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(ControlGains {
            kp,
            kv,
            k_delta,
            delta_bar,
        })
    }
}

/// How the switching term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SignMode {
    /// `sgn`, with `sgn(0) = 0`.
    #[default]
    Exact,
    /// `x / (|x| + ε)`, a boundary layer for chattering studies.
    Smooth { epsilon: f64 },
}

impl SignMode {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            SignMode::Exact => signum(x),
            SignMode::Smooth { epsilon } => x / (x.abs() + epsilon),
        }
    }
}

/// Three-valued sign: `f64::signum` maps zero to one, which the switching
/// law must not do.
pub fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One neighbor's contribution as seen by a follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborTerm {
    pub weight: f64,
    pub rho_hat: f64,
    pub obs: EdgeObservation,
}

/// `u_i = Σ l_ij (k_p p̂_ij + k_v v_ij) + k_Δ sgn[Σ l_ij (p̂_ij + v_ij)]`.
pub fn control_input(agent: usize, neighbors: &[NeighborTerm], gains: &ControlGains, mode: SignMode) -> Result<Vec2> {
    if neighbors.is_empty() {
        return Err(Error::NoNeighbors { agent });
    }
    let mut feedback = Vec2::zeros();
    let mut surface = Vec2::zeros();
    for n in neighbors {
        let p_hat = displacement_estimate(n.rho_hat, &n.obs.phi);
        feedback += n.weight * (gains.kp * p_hat + gains.kv * n.obs.v_ij);
        surface += n.weight * (p_hat + n.obs.v_ij);
    }
    Ok(feedback + gains.k_delta * surface.map(|x| mode.apply(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub kp_ok: bool,
    pub lambda_min_ff: f64,
    /// `1 / λ_min(L_ff)`; `k_v` must exceed it.
    pub kv_threshold: f64,
    pub kv_margin: f64,
    pub kv_ok: bool,
    pub sup_vdot_f: f64,
    /// `Δ̄ + sup ‖v̇_f*‖`; `k_Δ` must exceed it.
    pub k_delta_threshold: f64,
    pub k_delta_margin: f64,
    pub k_delta_ok: bool,
    pub passes: bool,
}

/// Checks `k_p > 0`, `k_v > 1/λ_min(L_ff)` and `k_Δ > Δ̄ + sup‖v̇_f*‖`, all strict.
pub fn validate_gains(gains: &ControlGains, stress: &StressMatrix, sup_vdot_f: f64) -> GainReport {
    let lambda_min_ff = linalg::min_eigenvalue(&stress.blocks().ff);
    let kv_threshold = if lambda_min_ff > 0.0 {
        1.0 / lambda_min_ff
    } else {
        f64::INFINITY
    };
    let kv_margin = gains.kv - kv_threshold;
    let k_delta_threshold = gains.delta_bar + sup_vdot_f;
    let k_delta_margin = gains.k_delta - k_delta_threshold;
    let kp_ok = gains.kp > 0.0;
    let kv_ok = kv_margin > 0.0;
    let k_delta_ok = k_delta_margin > 0.0;
    GainReport {
        kp_ok,
        lambda_min_ff,
        kv_threshold,
        kv_margin,
        kv_ok,
        sup_vdot_f,
        k_delta_threshold,
        k_delta_margin,
        k_delta_ok,
        passes: kp_ok && kv_ok && k_delta_ok,
    }
}

/// `‖L_ff⁻¹ L_fl‖₂ · sup ‖v̇_l*‖`, a bound on the stacked follower desired
/// acceleration.
pub fn sup_follower_accel(stress: &StressMatrix, sup_vdot_l: f64) -> Result<f64> {
    let blocks = stress.blocks();
    if blocks.fl.iter().all(|&x| x == 0.0) || sup_vdot_l == 0.0 {
        return Ok(0.0);
    }
    let map = stress.follower_map()?;
    Ok(linalg::spectral_norm(&map) * sup_vdot_l)
}

/// `P` and `Q` of the quadratic Lyapunov function, in the stacking
/// `e_f = [δp_f; δv_f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovMatrices {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Assembles `P = [(k_p+k_v)L̄²  L̄; L̄  L̄]` and
/// `Q = diag(k_p L̄², k_v L̄² − L̄)` with `L̄ = L_ff ⊗ I₂`.
pub fn lyapunov_matrices(gains: &ControlGains, l_ff: &DMatrix<f64>) -> LyapunovMatrices {
    let lbar = linalg::kron_i2(l_ff);
    let l2 = &lbar * &lbar;
    let m = lbar.nrows();
    let mut p = DMatrix::zeros(2 * m, 2 * m);
    p.view_mut((0, 0), (m, m)).copy_from(&(&l2 * (gains.kp + gains.kv)));
    p.view_mut((0, m), (m, m)).copy_from(&lbar);
    p.view_mut((m, 0), (m, m)).copy_from(&lbar);
    p.view_mut((m, m), (m, m)).copy_from(&lbar);
    let mut q = DMatrix::zeros(2 * m, 2 * m);
    q.view_mut((0, 0), (m, m)).copy_from(&(&l2 * gains.kp));
    q.view_mut((m, m), (m, m)).copy_from(&(&l2 * gains.kv - &lbar));
    LyapunovMatrices { p, q }
}

/// Definiteness of `P` and `Q` by two routes: eigenvalues of the assembled
/// matrices, and Cholesky on the Schur-complement blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Definiteness {
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    pub lambda_max_q: f64,
    pub p_eigen_ok: bool,
    pub q_eigen_ok: bool,
    pub p_schur_ok: bool,
    pub q_schur_ok: bool,
}

pub fn definiteness(gains: &ControlGains, l_ff: &DMatrix<f64>) -> Definiteness {
    let LyapunovMatrices { p, q } = lyapunov_matrices(gains, l_ff);
    let ep = linalg::symmetric_eigenvalues(&p);
    let eq = linalg::symmetric_eigenvalues(&q);
    let lambda_min_p = ep.first().copied().unwrap_or(f64::NAN);
    let lambda_max_p = ep.last().copied().unwrap_or(f64::NAN);
    let lambda_min_q = eq.first().copied().unwrap_or(f64::NAN);
    let lambda_max_q = eq.last().copied().unwrap_or(f64::NAN);

    let lbar = linalg::kron_i2(l_ff);
    let l2 = &lbar * &lbar;
    // P ≻ 0 ⇔ L̄ ≻ 0 and (k_p + k_v)L̄² − L̄ L̄⁻¹ L̄ = (k_p + k_v)L̄² − L̄ ≻ 0.
    let p_schur_ok =
        linalg::is_positive_definite(&lbar) && linalg::is_positive_definite(&(&l2 * (gains.kp + gains.kv) - &lbar));
    // Q is block diagonal.
    let q_schur_ok =
        linalg::is_positive_definite(&(&l2 * gains.kp)) && linalg::is_positive_definite(&(&l2 * gains.kv - &lbar));

    Definiteness {
        lambda_min_p,
        lambda_max_p,
        lambda_min_q,
        lambda_max_q,
        p_eigen_ok: lambda_min_p > 0.0,
        q_eigen_ok: lambda_min_q > 0.0,
        p_schur_ok,
        q_schur_ok,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    /// `λ_min(Q) / λ_max(P)`, 1/s.
    pub decay_rate: f64,
    /// `√(λ_max(P) / λ_min(P))`.
    pub envelope_coeff: f64,
}

impl StabilityCertificate {
    /// `envelope_coeff · ‖e_f(0)‖ · exp(−decay_rate · t)`.
    pub fn envelope(&self, e0_norm: f64, t: f64) -> f64 {
        self.envelope_coeff * e0_norm * (-self.decay_rate * t).exp()
    }

    /// `½ eᵀ P e`.
    pub fn lyapunov_value(&self, e: &nalgebra::DVector<f64>) -> f64 {
        0.5 * e.dot(&(&self.p * e))
    }
}

pub fn stability_certificate(gains: &ControlGains, stress: &StressMatrix) -> Result<StabilityCertificate> {
    stability_certificate_from_block(gains, &stress.blocks().ff)
}

pub fn stability_certificate_from_block(gains: &ControlGains, l_ff: &DMatrix<f64>) -> Result<StabilityCertificate> {
    let d = definiteness(gains, l_ff);
    if !(d.p_eigen_ok && d.p_schur_ok) {
        return Err(Error::GainConditionViolated(format!(
            "P is not positive definite (λ_min(P) = {:.6e})",
            d.lambda_min_p
        )));
    }
    if !(d.q_eigen_ok && d.q_schur_ok) {
        return Err(Error::GainConditionViolated(format!(
            "Q is not positive definite (λ_min(Q) = {:.6e})",
            d.lambda_min_q
        )));
    }
    let LyapunovMatrices { p, q } = lyapunov_matrices(gains, l_ff);
    Ok(StabilityCertificate {
        p,
        q,
        lambda_min_p: d.lambda_min_p,
        lambda_max_p: d.lambda_max_p,
        lambda_min_q: d.lambda_min_q,
        decay_rate: d.lambda_min_q / d.lambda_max_p,
        envelope_coeff: (d.lambda_max_p / d.lambda_min_p).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidanceCertificate {
    pub c_e: f64,
    pub c_c: f64,
    pub min_desired_gap: f64,
    /// `√(λmax P / λmin P) ‖e_f(0)‖`.
    pub transient_bound: f64,
    /// `λmax(P) c_e / (2 λmin(Q))`.
    pub ultimate_bound: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passes: bool,
}

/// Sufficient condition for every pairwise distance to stay above `c_c`.
///
/// `c_e = Σ_{i∈V_f} Σ_{j∈N_i} [k_p l_ij |ρ̃_ij(0)| + 2k_Δ]`; edges missing from
/// `rho_tilde0` count as exact initial estimates.
pub fn avoidance_certificate(
    e_f0_norm: f64,
    rho_tilde0: &BTreeMap<DirectedEdge, f64>,
    gains: &ControlGains,
    stress: &StressMatrix,
    cert: &StabilityCertificate,
    min_desired_gap: f64,
    c_c: f64,
) -> Result<AvoidanceCertificate> {
    if !(c_c > 0.0 && c_c < min_desired_gap) {
        return Err(Error::InvalidClearance {
            clearance: c_c,
            min_gap: min_desired_gap,
        });
    }
    let c_e: f64 = follower_edges(stress)
        .map(|(edge, l)| {
            let err = rho_tilde0.get(&edge).copied().unwrap_or(0.0);
            gains.kp * l * err.abs() + 2.0 * gains.k_delta
        })
        .sum();
    let transient_bound = cert.envelope_coeff * e_f0_norm;
    let ultimate_bound = cert.lambda_max_p * c_e / (2.0 * cert.lambda_min_q);
    let lhs = transient_bound.max(ultimate_bound);
    let rhs = min_desired_gap - c_c;
    Ok(AvoidanceCertificate {
        c_e,
        c_c,
        min_desired_gap,
        transient_bound,
        ultimate_bound,
        lhs,
        rhs,
        passes: lhs <= rhs,
    })
}

/// Directed edges `(i, j)` for every follower `i` and neighbor `j`, with
/// `l_ij`, ordered by follower then neighbor.
pub fn follower_edges(stress: &StressMatrix) -> impl Iterator<Item = (DirectedEdge, f64)> + '_ {
    (stress.n_leaders()..stress.n()).flat_map(move |i| {
        stress
            .neighbors(i)
            .into_iter()
            .map(move |(j, w)| (DirectedEdge::new(i, j), w))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bearing;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn term(weight: f64, rho_hat: f64, phi: (f64, f64), v: (f64, f64)) -> NeighborTerm {
        let phi = Bearing::from_vector(Vec2::new(phi.0, phi.1), 0.0).unwrap();
        NeighborTerm {
            weight,
            rho_hat,
            obs: EdgeObservation {
                phi,
                phi_dot: Vec2::zeros(),
                v_ij: Vec2::new(v.0, v.1),
            },
        }
    }

    fn gains(kp: f64, kv: f64, kd: f64) -> ControlGains {
        ControlGains::new(kp, kv, kd, 0.2).unwrap()
    }

    #[test]
    fn control_input_examples() {
        let g = gains(1.0, 1.5, 4.0);
        // Two opposite neighbors cancel: u = 0 and sgn(0) = 0.
        let balanced = [
            term(1.0, 2.0, (1.0, 0.0), (0.0, 0.0)),
            term(1.0, 2.0, (-1.0, 0.0), (0.0, 0.0)),
        ];
        assert_eq!(control_input(3, &balanced, &g, SignMode::Exact).unwrap(), Vec2::zeros());

        let single = [term(1.0, 2.0, (1.0, 0.0), (0.0, 0.0))];
        assert_eq!(
            control_input(3, &single, &g, SignMode::Exact).unwrap(),
            Vec2::new(6.0, 0.0)
        );
        let flipped = [term(1.0, -2.0, (1.0, 0.0), (0.0, 0.0))];
        assert_eq!(
            control_input(3, &flipped, &g, SignMode::Exact).unwrap(),
            Vec2::new(-6.0, 0.0)
        );
    }

    #[test]
    fn empty_neighborhood_is_an_error() {
        assert_eq!(
            control_input(5, &[], &gains(1.0, 1.0, 1.0), SignMode::Exact),
            Err(Error::NoNeighbors { agent: 5 })
        );
    }

    #[test]
    fn smooth_sign_is_bounded_and_odd() {
        let m = SignMode::Smooth { epsilon: 0.1 };
        assert_eq!(m.apply(0.0), 0.0);
        assert_abs_diff_eq!(m.apply(0.1), 0.5);
        assert_abs_diff_eq!(m.apply(-0.1), -0.5);
        assert!(m.apply(1e6) < 1.0);
        assert_eq!(signum(-0.0), 0.0);
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(ControlGains::new(0.0, 1.0, 1.0, 0.1).is_err());
        assert!(ControlGains::new(1.0, -1.0, 1.0, 0.1).is_err());
        assert!(ControlGains::new(1.0, 1.0, 1.0, f64::NAN).is_err());
    }

    /// Three leaders and one follower tied to two leaders with unit weights,
    /// so `L_ff = [2]`.
    fn single_follower() -> StressMatrix {
        StressMatrix::from_edges(4, 3, [(0, 1, 1.0), (1, 2, 1.0), (0, 3, 1.0), (1, 3, 1.0)]).unwrap()
    }

    #[test]
    fn single_follower_certificate_closed_form() {
        let g = gains(1.0, 1.0, 1.0);
        let cert = stability_certificate(&g, &single_follower()).unwrap();
        // P = [[8, 2], [2, 2]] ⊗ I₂ and Q = diag(4, 2) ⊗ I₂ in (δp, δv) order.
        let expected_p = DMatrix::from_row_slice(
            4,
            4,
            &[
                8.0, 0.0, 2.0, 0.0, 0.0, 8.0, 0.0, 2.0, 2.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0, 2.0,
            ],
        );
        assert_abs_diff_eq!(cert.p, expected_p, epsilon = 1e-14);
        let expected_q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 4.0, 2.0, 2.0]));
        assert_abs_diff_eq!(cert.q, expected_q, epsilon = 1e-14);
        // Eigenvalues of [[8, 2], [2, 2]]: 5 ± √13.
        let s13 = 13f64.sqrt();
        assert_abs_diff_eq!(cert.lambda_max_p, 5.0 + s13, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.lambda_min_p, 5.0 - s13, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.lambda_min_q, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.decay_rate, 2.0 / (5.0 + s13), epsilon = 1e-12);
        assert_abs_diff_eq!(cert.envelope_coeff, ((5.0 + s13) / (5.0 - s13)).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn violating_kv_makes_q_indefinite() {
        // λ_min(L_ff) = 2, so k_v must exceed 0.5.
        let err = stability_certificate(&gains(1.0, 0.4, 1.0), &single_follower()).unwrap_err();
        assert!(matches!(err, Error::GainConditionViolated(_)));
        let d = definiteness(&gains(1.0, 0.4, 1.0), &single_follower().blocks().ff);
        assert!(!d.q_eigen_ok && !d.q_schur_ok);
        assert!(d.p_eigen_ok && d.p_schur_ok);
        let report = validate_gains(&gains(1.0, 0.4, 1.0), &single_follower(), 0.0);
        assert!(!report.kv_ok);
        assert_abs_diff_eq!(report.kv_threshold, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gain_boundary_is_strict() {
        let s = single_follower();
        let ok = validate_gains(&ControlGains::new(1.0, 1.5, 4.0, 0.2).unwrap(), &s, 3.5);
        assert!(ok.k_delta_ok && ok.passes);
        assert_abs_diff_eq!(ok.k_delta_margin, 0.3, epsilon = 1e-12);
        let bad = validate_gains(&ControlGains::new(1.0, 1.5, 3.7, 0.2).unwrap(), &s, 3.5);
        assert!(!bad.k_delta_ok && !bad.passes);
    }

    #[test]
    fn sup_follower_accel_examples() {
        let s = single_follower();
        assert_eq!(sup_follower_accel(&s, 0.0).unwrap(), 0.0);
        // L_ff⁻¹ L_fl = [-0.5, -0.5, 0] with norm √0.5.
        assert_abs_diff_eq!(
            sup_follower_accel(&s, 2.0).unwrap(),
            2.0 * 0.5f64.sqrt(),
            epsilon = 1e-12
        );
        let decoupled = StressMatrix::from_edges(4, 3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(sup_follower_accel(&decoupled, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn avoidance_with_exact_start_is_still_positive() {
        let s = single_follower();
        let g = gains(1.0, 1.0, 1.0);
        let cert = stability_certificate(&g, &s).unwrap();
        let a = avoidance_certificate(0.0, &BTreeMap::new(), &g, &s, &cert, 10.0, 1.0).unwrap();
        // Two follower edges: c_e = 2 · 2k_Δ = 4.
        assert_abs_diff_eq!(a.c_e, 4.0);
        assert_abs_diff_eq!(
            a.lhs,
            cert.lambda_max_p * 4.0 / (2.0 * cert.lambda_min_q),
            epsilon = 1e-12
        );
        assert!(a.lhs > 0.0);
        assert_eq!(a.passes, a.lhs <= a.rhs);
        assert_abs_diff_eq!(a.rhs, 9.0);
    }

    #[test]
    fn avoidance_counts_initial_estimation_errors() {
        let s = single_follower();
        let g = gains(2.0, 1.0, 1.0);
        let cert = stability_certificate(&g, &s).unwrap();
        let mut errs = BTreeMap::new();
        errs.insert(DirectedEdge::new(3, 0), -0.5);
        let a = avoidance_certificate(0.1, &errs, &g, &s, &cert, 100.0, 1.0).unwrap();
        assert_abs_diff_eq!(a.c_e, 2.0 * 0.5 + 4.0);
        assert_abs_diff_eq!(a.transient_bound, cert.envelope_coeff * 0.1);
    }

    #[test]
    fn clearance_must_fit_under_the_gap() {
        let s = single_follower();
        let g = gains(1.0, 1.0, 1.0);
        let cert = stability_certificate(&g, &s).unwrap();
        for c in [0.0, 2.0, 3.0] {
            assert!(matches!(
                avoidance_certificate(0.0, &BTreeMap::new(), &g, &s, &cert, 2.0, c),
                Err(Error::InvalidClearance { .. })
            ));
        }
    }

    fn neighbor_set() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, f64)>> {
        prop::collection::vec(
            (
                -1.0..1.0f64,
                -5.0..5.0f64,
                -std::f64::consts::PI..std::f64::consts::PI,
                -3.0..3.0f64,
                -3.0..3.0f64,
            ),
            1..6,
        )
    }

    fn build(raw: &[(f64, f64, f64, f64, f64)], negate: bool) -> Vec<NeighborTerm> {
        let s = if negate { -1.0 } else { 1.0 };
        raw.iter()
            .map(|&(w, rho, ang, vx, vy)| term(w, s * rho, (ang.cos(), ang.sin()), (s * vx, s * vy)))
            .collect()
    }

    proptest! {
        #[test]
        fn switching_term_is_bounded(raw in neighbor_set(), kp in 0.1..5.0f64, kv in 0.1..5.0f64, kd in 0.1..5.0f64) {
            let g = ControlGains::new(kp, kv, kd, 0.1).unwrap();
            let terms = build(&raw, false);
            let u = control_input(0, &terms, &g, SignMode::Exact).unwrap();
            let linear = terms.iter().fold(Vec2::zeros(), |acc, n| {
                acc + n.weight * (kp * displacement_estimate(n.rho_hat, &n.obs.phi) + kv * n.obs.v_ij)
            });
            prop_assert!((u - linear).amax() <= kd * (1.0 + 1e-12));
        }

        #[test]
        fn controller_is_odd(raw in neighbor_set()) {
            let g = ControlGains::new(1.0, 1.5, 4.0, 0.2).unwrap();
            let u = control_input(0, &build(&raw, false), &g, SignMode::Exact).unwrap();
            let u_neg = control_input(0, &build(&raw, true), &g, SignMode::Exact).unwrap();
            prop_assert_eq!(u, -u_neg);
        }

        #[test]
        fn schur_and_eigen_routes_agree(
            weights in prop::collection::vec(0.05..2.0f64, 4),
            kp in 0.01..5.0f64,
            kv in 0.01..5.0f64,
        ) {
            // Path of two followers, each tied to leaders.
            let s = StressMatrix::from_edges(5, 3, [
                (0, 1, 1.0), (1, 2, 1.0),
                (0, 3, weights[0]), (3, 4, weights[1]), (4, 2, weights[2]), (1, 4, weights[3]),
            ]).unwrap();
            let d = definiteness(&ControlGains::new(kp, kv, 1.0, 0.1).unwrap(), &s.blocks().ff);
            prop_assert_eq!(d.p_eigen_ok, d.p_schur_ok);
            prop_assert_eq!(d.q_eigen_ok, d.q_schur_ok);
        }
    }
}
