//! Nominal configuration, stress-matrix algebra and the affine maneuver of
//! the whole formation.
//!
//! Agents are indexed from zero with the leaders first: indices
//! `0..n_leaders` are leaders, the rest are followers. Stacked vectors follow
//! the same order with interleaved `(x, y)` components.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{is_finite, Vec2};
use crate::linalg;

/// Equilibrium residual accepted by [`validate_stress`]. Published
/// weights are rounded to four digits, which leaves residuals of a few 1e-3.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-2;

/// Per-coordinate agreement expected between the stress and affine routes to
/// the followers' desired positions.
pub const STRESS_CONSISTENCY_TOLERANCE: f64 = 2e-2;

/// Leader moment matrices with a larger condition number are singular.
pub const MAX_MOMENT_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<Vec2>,
    n_leaders: usize,
}

impl Configuration {
    pub fn new(points: Vec<Vec2>, n_leaders: usize) -> Result<Self> {
        if n_leaders < 3 {
            return Err(Error::InvalidScenario(format!(
                "at least 3 leaders are required in the plane, got {n_leaders}"
            )));
        }
        if points.len() < n_leaders {
            return Err(Error::DimensionMismatch(format!(
                "{} points cannot hold {n_leaders} leaders",
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidScenario(format!(
                "configuration point {} is not finite",
                k + 1
            )));
        }
        let config = Configuration { points, n_leaders };
        let condition = config.leader_moment_condition();
        if !(condition <= MAX_MOMENT_CONDITION) {
            return Err(Error::DegenerateLeaderConfiguration { condition });
        }
        Ok(config)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_leaders(&self) -> usize {
        self.n_leaders
    }

    pub fn n_followers(&self) -> usize {
        self.points.len() - self.n_leaders
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn leaders(&self) -> &[Vec2] {
        &self.points[..self.n_leaders]
    }

    pub fn followers(&self) -> &[Vec2] {
        &self.points[self.n_leaders..]
    }

    pub fn is_leader(&self, agent: usize) -> bool {
        agent < self.n_leaders
    }

    /// Mean of all configuration points.
    pub fn centroid(&self) -> Vec2 {
        mean(&self.points)
    }

    pub fn leader_centroid(&self) -> Vec2 {
        mean(self.leaders())
    }

    /// `Σ r̃ r̃ᵀ` over leaders, with `r̃` the offset from the leader centroid.
    pub fn leader_moment(&self) -> Matrix2<f64> {
        let c = self.leader_centroid();
        self.leaders()
            .iter()
            .map(|r| {
                let d = r - c;
                d * d.transpose()
            })
            .fold(Matrix2::zeros(), |acc, m| acc + m)
    }

    pub fn leader_moment_condition(&self) -> f64 {
        moment_condition(&self.leader_moment())
    }
}

fn mean(points: &[Vec2]) -> Vec2 {
    points.iter().fold(Vec2::zeros(), |acc, p| acc + p) / points.len() as f64
}

fn moment_condition(m: &Matrix2<f64>) -> f64 {
    let eig = m.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Signed edge weights of an undirected graph over `n` agents.
#[derive(Debug, Clone, PartialEq)]
pub struct StressMatrix {
    n: usize,
    n_leaders: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

/// Leader/follower partition of a stress matrix.
#[derive(Debug, Clone)]
pub struct StressBlocks {
    pub ll: DMatrix<f64>,
    pub lf: DMatrix<f64>,
    pub fl: DMatrix<f64>,
    pub ff: DMatrix<f64>,
}

impl StressMatrix {
    /// Builds the matrix from `(i, j, l_ij)` triples with zero-based indices.
    pub fn from_edges<I>(n: usize, n_leaders: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n_leaders > n {
            return Err(Error::DimensionMismatch(format!(
                "{n_leaders} leaders among {n} agents"
            )));
        }
        let mut weights = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidScenario(format!(
                    "edge ({}, {}) references a node outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidScenario(format!("self-loop on node {}", i + 1)));
            }
            if !w.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "edge ({}, {}) has a non-finite weight",
                    i + 1,
                    j + 1
                )));
            }
            let key = (i.min(j), i.max(j));
            if weights.insert(key, w).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "edge ({}, {}) listed twice",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }
        Ok(StressMatrix { n, n_leaders, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_leaders(&self) -> usize {
        self.n_leaders
    }

    pub fn n_followers(&self) -> usize {
        self.n - self.n_leaders
    }

    /// Undirected edges `(i, j, l_ij)` with `i < j`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// `l_ij`, zero when `(i, j)` is not an edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Neighbors of `i` in ascending index order with their weights.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        self.weights
            .iter()
            .filter_map(|(&(a, b), &w)| {
                if a == i {
                    Some((b, w))
                } else if b == i {
                    Some((a, w))
                } else {
                    None
                }
            })
            .collect::<BTreeMap<_, _>>()
            .into_iter()
            .collect()
    }

    /// Dense `n × n` matrix: `-l_ij` off the diagonal, row sums of the
    /// weights on it.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &w) in &self.weights {
            m[(i, j)] -= w;
            m[(j, i)] -= w;
            m[(i, i)] += w;
            m[(j, j)] += w;
        }
        m
    }

    pub fn blocks(&self) -> StressBlocks {
        let m = self.dense();
        let (nl, nf) = (self.n_leaders, self.n_followers());
        StressBlocks {
            ll: m.view((0, 0), (nl, nl)).into_owned(),
            lf: m.view((0, nl), (nl, nf)).into_owned(),
            fl: m.view((nl, 0), (nf, nl)).into_owned(),
            ff: m.view((nl, nl), (nf, nf)).into_owned(),
        }
    }

    /// `Σ_j l_ij (x_i − x_j)` for every agent, i.e. the rows of `(L ⊗ I₂) x`.
    pub fn apply(&self, x: &[Vec2]) -> Result<Vec<Vec2>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "stress over {} agents applied to {} points",
                self.n,
                x.len()
            )));
        }
        let mut out = vec![Vec2::zeros(); self.n];
        for (&(i, j), &w) in &self.weights {
            let d = x[i] - x[j];
            out[i] += w * d;
            out[j] -= w * d;
        }
        Ok(out)
    }

    /// `−L_ff⁻¹ L_fl`, the map from leader to follower desired quantities.
    pub fn follower_map(&self) -> Result<DMatrix<f64>> {
        let blocks = self.blocks();
        if blocks.ff.is_empty() {
            return Ok(DMatrix::zeros(0, self.n_leaders));
        }
        let lu = blocks.ff.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("L_ff is not invertible".into()));
        }
        match lu.solve(&(-&blocks.fl)) {
            Some(m) if m.iter().all(|x| x.is_finite()) => Ok(m),
            _ => Err(Error::SingularSystem("L_ff is not invertible".into())),
        }
    }

    fn check_compatible(&self, r: &Configuration) -> Result<()> {
        if self.n != r.len() || self.n_leaders != r.n_leaders() {
            return Err(Error::DimensionMismatch(format!(
                "stress has {} agents ({} leaders), configuration has {} ({} leaders)",
                self.n,
                self.n_leaders,
                r.len(),
                r.n_leaders()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `‖(L ⊗ I₂) r‖_∞`.
    pub equilibrium_residual: f64,
    /// Zero-based agent index and axis (0 = x, 1 = y) of the largest residual.
    pub residual_agent: usize,
    pub residual_axis: usize,
    pub equilibrium_tolerance: f64,
    pub equilibrium_ok: bool,
    pub lambda_min_ff: f64,
    pub ff_positive_definite: bool,
    pub fl_nonzero: bool,
    pub passes: bool,
}

/// Checks that `r` lies in the kernel of `L ⊗ I₂`, that `L_ff` is positive
/// definite and that followers are coupled to leaders.
pub fn validate_stress(stress: &StressMatrix, r: &Configuration) -> Result<ValidationReport> {
    validate_stress_with_tolerance(stress, r, EQUILIBRIUM_TOLERANCE)
}

pub fn validate_stress_with_tolerance(
    stress: &StressMatrix,
    r: &Configuration,
    tolerance: f64,
) -> Result<ValidationReport> {
    stress.check_compatible(r)?;
    let residuals = stress.apply(r.points())?;
    let (mut worst, mut agent, mut axis) = (0.0f64, 0, 0);
    for (k, res) in residuals.iter().enumerate() {
        for c in 0..2 {
            if res[c].abs() > worst {
                worst = res[c].abs();
                agent = k;
                axis = c;
            }
        }
    }
    let blocks = stress.blocks();
    let lambda_min_ff = linalg::min_eigenvalue(&blocks.ff);
    let ff_positive_definite = lambda_min_ff > 0.0 && linalg::is_positive_definite(&blocks.ff);
    let fl_nonzero = blocks.fl.iter().any(|&x| x != 0.0);
    let equilibrium_ok = worst <= tolerance;
    Ok(ValidationReport {
        equilibrium_residual: worst,
        residual_agent: agent,
        residual_axis: axis,
        equilibrium_tolerance: tolerance,
        equilibrium_ok,
        lambda_min_ff,
        ff_positive_definite,
        fl_nonzero,
        passes: equilibrium_ok && ff_positive_definite && fl_nonzero,
    })
}

/// Time-varying affine maneuver `p* = A r + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePose {
    pub a: Matrix2<f64>,
    pub b: Vec2,
}

impl AffinePose {
    pub fn identity() -> Self {
        AffinePose {
            a: Matrix2::identity(),
            b: Vec2::zeros(),
        }
    }

    pub fn apply(&self, r: &Vec2) -> Vec2 {
        self.a * r + self.b
    }
}

/// Recovers the maneuver from the leaders' desired positions:
/// `A = (Σ p_i r̃_iᵀ)(Σ r̃_i r̃_iᵀ)⁻¹`, `b = mean(p_l) − A r̄_l`.
///
/// The map is linear in `p_l_star`, so feeding leader velocities or
/// accelerations yields `(Ȧ, ḃ)` or `(Ä, b̈)`.
pub fn affine_fit(p_l_star: &[Vec2], r: &Configuration) -> Result<AffinePose> {
    if p_l_star.len() != r.n_leaders() {
        return Err(Error::DimensionMismatch(format!(
            "{} leader positions for {} leaders",
            p_l_star.len(),
            r.n_leaders()
        )));
    }
    let moment = r.leader_moment();
    let condition = moment_condition(&moment);
    let inverse = match moment.try_inverse() {
        Some(inv) if condition <= MAX_MOMENT_CONDITION => inv,
        _ => return Err(Error::DegenerateLeaderConfiguration { condition }),
    };
    let centroid = r.leader_centroid();
    let cross = p_l_star
        .iter()
        .zip(r.leaders())
        .map(|(p, ri)| p * (ri - centroid).transpose())
        .fold(Matrix2::zeros(), |acc, m| acc + m);
    let a = cross * inverse;
    let b = mean(p_l_star) - a * centroid;
    Ok(AffinePose { a, b })
}

/// `A r_i + b` for every follower.
pub fn desired_followers_affine(pose: &AffinePose, r: &Configuration) -> Vec<Vec2> {
    r.followers().iter().map(|ri| pose.apply(ri)).collect()
}

/// `A r_i + b` for every agent, leaders first.
pub fn desired_positions(pose: &AffinePose, r: &Configuration) -> Vec<Vec2> {
    r.points().iter().map(|ri| pose.apply(ri)).collect()
}

/// Solves `L̄_ff p_f + L̄_fl p_l = 0` for the followers.
///
/// When followers are decoupled from the leaders (`L_fl = 0`) the right-hand
/// side vanishes and the zero solution is returned without factorizing.
pub fn desired_followers_stress(stress: &StressMatrix, p_l_star: &[Vec2]) -> Result<Vec<Vec2>> {
    if p_l_star.len() != stress.n_leaders() {
        return Err(Error::DimensionMismatch(format!(
            "{} leader positions for {} leaders",
            p_l_star.len(),
            stress.n_leaders()
        )));
    }
    let blocks = stress.blocks();
    let nf = stress.n_followers();
    if blocks.fl.iter().all(|&x| x == 0.0) {
        return Ok(vec![Vec2::zeros(); nf]);
    }
    let map = stress.follower_map()?;
    Ok(apply_map(&map, p_l_star))
}

/// Applies an `n_f × n_l` coefficient matrix to stacked leader vectors.
pub fn apply_map(map: &DMatrix<f64>, leaders: &[Vec2]) -> Vec<Vec2> {
    (0..map.nrows())
        .map(|f| {
            leaders
                .iter()
                .enumerate()
                .fold(Vec2::zeros(), |acc, (l, p)| acc + map[(f, l)] * p)
        })
        .collect()
}

/// Center of the desired formation, `A r̄ + b`.
pub fn formation_center(pose: &AffinePose, r: &Configuration) -> Vec2 {
    pose.apply(&r.centroid())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeVelocity {
    /// `‖v*_ij‖`.
    pub magnitude: f64,
    /// `v*_ij / ‖v*_ij‖`, or zero when the magnitude vanishes.
    pub direction: Vec2,
}

/// Splits `v*_ij = Ȧ (r_j − r_i)` into magnitude and direction.
pub fn desired_relative_velocity(a_dot: &Matrix2<f64>, r_i: &Vec2, r_j: &Vec2) -> RelativeVelocity {
    let v = a_dot * (r_j - r_i);
    let magnitude = v.norm();
    let direction = if magnitude != 0.0 { v / magnitude } else { Vec2::zeros() };
    RelativeVelocity { magnitude, direction }
}

/// Rows are `(agent, axis)` pairs, columns are edges in [`StressMatrix::edges`]
/// order; `C w` stacks the equilibrium residuals for edge weights `w`.
fn equilibrium_constraints(edges: &[(usize, usize)], r: &Configuration) -> DMatrix<f64> {
    let n = r.len();
    let mut c = DMatrix::zeros(2 * n, edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        let d = r.points()[i] - r.points()[j];
        for axis in 0..2 {
            c[(2 * i + axis, e)] += d[axis];
            c[(2 * j + axis, e)] -= d[axis];
        }
    }
    c
}

/// Smallest change to the weights of `stress` that puts `r` exactly in the
/// kernel of `L ⊗ I₂`. The graph is unchanged.
pub fn project_to_equilibrium(stress: &StressMatrix, r: &Configuration) -> Result<StressMatrix> {
    stress.check_compatible(r)?;
    let pairs: Vec<(usize, usize)> = stress.edges().map(|(i, j, _)| (i, j)).collect();
    let w0 = DMatrix::from_iterator(pairs.len(), 1, stress.edges().map(|(_, _, w)| w));
    let c = equilibrium_constraints(&pairs, r);
    let pinv = c
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::SynthesisFailed(e.to_string()))?;
    let w = &w0 - pinv * (&c * &w0);
    StressMatrix::from_edges(
        stress.n(),
        stress.n_leaders(),
        pairs.iter().zip(w.iter()).map(|(&(i, j), &w)| (i, j, w)),
    )
}

/// Fits equilibrium weights for a given graph, starting from unit weights,
/// and checks the follower block.
pub fn synthesize_stress(r: &Configuration, edges: &[(usize, usize)]) -> Result<(StressMatrix, ValidationReport)> {
    let seed = StressMatrix::from_edges(r.len(), r.n_leaders(), edges.iter().map(|&(i, j)| (i, j, 1.0)))?;
    let stress = project_to_equilibrium(&seed, r)?;
    let report = validate_stress_with_tolerance(&stress, r, 1e-9)?;
    if !report.passes {
        return Err(Error::SynthesisFailed(format!(
            "projected weights give λ_min(L_ff) = {:.3e}, L_fl nonzero: {}",
            report.lambda_min_ff, report.fl_nonzero
        )));
    }
    Ok((stress, report))
}
