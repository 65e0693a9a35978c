//! Planar vector primitives: bearings, the perpendicular operator and
//! bearing-rate kinematics.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Positions and velocities in the plane.
pub type Vec2 = Vector2<f64>;

/// Separation below which two agents are treated as coincident.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-9;

/// Unit direction in the plane. Renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing(Vec2);

impl Bearing {
    /// Normalizes `v`. Fails if `‖v‖ <= min_norm` or `v` is not finite.
    pub fn from_vector(v: Vec2, min_norm: f64) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm <= min_norm {
            return Err(Error::CoincidentAgents {
                separation: norm,
                threshold: min_norm,
            });
        }
        Ok(Bearing(v / norm))
    }

    /// Wraps an already normalized direction, renormalizing to absorb drift.
    fn renormalized(v: Vec2) -> Self {
        Bearing(v / v.norm())
    }

    pub fn as_vec(&self) -> Vec2 {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    /// `I - φφᵀ`.
    pub fn orthogonal_projector(&self) -> Matrix2<f64> {
        Matrix2::identity() - self.0 * self.0.transpose()
    }
}

impl std::ops::Neg for Bearing {
    type Output = Bearing;

    fn neg(self) -> Bearing {
        Bearing(-self.0)
    }
}

/// Unit vector from `p_i` toward `p_j`, using the default degeneracy threshold.
pub fn bearing(p_i: &Vec2, p_j: &Vec2) -> Result<Bearing> {
    bearing_with_threshold(p_i, p_j, DEFAULT_MIN_SEPARATION)
}

pub fn bearing_with_threshold(p_i: &Vec2, p_j: &Vec2, min_separation: f64) -> Result<Bearing> {
    Bearing::from_vector(p_j - p_i, min_separation)
}

/// Rotates a bearing ninety degrees anticlockwise.
pub fn perp(phi: &Bearing) -> Bearing {
    Bearing::renormalized(Vec2::new(-phi.0.y, phi.0.x))
}

/// `(I - φφᵀ) v_ij / ρ`, the rate of change of the bearing from `i` to `j`
/// when their relative velocity is `v_ij` and their distance is `rho`.
pub fn bearing_rate(phi: &Bearing, v_ij: &Vec2, rho: f64) -> Result<Vec2> {
    if !(rho > 0.0) {
        return Err(Error::NonpositiveDistance(rho));
    }
    let u = phi.0;
    Ok((v_ij - u * u.dot(v_ij)) / rho)
}

/// Rotation by `angle` radians.
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `[0, -1; 1, 0]`.
pub fn quarter_turn() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

pub fn is_finite(v: &Vec2) -> bool {
    v.x.is_finite() && v.y.is_finite()
}
