//! The special Euclidean group SE(2).
//!
//! Elements are rigid motions `g = (x, R_θ)` of the plane with the group law
//! `g ∘ g' = (x + R_θ x', R_{θ+θ'})`. Angles are always kept in `[0, 2π)`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Absolute per-field tolerance used by [`GroupElement::approx_eq`].
pub const ELEMENT_TOLERANCE: f64 = 1e-12;

/// Haar measure normalisation: `dg = dx₁ dx₂ dθ / (4π²)`.
pub const HAAR_NORMALIZATION: f64 = 1.0 / (4.0 * PI * PI);

/// Reduce an angle to the canonical range `[0, 2π)`.
///
/// This is the only angle reduction used anywhere in the crate.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed distance between two angles on the circle, in `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = reduce_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// A rigid motion of the plane.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroupElement {
    pub x1: f64,
    pub x2: f64,
    theta: f64,
}

impl GroupElement {
    pub fn new(x1: f64, x2: f64, theta: f64) -> Self {
        Self {
            x1,
            x2,
            theta: reduce_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn translation(x1: f64, x2: f64) -> Self {
        Self::new(x1, x2, 0.0)
    }

    pub fn rotation(theta: f64) -> Self {
        Self::new(0.0, 0.0, theta)
    }

    /// Rotation angle in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn translation_part(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// Polar coordinates `(‖x‖, φ_x)` of the translation part.
    pub fn translation_polar(&self) -> (f64, f64) {
        (self.x1.hypot(self.x2), self.x2.atan2(self.x1))
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let [y1, y2] = rotate(self.theta, [other.x1, other.x2]);
        GroupElement::new(self.x1 + y1, self.x2 + y2, self.theta + other.theta)
    }

    pub fn inverse(&self) -> GroupElement {
        let [y1, y2] = rotate(-self.theta, [self.x1, self.x2]);
        GroupElement::new(-y1, -y2, -self.theta)
    }

    /// The homogeneous matrix `[[R_θ, x], [0, 1]]`.
    pub fn homogeneous_matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x1, s, c, self.x2, 0.0, 0.0, 1.0)
    }

    /// Tolerance-based equality: translations within `tol`, angles within `tol`
    /// measured on the circle.
    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        (self.x1 - other.x1).abs() <= tol
            && (self.x2 - other.x2).abs() <= tol
            && angle_difference(self.theta, other.theta).abs() <= tol
    }

    /// Largest per-field deviation, angles measured on the circle.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (self.x1 - other.x1)
            .abs()
            .max((self.x2 - other.x2).abs())
            .max(angle_difference(self.theta, other.theta).abs())
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, ELEMENT_TOLERANCE)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x1, self.x2, self.theta)
    }
}

/// Rotate a plane vector by `theta`.
pub fn rotate(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_is_neutral() {
        let g = GroupElement::new(0.3, -1.2, 2.0);
        assert_eq!(GroupElement::identity().compose(&g), g);
        assert_eq!(g.compose(&GroupElement::identity()), g);
    }

    #[test]
    fn quarter_turn_then_translate() {
        let g = GroupElement::new(1.0, 0.0, FRAC_PI_2);
        let h = GroupElement::new(1.0, 0.0, 0.0);
        let gh = g.compose(&h);
        assert!(gh.approx_eq(&GroupElement::new(1.0, 1.0, FRAC_PI_2), 1e-12));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(GroupElement::identity().inverse(), GroupElement::identity());
        let g = GroupElement::new(1.0, 0.0, FRAC_PI_2);
        assert!(g
            .inverse()
            .approx_eq(&GroupElement::new(0.0, 1.0, 3.0 * FRAC_PI_2), 1e-12));
    }

    #[test]
    fn homogeneous_examples() {
        assert_eq!(
            GroupElement::identity().homogeneous_matrix(),
            Matrix3::identity()
        );
        let h = GroupElement::new(1.0, 2.0, 0.0).homogeneous_matrix();
        assert_eq!(h, Matrix3::new(1.0, 0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn angles_reduced() {
        let g = GroupElement::new(0.0, 0.0, -1e-18);
        assert!(g.theta() >= 0.0 && g.theta() < TAU);
        assert_eq!(reduce_angle(TAU), 0.0);
        assert!((reduce_angle(-FRAC_PI_2) - 3.0 * FRAC_PI_2).abs() < 1e-15);
        // equality across the 0/2π seam
        assert_eq!(
            GroupElement::new(0.0, 0.0, 1e-14),
            GroupElement::new(0.0, 0.0, TAU - 1e-14)
        );
    }
}
