use serde::{Deserialize, Serialize};

/// `p' = scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    /// Radians, counter-clockwise in image coordinates (x right, y down).
    pub rotation: f64,
    pub scale: f64,
    pub translation: (f64, f64),
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub const fn identity() -> Self {
        Self {
            rotation: 0.0,
            scale: 1.0,
            translation: (0.0, 0.0),
        }
    }

    pub fn new(rotation: f64, scale: f64, translation: (f64, f64)) -> Self {
        assert!(scale > 0.0, "similarity scale must be positive");
        Self {
            rotation,
            scale,
            translation,
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self::new(0.0, 1.0, (dx, dy))
    }

    /// Rotation and scale about `center` instead of the origin.
    pub fn about(center: (f64, f64), rotation: f64, scale: f64, shift: (f64, f64)) -> Self {
        let (a, b) = Self::linear(rotation, scale);
        let (cx, cy) = center;
        Self::new(
            rotation,
            scale,
            (
                cx - (a * cx - b * cy) + shift.0,
                cy - (b * cx + a * cy) + shift.1,
            ),
        )
    }

    /// Builds from the linear part `[[a, -b], [b, a]]`.
    pub(crate) fn from_linear(a: f64, b: f64, translation: (f64, f64)) -> Self {
        Self::new(b.atan2(a), a.hypot(b), translation)
    }

    fn linear(rotation: f64, scale: f64) -> (f64, f64) {
        let (s, c) = rotation.sin_cos();
        (scale * c, scale * s)
    }

    /// `(a, b)` of the linear part `[[a, -b], [b, a]]`.
    pub fn coefficients(&self) -> (f64, f64) {
        Self::linear(self.rotation, self.scale)
    }

    #[inline]
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let (a, b) = self.coefficients();
        (
            a * x - b * y + self.translation.0,
            b * x + a * y + self.translation.1,
        )
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let rot = -self.rotation;
        let (a, b) = Self::linear(rot, inv_scale);
        let (tx, ty) = self.translation;
        Self::new(rot, inv_scale, (-(a * tx - b * ty), -(b * tx + a * ty)))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let (a1, b1) = self.coefficients();
        let (a2, b2) = other.coefficients();
        let a = a1 * a2 - b1 * b2;
        let b = b1 * a2 + a1 * b2;
        let t = self.apply(other.translation);
        Self::from_linear(a, b, t)
    }

    /// Rotation wrapped to `(-pi, pi]`.
    pub fn normalized_rotation(&self) -> f64 {
        let r = self.rotation.rem_euclid(std::f64::consts::TAU);
        if r > std::f64::consts::PI {
            r - std::f64::consts::TAU
        } else {
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(p: (f64, f64), q: (f64, f64), tol: f64) -> bool {
        (p.0 - q.0).abs() < tol && (p.1 - q.1).abs() < tol
    }

    #[test]
    fn about_keeps_center_fixed() {
        let t = SimilarityTransform::about((10.0, 20.0), 0.7, 1.3, (0.0, 0.0));
        assert!(close(t.apply((10.0, 20.0)), (10.0, 20.0), 1e-12));
    }

    proptest! {
        #[test]
        fn inverse_and_compose(rot in -3.0f64..3.0, scale in 0.2f64..5.0,
                               tx in -100.0f64..100.0, ty in -100.0f64..100.0,
                               px in -500.0f64..500.0, py in -500.0f64..500.0) {
            let t = SimilarityTransform::new(rot, scale, (tx, ty));
            let back = t.inverse().apply(t.apply((px, py)));
            prop_assert!(close(back, (px, py), 1e-8));
            let id = t.compose(&t.inverse());
            prop_assert!(close(id.apply((px, py)), (px, py), 1e-8));
            let u = SimilarityTransform::new(-rot / 2.0, 1.0 / scale.sqrt(), (ty, -tx));
            prop_assert!(close(t.compose(&u).apply((px, py)), t.apply(u.apply((px, py))), 1e-7));
        }
    }
}
