//! Planar points, SE(2) poses and angle helpers.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` wrapped into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` towards `other`, in `[0, 2π)`.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn offset(&self, distance: f64, angle: f64) -> Point {
        Point::new(self.x + distance * angle.cos(), self.y + distance * angle.sin())
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

/// A planar pose. Also used for relative poses, where `compose` is the SE(2)
/// group operation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// `self ∘ delta`: applies `delta`, expressed in this pose's frame.
    pub fn compose(&self, delta: &Pose) -> Pose {
        let (s, c) = self.heading.sin_cos();
        Pose::new(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            self.heading + delta.heading,
        )
    }

    pub fn inverse(&self) -> Pose {
        let (s, c) = self.heading.sin_cos();
        Pose::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.heading,
        )
    }

    /// Relative pose of `other` seen from `self`: `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Distance to another pose in position and wrapped heading; used by
    /// tolerance checks.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        (
            self.position().distance(&other.position()),
            angle_diff(self.heading, other.heading).abs(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

/// One odometry sensor reading: change in x-y position (odometry-frame axes)
/// and in heading since the previous step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryReading {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl OdometryReading {
    pub const ZERO: OdometryReading = OdometryReading {
        dx: 0.0,
        dy: 0.0,
        dtheta: 0.0,
    };

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dtheta]
    }

    /// Dead-reckons `pose` forward by this reading.
    pub fn apply(&self, pose: &Pose) -> Pose {
        Pose::new(pose.x + self.dx, pose.y + self.dy, pose.heading + self.dtheta)
    }

    pub fn accumulate(&self, next: &OdometryReading) -> OdometryReading {
        OdometryReading {
            dx: self.dx + next.dx,
            dy: self.dy + next.dy,
            dtheta: self.dtheta + next.dtheta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_wraps_negative_and_tau() {
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!((normalize_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert!(normalize_angle(-1e-300) < TAU);
    }

    #[test]
    fn angle_diff_is_shortest() {
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((angle_diff(TAU - 0.1, 0.1) + 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(
            x in -20.0..20.0f64, y in -20.0..20.0f64, h in 0.0..TAU
        ) {
            let p = Pose::new(x, y, h);
            let id = p.compose(&p.inverse());
            prop_assert!(id.translation_norm() < 1e-9);
            prop_assert!(angle_diff(id.heading, 0.0).abs() < 1e-9);
        }

        #[test]
        fn between_recovers_target(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64, ah in 0.0..TAU,
            bx in -5.0..5.0f64, by in -5.0..5.0f64, bh in 0.0..TAU
        ) {
            let a = Pose::new(ax, ay, ah);
            let b = Pose::new(bx, by, bh);
            let (dp, dh) = a.compose(&a.between(&b)).error_to(&b);
            prop_assert!(dp < 1e-9 && dh < 1e-9);
        }
    }
}
