//! Planar forward and inverse kinematics.

use std::f64::consts::PI;

use ndarray::Array1;

use crate::config::ArmConfig;
use crate::error::{ArmError, Result};

/// Pose reached by the tool tip: position in meters, orientation wrapped
/// to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndState {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl EndState {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }

    pub fn to_array(self) -> Array1<f64> {
        Array1::from_vec(vec![self.x, self.y, self.phi])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Smallest signed angular distance between two angles, in [0, pi].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

pub fn forward_kinematics(angles: [f64; 3], cfg: &ArmConfig) -> EndState {
    let mut acc = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    for (i, l) in cfg.link_lengths.iter().enumerate() {
        acc += angles[i];
        x += l * acc.cos();
        y += l * acc.sin();
    }
    EndState::new(x, y, acc)
}

/// Elbow-up branch of the closed-form 3-link solution. The wrist point
/// (target minus the last link along `phi`) must lie in the 2-link annulus.
pub fn inverse_kinematics(target: EndState, cfg: &ArmConfig) -> Result<[f64; 3]> {
    let [l1, l2, l3] = cfg.link_lengths;
    let wx = target.x - l3 * target.phi.cos();
    let wy = target.y - l3 * target.phi.sin();
    let d2 = wx * wx + wy * wy;
    let d = d2.sqrt();
    let (min_d, max_d) = ((l1 - l2).abs(), l1 + l2);
    // A touch of slack at the boundaries for round-off.
    if d < min_d - 1e-12 || d > max_d + 1e-12 {
        return Err(ArmError::Unreachable {
            wrist_distance: d,
            min: min_d,
            max: max_d,
        });
    }
    let cos_t2 = ((d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    // Elbow-up: negative knee angle.
    let t2 = -cos_t2.acos();
    let t1 = wy.atan2(wx) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
    let t1 = wrap_angle(t1);
    let t3 = wrap_angle(target.phi - t1 - t2);
    Ok([t1, t2, t3])
}
