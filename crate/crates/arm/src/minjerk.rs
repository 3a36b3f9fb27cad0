//! Minimum-jerk trajectory synthesis.
//!
//! Joint positions follow the quintic profile `10u^3 - 15u^4 + 6u^5`
//! (`u = t/duration`), which has zero velocity and acceleration at both
//! endpoints. The discrete velocity rows are the profile displacements per
//! step divided by `dt`, so forward-Euler execution reproduces the goal
//! configuration exactly.

use crate::config::ArmConfig;
use crate::error::{ArmError, Result};
use crate::trajectory::Trajectory;

/// Normalized minimum-jerk position, clamped to 1 past the duration.
pub fn min_jerk_profile(u: f64) -> f64 {
    if u >= 1.0 {
        return 1.0;
    }
    let u = u.max(0.0);
    let u3 = u * u * u;
    10.0 * u3 - 15.0 * u3 * u + 6.0 * u3 * u * u
}

pub fn min_jerk_trajectory(
    start_angles: [f64; 3],
    goal_angles: [f64; 3],
    duration: f64,
    cfg: &ArmConfig,
) -> Result<Trajectory> {
    if duration > cfg.horizon() + 1e-12 {
        return Err(ArmError::DurationTooLong {
            duration,
            horizon: cfg.horizon(),
        });
    }
    let mut traj = Trajectory::zeros(cfg);
    let steps = (duration / cfg.dt).ceil() as usize;
    for t in 0..steps.min(cfg.t) {
        let u0 = (t as f64 * cfg.dt) / duration;
        let u1 = ((t + 1) as f64 * cfg.dt) / duration;
        let dp = min_jerk_profile(u1) - min_jerk_profile(u0);
        for j in 0..cfg.m {
            traj.velocities[[t, j]] = (goal_angles[j] - start_angles[j]) * dp / cfg.dt;
        }
    }
    traj.check_limits(cfg)?;
    Ok(traj)
}
