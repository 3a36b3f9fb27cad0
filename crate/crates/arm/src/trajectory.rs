//! Joint-velocity trajectories and the execution map Exe.

use ndarray::Array2;

use crate::config::ArmConfig;
use crate::error::{ArmError, Result};
use crate::kinematics::{forward_kinematics, EndState};

/// T x M matrix of joint velocities in rad/s. Shorter motions are padded
/// with trailing zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub velocities: Array2<f64>,
}

impl Trajectory {
    pub fn new(velocities: Array2<f64>) -> Self {
        Self { velocities }
    }

    pub fn zeros(cfg: &ArmConfig) -> Self {
        Self {
            velocities: Array2::zeros((cfg.t, cfg.m)),
        }
    }

    pub fn steps(&self) -> usize {
        self.velocities.nrows()
    }

    pub fn joints(&self) -> usize {
        self.velocities.ncols()
    }

    /// First step (if any) violating the velocity limit.
    pub fn check_limits(&self, cfg: &ArmConfig) -> Result<()> {
        for ((step, joint), v) in self.velocities.indexed_iter() {
            if v.abs() > cfg.joint_velocity_limit {
                return Err(ArmError::VelocityLimit {
                    joint,
                    step,
                    velocity: *v,
                    limit: cfg.joint_velocity_limit,
                });
            }
        }
        Ok(())
    }
}

/// Execute a trajectory open loop from the home configuration: forward-Euler
/// integration of the joint angles followed by forward kinematics of the
/// final configuration. Deterministic.
pub fn execute(traj: &Trajectory, cfg: &ArmConfig) -> Result<EndState> {
    if traj.steps() != cfg.t || traj.joints() != cfg.m {
        return Err(ArmError::ShapeMismatch {
            rows: traj.steps(),
            cols: traj.joints(),
            t: cfg.t,
            m: cfg.m,
        });
    }
    traj.check_limits(cfg)?;
    let mut angles = cfg.home_angles;
    for row in traj.velocities.rows() {
        for j in 0..cfg.m {
            angles[j] += cfg.dt * row[j];
        }
    }
    Ok(forward_kinematics(angles, cfg))
}
