//! Simulated 3-link planar arm: forward/inverse kinematics, open-loop
//! trajectory execution, minimum-jerk synthesis, dataset generation and the
//! terminal reward.

mod config;
pub mod dataset;
mod error;
pub mod kinematics;
pub mod minjerk;
pub mod reward;
pub mod trajectory;

pub use config::{ArmConfig, Workspace};
pub use dataset::{generate_dataset, DatasetRecord};
pub use error::{ArmError, Result};
pub use kinematics::{forward_kinematics, inverse_kinematics, wrap_angle, EndState};
pub use minjerk::min_jerk_trajectory;
pub use reward::{reward, SUCCESS_THRESHOLD};
pub use trajectory::{execute, Trajectory};
