//! Terminal reward: smooth exponential of the squared scaled distance
//! between the goal and the achieved end state.

use crate::kinematics::{angular_distance, EndState};

pub const POSITION_SCALE: f64 = 0.1; // meters
pub const ANGLE_SCALE: f64 = 0.3; // radians

/// Minimum reward counted as a successful reach.
pub const SUCCESS_THRESHOLD: f64 = 0.5;

pub fn reward(goal: EndState, achieved: EndState) -> f64 {
    let d_pos2 = (goal.x - achieved.x).powi(2) + (goal.y - achieved.y).powi(2);
    let d_ang = angular_distance(goal.phi, achieved.phi);
    (-(d_pos2 / (POSITION_SCALE * POSITION_SCALE) + d_ang * d_ang / (ANGLE_SCALE * ANGLE_SCALE)))
        .exp()
}
