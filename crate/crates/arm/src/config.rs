use std::f64::consts::PI;

/// Reachable goal region: an annulus sector plus a tool-orientation span.
/// Polar angles are centred on `sector_center`; tool orientations are drawn
/// around the goal's polar angle so that distant goals stay reachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    pub radius_min: f64,
    pub radius_max: f64,
    pub sector_center: f64,
    pub angle_span: f64,
    pub orientation_span: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmConfig {
    /// Link lengths in meters, base to tool.
    pub link_lengths: [f64; 3],
    /// Joint angles the arm starts every execution from.
    pub home_angles: [f64; 3],
    /// Seconds per trajectory step.
    pub dt: f64,
    /// Steps per trajectory.
    pub t: usize,
    /// Joint count; fixed at 3 for the planar arm.
    pub m: usize,
    pub joint_velocity_limit: f64,
    pub workspace: Workspace,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            link_lengths: [1.0, 0.8, 0.6],
            home_angles: [PI / 2.0, -PI / 4.0, -PI / 4.0],
            dt: 0.1,
            t: 20,
            m: 3,
            joint_velocity_limit: 5.0,
            workspace: Workspace {
                radius_min: 0.8,
                radius_max: 2.2,
                sector_center: PI / 2.0,
                angle_span: PI / 2.0,
                orientation_span: 2.0,
            },
        }
    }
}

impl ArmConfig {
    pub fn total_reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn horizon(&self) -> f64 {
        self.t as f64 * self.dt
    }

    pub fn validate(&self) {
        assert!(self.link_lengths.iter().all(|l| *l > 0.0));
        assert!(self.dt > 0.0);
        assert!(self.t >= 2);
        assert_eq!(self.m, 3, "the planar arm has exactly 3 joints");
        assert!(self.workspace.radius_min < self.workspace.radius_max);
        assert!(self.workspace.radius_max <= self.total_reach());
    }
}
