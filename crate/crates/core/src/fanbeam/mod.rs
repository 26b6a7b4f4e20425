//! Fan-beam geometry with sources on the line `x1 = D`: forward simulation
//! and calibration.

pub mod calib;
pub mod sim;

pub use calib::{
    calibrate_fanbeam, calibrate_fanbeam_ungrouped, classify_groups, cross_ratio, delta_m1,
    recover_rig_positions, solve_r, solve_r_averaged, solve_views, ClassifyOptions,
    FanBeamCalibOptions, FanBeamCalibResult, ReferenceView, GAUGE_NOTE,
};
pub use sim::{
    apply_gauge_fanbeam, apply_scaling_ambiguity, gauge_point_fanbeam, gauge_view_fanbeam,
    project_marker_fanbeam, project_rig_fanbeam, simulate_fanbeam, FanBeamObservation,
};
