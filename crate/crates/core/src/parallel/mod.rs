//! 2D parallel-beam geometry: forward simulation and calibration.

pub mod calib;
pub mod phantom;
pub mod sim;

pub use calib::{
    calibrate_parallel, dirac_moment, estimate_alpha0, estimate_angles, estimate_coefficients,
    estimate_shift, Branch, CenteredMoments, LineCoefficients, ParallelCalibOptions,
    ParallelCalibResult, ViewPair,
};
pub use phantom::{
    detect_marker_centers, disk_projection, render_sinogram, render_view, DetectorGrid, Disk,
    DiskPhantom, SampledProjection, DEFAULT_GRID_STEP,
};
pub use sim::{
    apply_rigid_parallel, gauge_view_parallel, project_markers_parallel, project_point_parallel,
    simulate_parallel, ParallelObservation,
};
