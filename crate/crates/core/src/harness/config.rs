use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanbeam::ReferenceView;
use crate::parallel::ViewPair;
use crate::types::{validate_rig, Geometry, Rig};

/// Default master seed of the shipped experiment configurations.
pub const DEFAULT_SEED: u64 = 20190101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rig: Rig,
    /// Number of views `P`.
    pub views: usize,
    /// Parallel angles stay at least this far from `0`, `π/2` and `π`.
    #[serde(default = "defaults::angle_margin")]
    pub angle_margin: f64,
    #[serde(default = "defaults::shift_range")]
    pub shift_range: [f64; 2],
    #[serde(default = "defaults::lambda_range")]
    pub lambda_range: [f64; 2],
    #[serde(default = "defaults::shift_range")]
    pub jitter_range: [f64; 2],
    /// Noise levels as fractions of the pixel size.
    #[serde(default = "defaults::noise_levels")]
    pub noise_levels: Vec<f64>,
    #[serde(default = "defaults::pixel_size")]
    pub pixel_size: f64,
    #[serde(default = "defaults::n_realizations")]
    pub n_realizations: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Draw a fresh scenario for every realization instead of one per
    /// experiment.
    #[serde(default)]
    pub resample_scenario: bool,
    #[serde(default)]
    pub view_pair: ViewPair,
    #[serde(default)]
    pub reference_view: ReferenceView,
    /// Fan-beam: pool the eight positions and recover the lines by
    /// cross-ratio before calibrating.
    #[serde(default)]
    pub classify: bool,
    #[serde(default = "defaults::cross_ratio_tol")]
    pub cross_ratio_tol: f64,
}

mod defaults {
    pub fn angle_margin() -> f64 {
        1e-3
    }
    pub fn shift_range() -> [f64; 2] {
        [-0.05, 0.05]
    }
    pub fn lambda_range() -> [f64; 2] {
        [-5.0, 5.0]
    }
    pub fn noise_levels() -> Vec<f64> {
        vec![0.0, 0.1, 0.5, 1.0, 2.0]
    }
    pub fn pixel_size() -> f64 {
        0.01
    }
    pub fn n_realizations() -> usize {
        100
    }
    pub fn seed() -> u64 {
        super::DEFAULT_SEED
    }
    pub fn cross_ratio_tol() -> f64 {
        0.05
    }
}

impl ExperimentConfig {
    /// Parallel experiment on `rig` with every other field at its default.
    pub fn parallel(rig: crate::types::ParallelRig, views: usize) -> Self {
        Self::with_rig(Rig::Parallel(rig), views)
    }

    pub fn fanbeam(rig: crate::types::FanBeamRig, views: usize) -> Self {
        Self::with_rig(Rig::Fanbeam(rig), views)
    }

    fn with_rig(rig: Rig, views: usize) -> Self {
        Self {
            rig,
            views,
            angle_margin: defaults::angle_margin(),
            shift_range: defaults::shift_range(),
            lambda_range: defaults::lambda_range(),
            jitter_range: defaults::shift_range(),
            noise_levels: defaults::noise_levels(),
            pixel_size: defaults::pixel_size(),
            n_realizations: defaults::n_realizations(),
            seed: DEFAULT_SEED,
            resample_scenario: false,
            view_pair: ViewPair::default(),
            reference_view: ReferenceView::default(),
            classify: false,
            cross_ratio_tol: defaults::cross_ratio_tol(),
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.rig.geometry()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if let Some(v) = validate_rig(&self.rig).first() {
            return bad(format!("rig: {v}"));
        }
        if self.views < 2 {
            return bad(format!("need at least 2 views, got {}", self.views));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return bad(format!("noise level {l} must be non-negative"));
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return bad(format!("pixel size {} must be positive", self.pixel_size));
        }
        if self.n_realizations == 0 {
            return bad("n_realizations must be at least 1".into());
        }
        if !(self.angle_margin >= 0.0 && self.angle_margin < std::f64::consts::FRAC_PI_4) {
            return bad(format!("angle margin {} must lie in [0, π/4)", self.angle_margin));
        }
        for (name, r) in [
            ("shift_range", self.shift_range),
            ("lambda_range", self.lambda_range),
            ("jitter_range", self.jitter_range),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return bad(format!("{name} [{}, {}] is empty", r[0], r[1]));
            }
        }
        if let ReferenceView::Index(i) = self.reference_view {
            if i == 0 || i >= self.views {
                return bad(format!("reference view {i} must lie in 1..{}", self.views));
            }
        }
        if !(self.cross_ratio_tol > 0.0) {
            return bad("cross_ratio_tol must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FanBeamRig, ParallelRig};

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"rig": {"geometry": "fanbeam", "D": 10, "C_a": 1.5, "p_a": 0, "C_b": 0.5,
                "p_b": 3.2, "L": 0.4, "k1": 3, "k2": 1, "k3": 2}, "views": 30}"#,
        )
        .unwrap();
        assert_eq!(cfg, ExperimentConfig::fanbeam(FanBeamRig::reference(), 30));
        assert_eq!(cfg.noise_levels, vec![0.0, 0.1, 0.5, 1.0, 2.0]);
        assert_eq!(cfg.n_realizations, 100);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = ExperimentConfig::parallel(ParallelRig::reference(), 80);
        base.validate().unwrap();
        let mut c = base.clone();
        c.views = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.noise_levels.push(-0.1);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.pixel_size = 0.0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.shift_range = [0.1, 0.1];
        assert!(c.validate().is_err());
    }
}
