use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fanbeam::{apply_gauge_fanbeam, gauge_view_fanbeam, FanBeamCalibResult};
use crate::types::{FanBeamRig, FanBeamView, ParallelView};

/// Mean absolute errors of a parallel experiment: shifts in cm, angles in
/// rad. Branch II angles are compared with `π - α`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParallelErrors {
    pub err_s: f64,
    pub err_a_i: f64,
    pub err_a_ii: f64,
}

/// Mean absolute errors of a fan-beam experiment, all in cm. `err_p` and
/// `err_c` average the two lines.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FanBeamErrors {
    pub err_lambda: f64,
    pub err_y: f64,
    pub err_p: f64,
    pub err_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum ErrorSummary {
    Parallel(ParallelErrors),
    Fanbeam(FanBeamErrors),
}

impl ErrorSummary {
    /// Metric names and values in table order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        match self {
            ErrorSummary::Parallel(e) => vec![("ErrS", e.err_s), ("ErrA_I", e.err_a_i), ("ErrA_II", e.err_a_ii)],
            ErrorSummary::Fanbeam(e) => vec![
                ("ErrLambda", e.err_lambda),
                ("ErrY", e.err_y),
                ("ErrP", e.err_p),
                ("ErrC", e.err_c),
            ],
        }
    }

    pub fn metric_names(&self) -> Vec<&'static str> {
        self.metrics().into_iter().map(|(n, _)| n).collect()
    }

    /// Element-wise mean of same-geometry summaries.
    pub fn mean(items: &[ErrorSummary]) -> Option<ErrorSummary> {
        let first = *items.first()?;
        let n = items.len() as f64;
        let sums = items.iter().fold(vec![0.0; first.metrics().len()], |mut acc, s| {
            for (a, (_, v)) in acc.iter_mut().zip(s.metrics()) {
                *a += v;
            }
            acc
        });
        let m: Vec<f64> = sums.into_iter().map(|s| s / n).collect();
        Some(match first {
            ErrorSummary::Parallel(_) => ErrorSummary::Parallel(ParallelErrors {
                err_s: m[0],
                err_a_i: m[1],
                err_a_ii: m[2],
            }),
            ErrorSummary::Fanbeam(_) => ErrorSummary::Fanbeam(FanBeamErrors {
                err_lambda: m[0],
                err_y: m[1],
                err_p: m[2],
                err_c: m[3],
            }),
        })
    }
}

/// Estimates of one parallel realization: shifts plus both angle branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelEstimate {
    pub shifts: Vec<f64>,
    pub angles_i: Vec<f64>,
    pub angles_ii: Vec<f64>,
}

/// `a - b` reduced to `(-π, π]`: a view direction is only defined modulo a
/// full turn, and estimates come back in `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b + PI).rem_euclid(2.0 * PI) - PI;
    if d == -PI {
        PI
    } else {
        d
    }
}

fn mean_abs(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    it.map(f64::abs).sum::<f64>() / n as f64
}

/// Averages over realizations the per-view mean absolute errors.
pub fn compute_errors_parallel(estimates: &[ParallelEstimate], truth: &[ParallelView]) -> ParallelErrors {
    let p = truth.len();
    let per: Vec<ErrorSummary> = estimates
        .iter()
        .map(|e| {
            assert_eq!(e.shifts.len(), p, "estimate and truth lengths differ");
            ErrorSummary::Parallel(ParallelErrors {
                err_s: mean_abs(e.shifts.iter().zip(truth).map(|(s, t)| s - t.shift), p),
                err_a_i: mean_abs(e.angles_i.iter().zip(truth).map(|(a, t)| angle_difference(*a, t.alpha)), p),
                err_a_ii: mean_abs(e.angles_ii.iter().zip(truth).map(|(a, t)| angle_difference(*a, PI - t.alpha)), p),
            })
        })
        .collect();
    match ErrorSummary::mean(&per) {
        Some(ErrorSummary::Parallel(e)) => e,
        _ => ParallelErrors::default(),
    }
}

/// Ground truth re-expressed in the solver's gauge: view 0 becomes
/// `λ = 0, y = 0` and the rig is sheared to match.
pub fn align_fanbeam_truth(rig: &FanBeamRig, views: &[FanBeamView]) -> (FanBeamRig, Vec<FanBeamView>) {
    let Some(v0) = views.first() else {
        return (*rig, Vec::new());
    };
    let (l0, y0) = (v0.lambda, v0.jitter);
    (
        apply_gauge_fanbeam(rig, l0, y0),
        views.iter().map(|&v| gauge_view_fanbeam(l0, y0, v)).collect(),
    )
}

/// Mean absolute errors against `truth`, which must already be expressed
/// in the solver's gauge (see [`align_fanbeam_truth`]).
pub fn compute_errors_fanbeam(
    estimates: &[FanBeamCalibResult],
    rig: &FanBeamRig,
    views: &[FanBeamView],
) -> FanBeamErrors {
    let p = views.len();
    let per: Vec<ErrorSummary> = estimates
        .iter()
        .map(|e| {
            assert_eq!(e.lambdas.len(), p, "estimate and truth lengths differ");
            ErrorSummary::Fanbeam(FanBeamErrors {
                err_lambda: mean_abs(e.lambdas.iter().zip(views).map(|(l, t)| l - t.lambda), p),
                err_y: mean_abs(e.jitters.iter().zip(views).map(|(y, t)| y - t.jitter), p),
                err_p: 0.5 * ((e.p_a - rig.p_a).abs() + (e.p_b - rig.p_b).abs()),
                err_c: 0.5 * ((e.c_a - rig.c_a).abs() + (e.c_b - rig.c_b).abs()),
            })
        })
        .collect();
    match ErrorSummary::mean(&per) {
        Some(ErrorSummary::Fanbeam(e)) => e,
        _ => FanBeamErrors::default(),
    }
}
