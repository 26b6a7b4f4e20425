//! Closed-form recovery of per-view shifts and angles from the projections
//! of two perpendicular marker lines.
//!
//! Each group is first centred on its own per-view mean, which removes the
//! unknown shift. In that frame the second and third moments of the h-group
//! are `a20·cos²α` and `a30·cos³α`, and those of the v-group are
//! `a02·sin²α` and `a03·sin³α`. Two views fix `α0` and the four line
//! coefficients, after which every angle follows from moment ratios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::sim::ParallelObservation;
use crate::error::{Error, Result};
use crate::types::MomentVector;

/// Relative tolerance on the two-view determinant.
pub const VIEW_PAIR_TOL: f64 = 1e-9;
/// Slack allowed on the `sin²α0` quotient before it is an error.
pub const QUOTIENT_SLACK: f64 = 1e-9;
/// Minimum `|cos α0|` and `|sin α0|`.
pub const ANGLE_TOL: f64 = 1e-9;
/// Second moments below this fraction of the largest view moment are
/// treated as axis-aligned views.
pub const VIEW_MOMENT_TOL: f64 = 1e-12;

/// Which of the symmetric solutions for the reference angle to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    /// Reference angle in `(0, π/2)`.
    #[default]
    I,
    /// Reference angle in `(π/2, π)`; every angle becomes `π - α`.
    II,
}

/// How the two views that fix `α0` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewPair {
    /// Views 0 and 1.
    #[default]
    First,
    /// The pair with the largest determinant; the lower index is the
    /// reference view.
    BestConditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParallelCalibOptions {
    pub branch: Branch,
    pub view_pair: ViewPair,
}

/// `(a20, a02, a30, a03)` estimated from the reference view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCoefficients {
    pub a20: f64,
    pub a02: f64,
    pub a30: f64,
    pub a03: f64,
}

/// Moments of both groups after per-group shift correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredMoments {
    pub h: MomentVector,
    pub v: MomentVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCalibResult {
    /// Shift estimates in the frame centred on all markers.
    pub shifts_all: Vec<f64>,
    pub shifts_h: Vec<f64>,
    pub shifts_v: Vec<f64>,
    pub angles: Vec<f64>,
    pub branch: Branch,
    /// Views used to fix the reference angle (reference first).
    pub view_pair: (usize, usize),
    pub alpha0: f64,
    pub coefficients: LineCoefficients,
    pub moments: Vec<CenteredMoments>,
    /// `cos²α̂ + sin²α̂ - 1` from the two independent component estimates.
    pub unit_residuals: Vec<f64>,
}

/// `Σ x^k`; order 0 is the count.
pub fn dirac_moment(positions: &[f64], k: u32) -> f64 {
    positions.iter().map(|x| x.powi(k as i32)).sum()
}

/// Mean of the detected positions. Exact for the shift when the group's
/// centroid is the frame origin.
pub fn estimate_shift(positions: &[f64]) -> f64 {
    positions.iter().sum::<f64>() / positions.len() as f64
}

fn centered(positions: &[f64]) -> (f64, MomentVector) {
    let s = estimate_shift(positions);
    let t: Vec<f64> = positions.iter().map(|x| x - s).collect();
    (s, MomentVector::from_positions(&t))
}

/// Reference angle from the second moments of two views.
///
/// `sin²α0 = (M2h(0)M2v(0) - M2h(1)M2v(0)) / (M2h(0)M2v(1) - M2h(1)M2v(0))`.
/// The quotient is clamped into `[0, 1]` when it overshoots by less than
/// [`QUOTIENT_SLACK`].
pub fn estimate_alpha0(m2h_0: f64, m2v_0: f64, m2h_1: f64, m2v_1: f64, branch: Branch) -> Result<f64> {
    let den = m2h_0 * m2v_1 - m2h_1 * m2v_0;
    let num = m2h_0 * m2v_0 - m2h_1 * m2v_0;
    let degenerate = |reason: String| Error::DegenerateViewPair {
        first: 0,
        second: 1,
        reason,
    };
    if !(den.abs() > VIEW_PAIR_TOL * (m2h_0 * m2v_1).abs()) {
        return Err(degenerate(format!("determinant {den:e} vanishes")));
    }
    let q = num / den;
    if !(-QUOTIENT_SLACK..=1.0 + QUOTIENT_SLACK).contains(&q) {
        return Err(degenerate(format!("sin² quotient {q} outside [0, 1]")));
    }
    let a = q.clamp(0.0, 1.0).sqrt().asin();
    Ok(match branch {
        Branch::I => a,
        Branch::II => PI - a,
    })
}

/// Line coefficients from the reference view's moments and angle.
pub fn estimate_coefficients(
    m2h_0: f64,
    m2v_0: f64,
    m3h_0: f64,
    m3v_0: f64,
    alpha0: f64,
) -> Result<LineCoefficients> {
    let (s, c) = alpha0.sin_cos();
    if c.abs() < ANGLE_TOL || s.abs() < ANGLE_TOL {
        return Err(Error::DegenerateAngle { cos: c, sin: s });
    }
    Ok(LineCoefficients {
        a20: m2h_0 / (c * c),
        a02: m2v_0 / (s * s),
        a30: m3h_0 / (c * c * c),
        a03: m3v_0 / (s * s * s),
    })
}

/// Angles of all views from centred moments and the line coefficients.
///
/// Returns the angles (via `atan2` of the two component estimates) and the
/// `cos² + sin² - 1` diagnostic per view.
pub fn estimate_angles(
    moments: &[CenteredMoments],
    coefficients: &LineCoefficients,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let LineCoefficients { a20, a02, a30, a03 } = *coefficients;
    for (a3, a2) in [(a30, a20), (a03, a02)] {
        if !(a3.abs() > VIEW_MOMENT_TOL * a2.abs().powf(1.5)) {
            return Err(Error::DegenerateCoefficient { value: a3 });
        }
    }
    let scale = moments.iter().map(|m| m.h.m2 + m.v.m2).fold(0.0, f64::max);
    let tol = VIEW_MOMENT_TOL * scale;

    let mut angles = Vec::with_capacity(moments.len());
    let mut residuals = Vec::with_capacity(moments.len());
    for (i, m) in moments.iter().enumerate() {
        for m2 in [m.h.m2, m.v.m2] {
            if !(m2 > tol) {
                return Err(Error::DegenerateView { moment: m2 }.at_view(i));
            }
        }
        let cos = a20 * m.h.m3 / (a30 * m.h.m2);
        let sin = a02 * m.v.m3 / (a03 * m.v.m2);
        angles.push(sin.atan2(cos));
        residuals.push(cos * cos + sin * sin - 1.0);
    }
    Ok((angles, residuals))
}

fn pair_determinant(a: &CenteredMoments, b: &CenteredMoments) -> f64 {
    a.h.m2 * b.v.m2 - b.h.m2 * a.v.m2
}

/// Full closed-form pipeline: shifts, centred moments, reference angle,
/// coefficients, angles.
pub fn calibrate_parallel(
    observations: &[ParallelObservation],
    options: ParallelCalibOptions,
) -> Result<ParallelCalibResult> {
    if observations.len() < 2 {
        return Err(Error::TooFewViews {
            required: 2,
            found: observations.len(),
        });
    }
    // The fullest view sets the expected group sizes, so a dropped marker
    // is reported at the view that lost it.
    let n_h = observations.iter().map(|o| o.h.len()).max().unwrap_or(0);
    let n_v = observations.iter().map(|o| o.v.len()).max().unwrap_or(0);
    for n in [n_h, n_v] {
        if n < 3 {
            return Err(Error::TooFewMarkers { required: 3, found: n });
        }
    }

    let mut shifts_all = Vec::with_capacity(observations.len());
    let mut shifts_h = Vec::with_capacity(observations.len());
    let mut shifts_v = Vec::with_capacity(observations.len());
    let mut moments = Vec::with_capacity(observations.len());
    for (i, obs) in observations.iter().enumerate() {
        for (group, want, got) in [("H", n_h, obs.h.len()), ("V", n_v, obs.v.len())] {
            if want != got {
                return Err(Error::IncompleteView {
                    group: group.into(),
                    expected: want,
                    found: got,
                }
                .at_view(i));
            }
        }
        let (sh, mh) = centered(&obs.h);
        let (sv, mv) = centered(&obs.v);
        shifts_h.push(sh);
        shifts_v.push(sv);
        shifts_all.push(obs.all_positions().sum::<f64>() / (n_h + n_v) as f64);
        moments.push(CenteredMoments { h: mh, v: mv });
    }

    let (r, s) = match options.view_pair {
        ViewPair::First => (0, 1),
        ViewPair::BestConditioned => {
            let mut best = (0, 1, f64::NEG_INFINITY);
            for i in 0..moments.len() {
                for j in i + 1..moments.len() {
                    let d = pair_determinant(&moments[i], &moments[j]).abs();
                    if d > best.2 {
                        best = (i, j, d);
                    }
                }
            }
            (best.0, best.1)
        }
    };
    let (m0, m1) = (moments[r], moments[s]);
    let alpha0 = estimate_alpha0(m0.h.m2, m0.v.m2, m1.h.m2, m1.v.m2, options.branch).map_err(|e| match e {
        Error::DegenerateViewPair { reason, .. } => Error::DegenerateViewPair {
            first: r,
            second: s,
            reason,
        },
        e => e,
    })?;
    let coefficients = estimate_coefficients(m0.h.m2, m0.v.m2, m0.h.m3, m0.v.m3, alpha0)
        .map_err(|e| e.at_view(r))?;
    let (angles, unit_residuals) = estimate_angles(&moments, &coefficients)?;

    Ok(ParallelCalibResult {
        shifts_all,
        shifts_h,
        shifts_v,
        angles,
        branch: options.branch,
        view_pair: (r, s),
        alpha0,
        coefficients,
        moments,
        unit_residuals,
    })
}
