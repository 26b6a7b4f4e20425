//! Closed-form fan-beam calibration from two lines of four markers.
//!
//! With `r_l = C_l / (D - C_l)`, every marker of line `l` projects to
//! `(1 + r_l)(p_l + o_j) - λ·r_l + y`. Line sums give one linear equation per
//! view and line in `(λ, y)`; second moments pin down `(1 + r_l)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fanbeam::sim::FanBeamObservation;
use crate::types::FanBeamPattern;

/// Slack below `R = 1` that is clamped instead of rejected.
pub const DISCRIMINANT_SLACK: f64 = 1e-9;
/// Relative tolerance on `|r_a - r_b|`.
pub const SINGULAR_TOL: f64 = 1e-9;

pub const GAUGE_NOTE: &str = "source positions and jitters are relative to view 0 \
(λ0 = 0, y0 = 0); marker heights p_l are sheared accordingly, and C_l, D are \
determined only up to a common depth scale when D is not known";

/// `|z1 z2|·|z3 z4| / (|z1 z3|·|z2 z4|)`.
pub fn cross_ratio(z: [f64; 4]) -> Result<f64> {
    let scale = z.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..4 {
        for j in i + 1..4 {
            if (z[i] - z[j]).abs() <= 1e-12 * scale {
                return Err(Error::DegeneratePoints);
            }
        }
    }
    let d = |i: usize, j: usize| (z[i] - z[j]).abs();
    Ok(d(0, 1) * d(2, 3) / (d(0, 2) * d(1, 3)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    /// Largest accepted relative cross-ratio deviation.
    pub rel_tol: f64,
    /// A runner-up that also matches must score at least this factor worse
    /// than the best split, otherwise the split is ambiguous.
    pub min_separation: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            min_separation: 1.5,
        }
    }
}

/// Splits eight detector positions into the line-a and line-b quadruples by
/// matching cross-ratios against the pattern. Both quadruples come back
/// ascending.
pub fn classify_groups(
    positions: &[f64],
    pattern: &FanBeamPattern,
    options: &ClassifyOptions,
) -> Result<FanBeamObservation> {
    if positions.len() != 8 {
        return Err(Error::Classification(format!(
            "expected 8 positions, got {}",
            positions.len()
        )));
    }
    let mut z = positions.to_vec();
    z.sort_by(f64::total_cmp);
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Classification("non-finite position".into()));
    }
    let (cr_a, cr_b) = (pattern.cross_ratio_a(), pattern.cross_ratio_b());
    if (cr_a - cr_b).abs() <= 1e-9 * cr_a.max(cr_b) {
        return Err(Error::Classification(
            "pattern cross-ratios of the two lines coincide".into(),
        ));
    }

    // (score, line-a quadruple, line-b quadruple), best first.
    let mut best: Option<(f64, [f64; 4], [f64; 4])> = None;
    let mut runner_up = f64::INFINITY;
    // Each balanced split appears once by forcing point 0 into `first`.
    for mask in 0u32..256 {
        if mask.count_ones() != 4 || mask & 1 == 0 {
            continue;
        }
        let mut first = [0.0; 4];
        let mut second = [0.0; 4];
        let (mut i, mut j) = (0, 0);
        for (bit, &x) in z.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                first[i] = x;
                i += 1;
            } else {
                second[j] = x;
                j += 1;
            }
        }
        let (Ok(c1), Ok(c2)) = (cross_ratio(first), cross_ratio(second)) else {
            return Err(Error::Classification("positions are not distinct".into()));
        };
        let rel = |c: f64, target: f64| (c - target).abs() / target;
        for (score, a, b) in [
            (rel(c1, cr_a).max(rel(c2, cr_b)), first, second),
            (rel(c2, cr_a).max(rel(c1, cr_b)), second, first),
        ] {
            match best {
                Some((s, _, _)) if score >= s => runner_up = runner_up.min(score),
                _ => {
                    if let Some((s, _, _)) = best {
                        runner_up = runner_up.min(s);
                    }
                    best = Some((score, a, b));
                }
            }
        }
    }

    let (score, a, b) = best.expect("at least one partition");
    if score > options.rel_tol {
        return Err(Error::Classification(format!(
            "no split matches the pattern cross-ratios (best relative deviation {score:.3e})"
        )));
    }
    if runner_up <= options.rel_tol && runner_up < options.min_separation * score {
        return Err(Error::Classification(format!(
            "ambiguous split (deviations {score:.3e} and {runner_up:.3e})"
        )));
    }
    Ok(FanBeamObservation {
        a: a.to_vec(),
        b: b.to_vec(),
    })
}

/// Quarter of the difference of line sums between view `i` and view 0.
pub fn delta_m1(view_i: &[f64], view_0: &[f64]) -> f64 {
    (view_i.iter().sum::<f64>() - view_0.iter().sum::<f64>()) / 4.0
}

/// `R_l·K_l` for one line: the second moment of view `i` about its mean,
/// written in terms of the view-0 sum and the sum difference.
fn scaled_discriminant(view_i: &[f64], view_0: &[f64]) -> f64 {
    let s0: f64 = view_0.iter().sum();
    let delta = delta_m1(view_i, view_0);
    let sq: f64 = view_i.iter().map(|v| v * v).sum();
    sq - s0 * s0 / 4.0 - 2.0 * s0 * delta - 4.0 * delta * delta
}

fn magnification(line: char, big_r: f64) -> Result<f64> {
    if !big_r.is_finite() || big_r < 1.0 - DISCRIMINANT_SLACK {
        return Err(Error::NegativeDiscriminant { line, value: big_r });
    }
    Ok(big_r.max(1.0).sqrt() - 1.0)
}

/// `r_l = √R_l - 1` for both lines, from `(1 + r_l)²·K_l·L²` matched against
/// the spread of view `i`.
pub fn solve_r(
    view_0: &FanBeamObservation,
    view_i: &FanBeamObservation,
    pattern: &FanBeamPattern,
) -> Result<(f64, f64)> {
    let l2 = pattern.l * pattern.l;
    let ra = scaled_discriminant(&view_i.a, &view_0.a) / (pattern.spread_a() * l2);
    let rb = scaled_discriminant(&view_i.b, &view_0.b) / (pattern.spread_b() * l2);
    Ok((magnification('a', ra)?, magnification('b', rb)?))
}

/// Like [`solve_r`] but averages `R_l` over every view `i ≥ 1`.
pub fn solve_r_averaged(views: &[FanBeamObservation], pattern: &FanBeamPattern) -> Result<(f64, f64)> {
    if views.len() < 2 {
        return Err(Error::TooFewViews {
            required: 2,
            found: views.len(),
        });
    }
    let l2 = pattern.l * pattern.l;
    let n = (views.len() - 1) as f64;
    let (sa, sb) = views[1..].iter().fold((0.0, 0.0), |(sa, sb), v| {
        (
            sa + scaled_discriminant(&v.a, &views[0].a),
            sb + scaled_discriminant(&v.b, &views[0].b),
        )
    });
    Ok((
        magnification('a', sa / n / (pattern.spread_a() * l2))?,
        magnification('b', sb / n / (pattern.spread_b() * l2))?,
    ))
}

/// `C_l = D·r_l / (1 + r_l)` and `p_l = Σ v_0 / (4(1 + r_l))`, returned as
/// `(C_a, C_b, p_a, p_b)`.
pub fn recover_rig_positions(r_a: f64, r_b: f64, sum_a0: f64, sum_b0: f64, d: f64) -> (f64, f64, f64, f64) {
    (
        d * r_a / (1.0 + r_a),
        d * r_b / (1.0 + r_b),
        sum_a0 / (4.0 * (1.0 + r_a)),
        sum_b0 / (4.0 * (1.0 + r_b)),
    )
}

/// Solves `y - λ·r_l = ΔM1_l` for every view. Entry 0 is the gauge
/// reference and is returned as `(0, 0)` whatever its deltas are.
pub fn solve_views(r_a: f64, r_b: f64, deltas: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let det = r_a - r_b;
    if !(det.abs() >= SINGULAR_TOL * (r_a.abs() + r_b.abs())) || det == 0.0 {
        return Err(Error::SingularSystem { r_a, r_b });
    }
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(i, &(da, db))| {
            if i == 0 {
                return (0.0, 0.0);
            }
            let lambda = (db - da) / det;
            (lambda, da + lambda * r_a)
        })
        .collect())
}

/// Which view `i ≥ 1` feeds the magnification equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceView {
    /// View with the largest line-a sum difference to view 0.
    #[default]
    BestExcited,
    Index(usize),
    /// Average `R_l` over all views.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FanBeamCalibOptions {
    pub reference_view: ReferenceView,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanBeamCalibResult {
    pub lambdas: Vec<f64>,
    pub jitters: Vec<f64>,
    #[serde(rename = "C_a")]
    pub c_a: f64,
    #[serde(rename = "C_b")]
    pub c_b: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub r_a: f64,
    pub r_b: f64,
    /// View used for the magnification equations; `None` when averaged.
    pub reference_view: Option<usize>,
    pub delta_m1_a: Vec<f64>,
    pub delta_m1_b: Vec<f64>,
    pub gauge_note: String,
}

fn check_quadruples(views: &[FanBeamObservation]) -> Result<()> {
    for (i, v) in views.iter().enumerate() {
        for (group, line) in [("A", &v.a), ("B", &v.b)] {
            if line.len() != 4 {
                return Err(Error::IncompleteView {
                    group: group.into(),
                    expected: 4,
                    found: line.len(),
                }
                .at_view(i));
            }
            if line.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite position in group {group}")).at_view(i));
            }
        }
    }
    Ok(())
}

/// Calibrates from grouped views. `d` is the source-line distance.
pub fn calibrate_fanbeam(
    views: &[FanBeamObservation],
    pattern: &FanBeamPattern,
    d: f64,
    options: &FanBeamCalibOptions,
) -> Result<FanBeamCalibResult> {
    if views.len() < 2 {
        return Err(Error::TooFewViews {
            required: 2,
            found: views.len(),
        });
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidInput(format!("D = {d} must be positive")));
    }
    check_quadruples(views)?;

    let v0 = &views[0];
    let delta_m1_a: Vec<f64> = views.iter().map(|v| delta_m1(&v.a, &v0.a)).collect();
    let delta_m1_b: Vec<f64> = views.iter().map(|v| delta_m1(&v.b, &v0.b)).collect();

    let (reference_view, (r_a, r_b)) = match options.reference_view {
        ReferenceView::Average => (None, solve_r_averaged(views, pattern)?),
        choice => {
            let i = match choice {
                ReferenceView::Index(i) if i == 0 || i >= views.len() => {
                    return Err(Error::InvalidInput(format!(
                        "reference view {i} must lie in 1..{}",
                        views.len()
                    )))
                }
                ReferenceView::Index(i) => i,
                _ => {
                    let mut best = 1;
                    for i in 2..views.len() {
                        if delta_m1_a[i].abs() > delta_m1_a[best].abs() {
                            best = i;
                        }
                    }
                    best
                }
            };
            (Some(i), solve_r(v0, &views[i], pattern).map_err(|e| e.at_view(i))?)
        }
    };

    let (c_a, c_b, p_a, p_b) = recover_rig_positions(r_a, r_b, v0.a.iter().sum(), v0.b.iter().sum(), d);
    let deltas: Vec<(f64, f64)> = delta_m1_a.iter().copied().zip(delta_m1_b.iter().copied()).collect();
    let (lambdas, jitters) = solve_views(r_a, r_b, &deltas)?.into_iter().unzip();

    Ok(FanBeamCalibResult {
        lambdas,
        jitters,
        c_a,
        c_b,
        p_a,
        p_b,
        r_a,
        r_b,
        reference_view,
        delta_m1_a,
        delta_m1_b,
        gauge_note: GAUGE_NOTE.to_string(),
    })
}

/// Classifies each view's eight positions, then calibrates.
pub fn calibrate_fanbeam_ungrouped(
    positions: &[Vec<f64>],
    pattern: &FanBeamPattern,
    d: f64,
    options: &FanBeamCalibOptions,
) -> Result<FanBeamCalibResult> {
    let views = positions
        .iter()
        .enumerate()
        .map(|(i, p)| classify_groups(p, pattern, &options.classify).map_err(|e| e.at_view(i)))
        .collect::<Result<Vec<_>>>()?;
    calibrate_fanbeam(&views, pattern, d, options)
}
