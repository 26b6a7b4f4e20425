//! Moment-based data consistency checks.
//!
//! Parallel data: the order-k moment of a view is a homogeneous polynomial
//! of degree k in `(cos α, sin α)`. Fan-beam data on a source line: the
//! weighted order-k moment is a polynomial of degree at most k in `λ`. Both
//! are necessary conditions only, so a pass never certifies the geometry.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::{least_squares, Fit};
use crate::types::Geometry;

pub const DCC_ABS_TOL: f64 = 1e-10;
pub const DCC_REL_TOL: f64 = 1e-8;
/// Abscissae closer than this count as one view when checking rank.
const DISTINCT_TOL: f64 = 1e-12;

pub const NECESSARY_ONLY_NOTE: &str =
    "moment conditions are necessary only: failures flag inconsistent data, passes do not certify it";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleView {
    pub alpha: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedView {
    pub lambda: f64,
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub rms: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Drop of the squared residual when the view is left out of the fit.
    pub leave_one_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvennessReport {
    pub tested: bool,
    pub pairs: usize,
    pub max_deviation: Option<f64>,
    pub pass: Option<bool>,
    pub note: String,
}

impl EvennessReport {
    fn skipped(note: &str) -> Self {
        Self {
            tested: false,
            pairs: 0,
            max_deviation: None,
            pass: None,
            note: note.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub geometry: Geometry,
    pub orders: Vec<OrderReport>,
    pub pass: bool,
    /// Lowest failing order, if any.
    pub first_failing_order: Option<usize>,
    /// View with the largest leave-one-out drop at the lowest failing order.
    pub suspect_view: Option<usize>,
    pub evenness: EvennessReport,
    pub note: String,
}

fn threshold(values: &[f64]) -> f64 {
    let scale = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    DCC_ABS_TOL.max(DCC_REL_TOL * scale)
}

fn count_distinct(mut xs: Vec<f64>) -> usize {
    xs.sort_by(f64::total_cmp);
    let scale = xs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut n = 0;
    let mut last = f64::NEG_INFINITY;
    for x in xs {
        if x - last > DISTINCT_TOL * scale {
            n += 1;
            last = x;
        }
    }
    n
}

fn fit_order(
    order: usize,
    row: &dyn Fn(usize, usize) -> f64,
    values: &[f64],
) -> Result<OrderReport> {
    let n = values.len();
    let cols = order + 1;
    let design = DMatrix::from_fn(n, cols, row);
    let fit = least_squares(&design, values)?;
    let leave_one_out = (0..n)
        .map(|skip| {
            let keep: Vec<usize> = (0..n).filter(|&i| i != skip).collect();
            let sub = DMatrix::from_fn(keep.len(), cols, |r, j| row(keep[r], j));
            let ys: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
            let ssr = least_squares(&sub, &ys).map(|f: Fit| f.ssr).unwrap_or(0.0);
            (fit.ssr - ssr).max(0.0)
        })
        .collect();
    let threshold = threshold(values);
    Ok(OrderReport {
        order,
        coefficients: fit.coefficients,
        rms: fit.rms,
        threshold,
        pass: fit.rms <= threshold,
        leave_one_out,
    })
}

fn assemble(geometry: Geometry, orders: Vec<OrderReport>, evenness: EvennessReport) -> ConsistencyReport {
    let failing = orders.iter().find(|o| !o.pass);
    let first_failing_order = failing.map(|o| o.order);
    let suspect_view = failing.and_then(|o| {
        o.leave_one_out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    });
    let pass = orders.iter().all(|o| o.pass) && evenness.pass != Some(false);
    ConsistencyReport {
        geometry,
        orders,
        pass,
        first_failing_order,
        suspect_view,
        evenness,
        note: NECESSARY_ONLY_NOTE.to_string(),
    }
}

fn moment(positions: &[f64], weights: Option<&[f64]>, k: usize) -> f64 {
    match weights {
        Some(w) => positions.iter().zip(w).map(|(x, w)| w * x.powi(k as i32)).sum(),
        None => positions.iter().map(|x| x.powi(k as i32)).sum(),
    }
}

/// Fits each order-k moment `Σ x^k` on `{cos^(k-j) α · sin^j α}`.
pub fn parallel_moment_consistency(views: &[AngleView], k_max: usize) -> Result<ConsistencyReport> {
    let distinct = count_distinct(views.iter().map(|v| v.alpha.rem_euclid(PI)).collect());
    let mut orders = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if distinct < k + 1 {
            return Err(Error::InsufficientViews {
                order: k,
                required: k + 1,
                found: distinct,
            });
        }
        let values: Vec<f64> = views.iter().map(|v| moment(&v.positions, None, k)).collect();
        let row = |i: usize, j: usize| {
            let (s, c) = views[i].alpha.sin_cos();
            c.powi((k - j) as i32) * s.powi(j as i32)
        };
        orders.push(fit_order(k, &row, &values)?);
    }
    let evenness = parallel_evenness(views, k_max);
    Ok(assemble(Geometry::Parallel, orders, evenness))
}

/// Compares `M_k(α + π)` with `(-1)^k M_k(α)` for every view pair half a
/// turn apart.
fn parallel_evenness(views: &[AngleView], k_max: usize) -> EvennessReport {
    let mut pairs = 0;
    let mut worst = 0.0f64;
    let mut pass = true;
    for (i, a) in views.iter().enumerate() {
        for b in &views[i + 1..] {
            let gap = (b.alpha - a.alpha).rem_euclid(2.0 * PI);
            if (gap - PI).abs() > 1e-9 {
                continue;
            }
            pairs += 1;
            for k in 0..=k_max {
                let ma = moment(&a.positions, None, k);
                let mb = moment(&b.positions, None, k);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let dev = (mb - sign * ma).abs();
                worst = worst.max(dev);
                if dev > DCC_ABS_TOL.max(DCC_REL_TOL * ma.abs().max(mb.abs())) {
                    pass = false;
                }
            }
        }
    }
    if pairs == 0 {
        return EvennessReport::skipped("not testable on this view set: no views half a turn apart");
    }
    EvennessReport {
        tested: true,
        pairs,
        max_deviation: Some(worst),
        pass: Some(pass),
        note: format!("{pairs} view pairs half a turn apart"),
    }
}

/// Fits each weighted order-k moment `Σ w·y^k` by a degree-k polynomial in
/// the source position.
pub fn fanbeam_moment_consistency(views: &[WeightedView], k_max: usize) -> Result<ConsistencyReport> {
    for (i, v) in views.iter().enumerate() {
        if v.weights.len() != v.positions.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} positions",
                v.weights.len(),
                v.positions.len()
            ))
            .at_view(i));
        }
    }
    let distinct = count_distinct(views.iter().map(|v| v.lambda).collect());
    let mut orders = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if distinct < k + 1 {
            return Err(Error::InsufficientViews {
                order: k,
                required: k + 1,
                found: distinct,
            });
        }
        let values: Vec<f64> = views
            .iter()
            .map(|v| moment(&v.positions, Some(&v.weights), k))
            .collect();
        let row = |i: usize, j: usize| views[i].lambda.powi(j as i32);
        orders.push(fit_order(k, &row, &values)?);
    }
    Ok(assemble(
        Geometry::Fanbeam,
        orders,
        EvennessReport::skipped("not applicable to a source line"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fanbeam::project_rig_fanbeam;
    use crate::parallel::project_markers_parallel;
    use crate::types::{FanBeamRig, FanBeamView, ParallelRig, ParallelView};

    fn parallel_views(n: usize) -> Vec<AngleView> {
        let rig = ParallelRig::reference();
        (0..n)
            .map(|i| {
                let alpha = 0.1 + 2.9 * i as f64 / n as f64;
                let [h, v] = project_markers_parallel(&rig, i, ParallelView::new(alpha, 0.0));
                AngleView {
                    alpha,
                    positions: h.positions.into_iter().chain(v.positions).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn consistent_parallel_data_passes() {
        let report = parallel_moment_consistency(&parallel_views(20), 3).unwrap();
        assert!(report.pass);
        for o in &report.orders {
            assert!(o.rms < 1e-10, "order {} rms {}", o.order, o.rms);
            assert_eq!(o.coefficients.len(), o.order + 1);
            assert!(o.leave_one_out.iter().all(|&r| r >= 0.0));
        }
        assert!((report.orders[0].coefficients[0] - 6.0).abs() < 1e-12);
        assert!(!report.evenness.tested);
        assert_eq!(report.suspect_view, None);
    }

    #[test]
    fn shifted_view_is_flagged_at_first_order() {
        let mut views = parallel_views(20);
        for x in &mut views[7].positions {
            *x += 0.1;
        }
        let report = parallel_moment_consistency(&views, 3).unwrap();
        assert!(report.orders[0].pass);
        assert!(!report.orders[1].pass);
        assert_eq!(report.first_failing_order, Some(1));
        assert_eq!(report.suspect_view, Some(7));
    }

    #[test]
    fn evenness_pairs_are_tested() {
        let rig = ParallelRig::reference();
        let views: Vec<AngleView> = [0.3, 0.9, 1.4, 0.3 + PI, 0.9 + PI]
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                let [h, v] = project_markers_parallel(&rig, i, ParallelView::new(alpha, 0.0));
                AngleView {
                    alpha,
                    positions: h.positions.into_iter().chain(v.positions).collect(),
                }
            })
            .collect();
        let report = parallel_moment_consistency(&views, 2).unwrap();
        assert!(report.evenness.tested);
        assert_eq!(report.evenness.pairs, 2);
        assert_eq!(report.evenness.pass, Some(true));
    }

    #[test]
    fn too_few_angles() {
        let views = parallel_views(3);
        assert!(matches!(
            parallel_moment_consistency(&views, 3),
            Err(Error::InsufficientViews { order: 3, required: 4, found: 3 })
        ));
    }

    fn fanbeam_views(jitter_on: Option<usize>) -> Vec<WeightedView> {
        let rig = FanBeamRig::reference();
        (0..15)
            .map(|i| {
                let lambda = -5.0 + 10.0 * i as f64 / 14.0;
                let jitter = if jitter_on == Some(i) { 0.05 } else { 0.0 };
                let [a, b] = project_rig_fanbeam(&rig, i, FanBeamView::new(lambda, jitter)).unwrap();
                WeightedView {
                    lambda,
                    positions: a.positions.iter().chain(&b.positions).copied().collect(),
                    weights: a.weights.unwrap().into_iter().chain(b.weights.unwrap()).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn consistent_fanbeam_data_passes() {
        let report = fanbeam_moment_consistency(&fanbeam_views(None), 3).unwrap();
        assert!(report.pass);
        for o in &report.orders {
            assert!(o.rms < 1e-10);
        }
        let m0 = report.orders[0].coefficients[0];
        assert!((m0 - (4.0 / 8.5 + 4.0 / 9.5)).abs() < 1e-14);
    }

    #[test]
    fn jittered_view_fails_first_order() {
        let report = fanbeam_moment_consistency(&fanbeam_views(Some(4)), 3).unwrap();
        assert!(!report.orders[1].pass);
        assert_eq!(report.suspect_view, Some(4));
    }
}
