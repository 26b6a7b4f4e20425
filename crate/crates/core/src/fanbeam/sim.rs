use crate::error::{Error, Result};
use crate::types::{DiracProjection, FanBeamRig, FanBeamView, Group, Point2};

/// Detected position and Dirac mass of marker `c` seen from source `λ` on
/// the line `x1 = D`, detector on `x1 = 0`:
/// `((c2·D - c1·λ) / (D - c1) + jitter, 1 / (D - c1))`.
///
/// Markers on the detector line (`c1 = 0`) are allowed and project to
/// themselves.
pub fn project_marker_fanbeam(c: Point2, view: FanBeamView, d: f64) -> Result<(f64, f64)> {
    if !(c.x1 >= 0.0 && c.x1 < d) {
        return Err(Error::MarkerOutsideSlab { x1: c.x1, d });
    }
    let denom = d - c.x1;
    Ok(((c.x2 * d - c.x1 * view.lambda) / denom + view.jitter, 1.0 / denom))
}

fn project_line(
    markers: &[Point2; 4],
    group: Group,
    view_index: usize,
    view: FanBeamView,
    d: f64,
) -> Result<DiracProjection> {
    let mut positions = Vec::with_capacity(4);
    let mut weights = Vec::with_capacity(4);
    for &c in markers {
        let (y, w) = project_marker_fanbeam(c, view, d)?;
        positions.push(y);
        weights.push(w);
    }
    Ok(DiracProjection {
        view_index,
        group,
        positions,
        weights: Some(weights),
    })
}

/// Projections of line a and line b for one view, each ascending (the
/// projection of a line parallel to the detector preserves order).
pub fn project_rig_fanbeam(
    rig: &FanBeamRig,
    view_index: usize,
    view: FanBeamView,
) -> Result<[DiracProjection; 2]> {
    Ok([
        project_line(&rig.line_a(), Group::A, view_index, view, rig.d)?,
        project_line(&rig.line_b(), Group::B, view_index, view, rig.d)?,
    ])
}

/// Grouped positions of one fan-beam view.
#[derive(Debug, Clone, PartialEq)]
pub struct FanBeamObservation {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FanBeamObservation {
    pub fn from_projections(projections: &[DiracProjection]) -> Self {
        let collect = |g: Group| {
            projections
                .iter()
                .filter(|p| p.group == g)
                .flat_map(|p| p.positions.iter().copied())
                .collect()
        };
        Self {
            a: collect(Group::A),
            b: collect(Group::B),
        }
    }

    /// All eight positions, line a first.
    pub fn concat(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }
}

pub fn simulate_fanbeam(rig: &FanBeamRig, views: &[FanBeamView]) -> Result<Vec<FanBeamObservation>> {
    views
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            project_rig_fanbeam(rig, i, v)
                .map(|p| FanBeamObservation::from_projections(&p))
                .map_err(|e| e.at_view(i))
        })
        .collect()
}

/// Shear-and-translate rig that reproduces the original data after a global
/// source shift `λ'` and detector shift `y'`: every marker keeps `x1` and
/// gets `x2 - (y' + λ')·x1 / D + y'`.
pub fn apply_gauge_fanbeam(rig: &FanBeamRig, lambda_shift: f64, y_shift: f64) -> FanBeamRig {
    let shear = (y_shift + lambda_shift) / rig.d;
    FanBeamRig {
        p_a: rig.p_a - shear * rig.c_a + y_shift,
        p_b: rig.p_b - shear * rig.c_b + y_shift,
        ..*rig
    }
}

/// The same gauge applied to a single point.
pub fn gauge_point_fanbeam(c: Point2, d: f64, lambda_shift: f64, y_shift: f64) -> Point2 {
    Point2::new(c.x1, c.x2 - (y_shift + lambda_shift) * c.x1 / d + y_shift)
}

/// View parameters on the gauge-transformed rig that reproduce `view` on
/// the original rig.
pub fn gauge_view_fanbeam(lambda_shift: f64, y_shift: f64, view: FanBeamView) -> FanBeamView {
    FanBeamView {
        lambda: view.lambda - lambda_shift,
        jitter: view.jitter - y_shift,
    }
}

/// Depth scaling: markers `(c1, c2) -> (c1/k, c2)` and `D -> D/k`. Detected
/// positions are unchanged, Dirac masses are multiplied by `k`.
pub fn apply_scaling_ambiguity(rig: &FanBeamRig, k: f64) -> FanBeamRig {
    assert!(k > 0.0, "scaling factor must be positive");
    FanBeamRig {
        d: rig.d / k,
        c_a: rig.c_a / k,
        c_b: rig.c_b / k,
        ..*rig
    }
}
