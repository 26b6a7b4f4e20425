use crate::types::{direction, DiracProjection, GaugeTransform, Group, ParallelRig, ParallelView, Point2};

/// Detector coordinate of marker `c`: `c·θ_α + shift`.
pub fn project_point_parallel(c: Point2, view: ParallelView) -> f64 {
    c.dot(direction(view.alpha)) + view.shift
}

/// Projects both marker groups of `rig` for one view.
///
/// Positions keep the rig's marker order, so `positions[j]` belongs to
/// marker `j` of the group. Parallel weights are all 1 and are omitted.
pub fn project_markers_parallel(
    rig: &ParallelRig,
    view_index: usize,
    view: ParallelView,
) -> [DiracProjection; 2] {
    let project = |group: Group, markers: &[Point2]| DiracProjection {
        view_index,
        group,
        positions: markers
            .iter()
            .map(|&c| project_point_parallel(c, view))
            .collect(),
        weights: None,
    };
    [
        project(Group::H, &rig.h_markers),
        project(Group::V, &rig.v_markers),
    ]
}

/// Grouped positions for one view, ready for the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelObservation {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl ParallelObservation {
    pub fn from_projections(projections: &[DiracProjection]) -> Self {
        let collect = |g: Group| {
            projections
                .iter()
                .filter(|p| p.group == g)
                .flat_map(|p| p.positions.iter().copied())
                .collect()
        };
        Self {
            h: collect(Group::H),
            v: collect(Group::V),
        }
    }

    pub fn all_positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.h.iter().chain(self.v.iter()).copied()
    }
}

/// Noise-free observations of every view.
pub fn simulate_parallel(rig: &ParallelRig, views: &[ParallelView]) -> Vec<ParallelObservation> {
    views
        .iter()
        .enumerate()
        .map(|(i, &v)| ParallelObservation::from_projections(&project_markers_parallel(rig, i, v)))
        .collect()
}

fn rigid_parts(gauge: &GaugeTransform) -> (f64, Point2, bool) {
    match *gauge {
        GaugeTransform::Parallel {
            gamma,
            translation,
            reflect,
        } => (gamma, translation, reflect),
        GaugeTransform::Fanbeam { .. } => {
            panic!("fan-beam gauge applied to a parallel rig")
        }
    }
}

/// Maps every marker `c` to `R_γ⁻¹(c - t)`, then reflects `x2` when the
/// gauge carries the reflection flag.
pub fn apply_rigid_parallel(rig: &ParallelRig, gauge: &GaugeTransform) -> ParallelRig {
    let (gamma, t, reflect) = rigid_parts(gauge);
    let map = |c: &Point2| {
        let p = (*c - t).rotated(-gamma);
        if reflect {
            Point2::new(p.x1, -p.x2)
        } else {
            p
        }
    };
    ParallelRig::new(
        rig.h_markers.iter().map(map).collect(),
        rig.v_markers.iter().map(map).collect(),
    )
}

/// The view under which the transformed rig reproduces the data of `view`
/// on the original rig: angle `α - γ` (negated under reflection) and shift
/// `s + θ_α·t`.
pub fn gauge_view_parallel(gauge: &GaugeTransform, view: ParallelView) -> ParallelView {
    let (gamma, t, reflect) = rigid_parts(gauge);
    let alpha = view.alpha - gamma;
    ParallelView {
        alpha: if reflect { -alpha } else { alpha },
        shift: view.shift + t.dot(direction(view.alpha)),
    }
}
