//! Geometric value types shared by the simulators and solvers.
//!
//! All lengths are in cm and all angles in radians.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Relative tolerance for collinearity and perpendicularity of rig lines.
pub const RIG_GEOMETRY_TOL: f64 = 1e-9;

/// Scale-free tolerance on the third central moment of a marker line.
pub const THIRD_MOMENT_TOL: f64 = 1e-6;

/// A point in the object plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    /// Counter-clockwise rotation by `angle`.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

/// Unit direction `(cos α, sin α)`.
pub fn direction(alpha: f64) -> Point2 {
    let (s, c) = alpha.sin_cos();
    Point2::new(c, s)
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x1, p.x2]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x1, -self.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x1 * k, self.x2 * k)
    }
}

fn centroid(points: &[Point2]) -> Point2 {
    let n = points.len().max(1) as f64;
    points.iter().fold(Point2::default(), |acc, &p| acc + p) * (1.0 / n)
}

fn sort_along_line(points: &mut [Point2]) {
    points.sort_by(|a, b| a.x1.total_cmp(&b.x1).then(a.x2.total_cmp(&b.x2)));
}

/// Principal direction of a point set and the centroid it passes through.
fn principal_line(points: &[Point2]) -> (Point2, Point2) {
    let c = centroid(points);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - c;
        sxx += d.x1 * d.x1;
        sxy += d.x1 * d.x2;
        syy += d.x2 * d.x2;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (c, direction(theta))
}

/// Two groups of markers on perpendicular lines, as used for parallel-beam
/// calibration.
///
/// Markers inside each group are kept sorted by `(x1, x2)`, i.e. ascending
/// along the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ParallelRigRepr")]
pub struct ParallelRig {
    pub h_markers: Vec<Point2>,
    pub v_markers: Vec<Point2>,
}

#[derive(Deserialize)]
struct ParallelRigRepr {
    h_markers: Vec<Point2>,
    v_markers: Vec<Point2>,
}

impl From<ParallelRigRepr> for ParallelRig {
    fn from(r: ParallelRigRepr) -> Self {
        ParallelRig::new(r.h_markers, r.v_markers)
    }
}

impl ParallelRig {
    pub fn new(mut h_markers: Vec<Point2>, mut v_markers: Vec<Point2>) -> Self {
        sort_along_line(&mut h_markers);
        sort_along_line(&mut v_markers);
        Self {
            h_markers,
            v_markers,
        }
    }

    /// The six-marker rig from the reference experiments.
    pub fn reference() -> Self {
        ParallelRig::new(
            vec![
                Point2::new(-2.4, 0.0),
                Point2::new(0.4, 0.0),
                Point2::new(2.3, 0.0),
            ],
            vec![
                Point2::new(-0.1, -2.5),
                Point2::new(-0.1, 0.5),
                Point2::new(-0.1, 2.0),
            ],
        )
    }

    pub fn markers(&self) -> impl Iterator<Item = &Point2> {
        self.h_markers.iter().chain(self.v_markers.iter())
    }

    pub fn marker_count(&self) -> usize {
        self.h_markers.len() + self.v_markers.len()
    }

    /// Radius of the smallest origin-centred ball containing all markers.
    pub fn extent(&self) -> f64 {
        self.markers().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Line coefficients `(a20, a02, a30, a03)` in the frame where the
    /// h-line is the x1 axis and the v-line is the x2 axis, each group
    /// centred on its own centroid.
    pub fn line_coefficients(&self) -> (f64, f64, f64, f64) {
        let ch = centroid(&self.h_markers);
        let cv = centroid(&self.v_markers);
        let h: Vec<f64> = self.h_markers.iter().map(|p| p.x1 - ch.x1).collect();
        let v: Vec<f64> = self.v_markers.iter().map(|p| p.x2 - cv.x2).collect();
        (
            h.iter().map(|t| t * t).sum(),
            v.iter().map(|t| t * t).sum(),
            h.iter().map(|t| t * t * t).sum(),
            v.iter().map(|t| t * t * t).sum(),
        )
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.markers().any(|p| !p.is_finite()) {
            out.push(Violation::new(ViolationKind::NonFinite, "non-finite marker coordinate"));
            return out;
        }
        let mut lines = Vec::new();
        for (name, group) in [("h", &self.h_markers), ("v", &self.v_markers)] {
            if group.len() < 3 {
                out.push(Violation::new(
                    ViolationKind::TooFewMarkers,
                    format!("{name}-group has {} markers, need at least 3", group.len()),
                ));
                continue;
            }
            let (c, dir) = principal_line(group);
            let spread = group.iter().map(|p| (*p - c).norm()).fold(0.0, f64::max);
            let scale = spread.max(f64::MIN_POSITIVE);
            let off = group.iter().map(|p| (*p - c).cross(dir).abs()).fold(0.0, f64::max);
            if off > RIG_GEOMETRY_TOL * scale {
                out.push(Violation::new(
                    ViolationKind::NotCollinear,
                    format!("{name}-group markers are not collinear (offset {off:e})"),
                ));
            }
            let t: Vec<f64> = group.iter().map(|p| (*p - c).dot(dir)).collect();
            let a3: f64 = t.iter().map(|x| x * x * x).sum();
            let tmax = t.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if a3.abs() < THIRD_MOMENT_TOL * tmax.powi(3) {
                let label = if name == "h" { "a30" } else { "a03" };
                out.push(Violation::new(
                    ViolationKind::DegenerateThirdMoment,
                    format!("{label} ≈ 0 ({a3:e}); markers are equidistant"),
                ));
            }
            lines.push(dir);
        }
        if let [dh, dv] = lines[..] {
            let cos = dh.dot(dv).abs();
            if cos > RIG_GEOMETRY_TOL {
                out.push(Violation::new(
                    ViolationKind::NotPerpendicular,
                    format!("marker lines are not perpendicular (|cos| = {cos:e})"),
                ));
            }
        }
        out
    }
}

/// Known spacing constants of the two four-marker lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBeamPattern {
    #[serde(rename = "L")]
    pub l: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl FanBeamPattern {
    pub fn reference() -> Self {
        Self {
            l: 0.4,
            k1: 3.0,
            k2: 1.0,
            k3: 2.0,
        }
    }

    /// Ascending offsets of line a about its centre.
    pub fn offsets_a(&self) -> [f64; 4] {
        let l = self.l;
        [-self.k1 * l, -l, l, self.k1 * l]
    }

    /// Ascending offsets of line b about its centre.
    pub fn offsets_b(&self) -> [f64; 4] {
        let l = self.l;
        [-self.k3 * l, -self.k2 * l, self.k2 * l, self.k3 * l]
    }

    /// `Σ offset² / L²` for line a.
    pub fn spread_a(&self) -> f64 {
        2.0 + 2.0 * self.k1 * self.k1
    }

    /// `Σ offset² / L²` for line b.
    pub fn spread_b(&self) -> f64 {
        2.0 * self.k2 * self.k2 + 2.0 * self.k3 * self.k3
    }

    /// Cross-ratio of the line-a pattern, `((k1-1)/(k1+1))²`.
    pub fn cross_ratio_a(&self) -> f64 {
        let r = (self.k1 - 1.0) / (self.k1 + 1.0);
        r * r
    }

    /// Cross-ratio of the line-b pattern, `((k3-k2)/(k3+k2))²`.
    pub fn cross_ratio_b(&self) -> f64 {
        let r = (self.k3 - self.k2) / (self.k3 + self.k2);
        r * r
    }
}

/// Two vertical lines of four markers between the detector line `x1 = 0`
/// and the source line `x1 = D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBeamRig {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C_a")]
    pub c_a: f64,
    pub p_a: f64,
    #[serde(rename = "C_b")]
    pub c_b: f64,
    pub p_b: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl FanBeamRig {
    pub fn new(d: f64, c_a: f64, p_a: f64, c_b: f64, p_b: f64, pattern: FanBeamPattern) -> Self {
        Self {
            d,
            c_a,
            p_a,
            c_b,
            p_b,
            l: pattern.l,
            k1: pattern.k1,
            k2: pattern.k2,
            k3: pattern.k3,
        }
    }

    /// The reference configuration: D = 10, line a at (1.5, 0), line b at
    /// (0.5, 3.2), L = 0.4, k = (3, 1, 2).
    pub fn reference() -> Self {
        FanBeamRig::new(10.0, 1.5, 0.0, 0.5, 3.2, FanBeamPattern::reference())
    }

    pub fn pattern(&self) -> FanBeamPattern {
        FanBeamPattern {
            l: self.l,
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
        }
    }

    pub fn line_a(&self) -> [Point2; 4] {
        self.pattern()
            .offsets_a()
            .map(|o| Point2::new(self.c_a, self.p_a + o))
    }

    pub fn line_b(&self) -> [Point2; 4] {
        self.pattern()
            .offsets_b()
            .map(|o| Point2::new(self.c_b, self.p_b + o))
    }

    /// `r_l = C_l / (D - C_l)` for both lines.
    pub fn magnification_ratios(&self) -> (f64, f64) {
        (self.c_a / (self.d - self.c_a), self.c_b / (self.d - self.c_b))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let fields = [
            self.d, self.c_a, self.p_a, self.c_b, self.p_b, self.l, self.k1, self.k2, self.k3,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(ViolationKind::NonFinite, "non-finite rig parameter"));
            return out;
        }
        for (name, c) in [("C_a", self.c_a), ("C_b", self.c_b)] {
            if !(c > 0.0 && c < self.d) {
                out.push(Violation::new(
                    ViolationKind::OutsideSlab,
                    format!("{name} = {c} must lie in (0, D = {})", self.d),
                ));
            }
        }
        if (self.c_a - self.c_b).abs() <= RIG_GEOMETRY_TOL * self.d.abs() {
            out.push(Violation::new(
                ViolationKind::DegenerateLinePair,
                "degenerate line pair: C_a = C_b makes r_a - r_b vanish",
            ));
        }
        if !(self.l > 0.0) {
            out.push(Violation::new(ViolationKind::InvalidPattern, "L must be positive"));
        }
        if !(self.k1 > 1.0) {
            out.push(Violation::new(ViolationKind::InvalidPattern, "k1 must exceed 1"));
        }
        if !(self.k2 > 0.0 && self.k2 < self.k3) {
            out.push(Violation::new(
                ViolationKind::InvalidPattern,
                "pattern needs 0 < k2 < k3",
            ));
        }
        out
    }
}

/// A calibration rig of either geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum Rig {
    Parallel(ParallelRig),
    Fanbeam(FanBeamRig),
}

impl Rig {
    pub fn geometry(&self) -> Geometry {
        match self {
            Rig::Parallel(_) => Geometry::Parallel,
            Rig::Fanbeam(_) => Geometry::Fanbeam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Parallel,
    Fanbeam,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Parallel => "parallel",
            Geometry::Fanbeam => "fanbeam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    TooFewMarkers,
    NotCollinear,
    NotPerpendicular,
    DegenerateThirdMoment,
    OutsideSlab,
    DegenerateLinePair,
    InvalidPattern,
}

/// A broken rig invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(kind: ViolationKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks every rig invariant and returns the ones that fail.
pub fn validate_rig(rig: &Rig) -> Vec<Violation> {
    match rig {
        Rig::Parallel(r) => r.validate(),
        Rig::Fanbeam(r) => r.validate(),
    }
}

/// Per-view unknowns of the parallel geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelView {
    pub alpha: f64,
    pub shift: f64,
}

impl ParallelView {
    pub fn new(alpha: f64, shift: f64) -> Self {
        Self { alpha, shift }
    }
}

/// Per-view unknowns of the fan-beam geometry: source position on the line
/// `x1 = D` and detector jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBeamView {
    pub lambda: f64,
    pub jitter: f64,
}

impl FanBeamView {
    pub fn new(lambda: f64, jitter: f64) -> Self {
        Self { lambda, jitter }
    }
}

/// Marker group label: h/v lines for the parallel rig, a/b lines for the
/// fan-beam rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    H,
    V,
    A,
    B,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::H => "H",
            Group::V => "V",
            Group::A => "A",
            Group::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match s.trim() {
            "H" | "h" => Some(Group::H),
            "V" | "v" => Some(Group::V),
            "A" | "a" => Some(Group::A),
            "B" | "b" => Some(Group::B),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detected marker projections of one group in one view.
///
/// `weights` are the fan-beam Dirac masses `1/(D - c1)`; only simulators
/// know them, so solvers never read this field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracProjection {
    pub view_index: usize,
    pub group: Group,
    pub positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DiracProjection {
    pub fn moments(&self) -> MomentVector {
        MomentVector::from_positions(&self.positions)
    }

    /// Weighted moments, falling back to unit weights.
    pub fn weighted_moments(&self) -> MomentVector {
        match &self.weights {
            Some(w) => MomentVector::from_weighted(&self.positions, w),
            None => self.moments(),
        }
    }
}

/// Moments of order 0 to 3 of a sum of Diracs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentVector {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl MomentVector {
    pub fn from_positions(positions: &[f64]) -> Self {
        positions.iter().fold(Self::default(), |m, &x| Self {
            m0: m.m0 + 1.0,
            m1: m.m1 + x,
            m2: m.m2 + x * x,
            m3: m.m3 + x * x * x,
        })
    }

    pub fn from_weighted(positions: &[f64], weights: &[f64]) -> Self {
        positions
            .iter()
            .zip(weights)
            .fold(Self::default(), |m, (&x, &w)| Self {
                m0: m.m0 + w,
                m1: m.m1 + w * x,
                m2: m.m2 + w * x * x,
                m3: m.m3 + w * x * x * x,
            })
    }

    pub fn order(&self, k: usize) -> f64 {
        match k {
            0 => self.m0,
            1 => self.m1,
            2 => self.m2,
            3 => self.m3,
            _ => panic!("moment order {k} is not stored"),
        }
    }
}

/// A data-preserving reparameterisation of the scene.
///
/// Parallel: marker `c` becomes `R_γ⁻¹(c - t)`, optionally followed by the
/// reflection `(x1, x2) -> (x1, -x2)`. Fan-beam: the shear-and-translate map
/// that absorbs global shifts `λ'` of the source and `y'` of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum GaugeTransform {
    Parallel {
        gamma: f64,
        translation: Point2,
        #[serde(default)]
        reflect: bool,
    },
    Fanbeam {
        lambda_shift: f64,
        y_shift: f64,
    },
}

impl GaugeTransform {
    pub fn rigid(gamma: f64, translation: Point2) -> Self {
        GaugeTransform::Parallel {
            gamma,
            translation,
            reflect: false,
        }
    }

    pub fn fanbeam(lambda_shift: f64, y_shift: f64) -> Self {
        GaugeTransform::Fanbeam {
            lambda_shift,
            y_shift,
        }
    }
}
