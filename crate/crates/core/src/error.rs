use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the simulators, solvers and consistency checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("found {found} separated marker bumps, expected {expected}")]
    Overlap { expected: usize, found: usize },

    #[error("found {found} marker bumps, expected only {expected}")]
    UnexpectedBumps { expected: usize, found: usize },

    #[error("marker bump touches the truncation window or a missing sample")]
    TruncatedMarker,

    #[error("view pair ({first}, {second}) is degenerate: {reason}")]
    DegenerateViewPair {
        first: usize,
        second: usize,
        reason: String,
    },

    #[error("reference angle is too close to an axis (cos = {cos:e}, sin = {sin:e})")]
    DegenerateAngle { cos: f64, sin: f64 },

    #[error("view is nearly axis-aligned: second moment {moment:e} below tolerance")]
    DegenerateView { moment: f64 },

    #[error("third-order marker coefficient {value:e} vanishes")]
    DegenerateCoefficient { value: f64 },

    #[error("group {group} has {found} markers, expected {expected}")]
    IncompleteView {
        group: String,
        expected: usize,
        found: usize,
    },

    #[error("need at least {required} views, got {found}")]
    TooFewViews { required: usize, found: usize },

    #[error("group needs at least {required} markers, got {found}")]
    TooFewMarkers { required: usize, found: usize },

    #[error("marker x1 = {x1} lies outside the slab [0, {d})")]
    MarkerOutsideSlab { x1: f64, d: f64 },

    #[error("cross-ratio points coincide")]
    DegeneratePoints,

    #[error("marker classification failed: {0}")]
    Classification(String),

    #[error("squared magnification R = {value} is below 1 for line {line}")]
    NegativeDiscriminant { line: char, value: f64 },

    #[error("line magnifications coincide (r_a = {r_a}, r_b = {r_b})")]
    SingularSystem { r_a: f64, r_b: f64 },

    #[error("order {order} needs {required} distinct abscissae, got {found}")]
    InsufficientViews {
        order: usize,
        required: usize,
        found: usize,
    },

    #[error("design matrix has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("view {view}: {source}")]
    InView {
        view: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_view(self, view: usize) -> Error {
        match self {
            e @ Error::InView { .. } => e,
            e => Error::InView {
                view,
                source: Box::new(e),
            },
        }
    }

    /// View indices this error points at, innermost annotation and view
    /// pairs included.
    pub fn views(&self) -> Vec<usize> {
        match self {
            Error::InView { view, source } => {
                let mut v = vec![*view];
                v.extend(source.views().into_iter().filter(|x| x != view));
                v
            }
            Error::DegenerateViewPair { first, second, .. } => vec![*first, *second],
            _ => Vec::new(),
        }
    }

    /// Strips view annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::InView { source, .. } => source.root(),
            e => e,
        }
    }
}
