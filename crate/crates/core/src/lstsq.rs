//! Small dense least-squares fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub coefficients: Vec<f64>,
    /// Root mean square of the misfit over all samples.
    pub rms: f64,
    /// Sum of squared misfits.
    pub ssr: f64,
}

/// Minimises `‖A·x - y‖` through an SVD of the column-normalised design.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Result<Fit> {
    let (rows, cols) = design.shape();
    if rows != y.len() {
        return Err(Error::InvalidInput(format!(
            "design has {rows} rows but {} samples were given",
            y.len()
        )));
    }
    let norms: Vec<f64> = (0..cols).map(|j| design.column(j).norm()).collect();
    let mut scaled = design.clone();
    for (j, &n) in norms.iter().enumerate() {
        if n > 0.0 {
            scaled.column_mut(j).unscale_mut(n);
        }
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax && s > 0.0)
        .count();
    if rank < cols || rows < cols {
        return Err(Error::RankDeficient {
            rank: rank.min(rows),
            expected: cols,
        });
    }
    let rhs = DVector::from_column_slice(y);
    let x = svd
        .solve(&rhs, RANK_TOL * smax)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let coefficients: Vec<f64> = x.iter().zip(&norms).map(|(c, n)| c / n).collect();
    let misfit = design * DVector::from_column_slice(&coefficients) - rhs;
    let ssr = misfit.norm_squared();
    Ok(Fit {
        coefficients,
        rms: (ssr / rows as f64).sqrt(),
        ssr,
    })
}

/// Least-squares polynomial of the given degree; coefficients in ascending
/// powers.
pub fn polynomial_fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Fit> {
    let design = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    least_squares(&design, ys)
}
