use ndarray::{Array2, ArrayView2};

use super::solver::{Mode, SolverSettings};
use super::{AtomKind, CompositeDictionary, EPSILON};
use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Execution};

/// Objective value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub kl: f64,
    /// `λ_s ‖X_s‖₁ + λ_n ‖X_n‖₁`
    pub sparsity: f64,
    /// `α Σ ‖a_j‖₂²` over speech atoms, dense mode only.
    pub density: f64,
    pub total: f64,
}

/// `D X`, accumulated row by row in atom order.
pub fn reconstruct(d: ArrayView2<f64>, x: ArrayView2<f64>, exec: Execution) -> Array2<f64> {
    let (bins, atoms) = d.dim();
    let frames = x.ncols();
    assert_eq!(atoms, x.nrows(), "inner dimensions differ");
    let x = x.as_standard_layout();
    let mut out = vec![0.0; bins * frames];
    if frames > 0 {
        for_each_chunk_mut(exec, &mut out, frames, |i, row| {
            for j in 0..atoms {
                let dij = d[[i, j]];
                if dij == 0.0 {
                    continue;
                }
                for (o, xv) in row.iter_mut().zip(x.row(j)) {
                    *o += dij * xv;
                }
            }
        });
    }
    Array2::from_shape_vec((bins, frames), out).expect("shape")
}

/// Generalized KL divergence `Σ Y log(Y/V) − Y + V` with `V` floored at
/// [`EPSILON`] and `0 log 0 = 0`.
pub fn kl_divergence(y: &Array2<f64>, v: &Array2<f64>) -> Result<f64> {
    if y.dim() != v.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", y.dim(), v.dim())));
    }
    Ok(kl_unchecked(y.view(), v.view()))
}

pub(crate) fn kl_unchecked(y: ArrayView2<f64>, v: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for (yr, vr) in y.rows().into_iter().zip(v.rows()) {
        let mut row = 0.0;
        for (&yi, &vi) in yr.iter().zip(vr.iter()) {
            let vi = vi.max(EPSILON);
            row += if yi > 0.0 { yi * (yi / vi).ln() - yi + vi } else { vi };
        }
        total += row;
    }
    total
}

/// Mode-appropriate objective of `(dict, x)` against `y`.
pub fn objective(
    y: &Array2<f64>,
    dict: &CompositeDictionary,
    x: &Array2<f64>,
    settings: &SolverSettings,
    mode: Mode,
) -> Result<ObjectiveTerms> {
    if y.nrows() != dict.bins() || x.nrows() != dict.len() || x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Y {:?}, D {:?}, X {:?}",
            y.dim(),
            dict.realized().dim(),
            x.dim()
        )));
    }
    let dx = reconstruct(dict.realized().view(), x.view(), settings.execution);
    Ok(terms_with(y, &dx, dict, x, settings, mode))
}

pub(crate) fn terms_with(
    y: &Array2<f64>,
    dx: &Array2<f64>,
    dict: &CompositeDictionary,
    x: &Array2<f64>,
    settings: &SolverSettings,
    mode: Mode,
) -> ObjectiveTerms {
    let kl = kl_unchecked(y.view(), dx.view());
    let sparsity: f64 = dict
        .atoms()
        .iter()
        .zip(x.rows())
        .map(|(a, row)| settings.lambda_for(a.kind) * row.sum())
        .sum();
    let density = if mode == Mode::Dense {
        settings.alpha
            * dict
                .atoms()
                .iter()
                .filter(|a| a.kind == AtomKind::Speech)
                .map(|a| a.coeffs.iter().map(|c| c * c).sum::<f64>())
                .sum::<f64>()
    } else {
        0.0
    };
    ObjectiveTerms { kl, sparsity, density, total: kl + sparsity + density }
}
