use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::objective::reconstruct;
use super::{Basis, CompositeDictionary, ConstrainedAtom, SolverSettings, EPSILON};
use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, map_range, Execution};

/// `(Y / DX) x̄ᵀ` as a K-vector, plus `Σ_t x̄_t` (so that `1 x̄ᵀ = sx·1`).
pub(crate) fn ratio_times_row(
    y: ArrayView2<f64>,
    dx: ArrayView2<f64>,
    xrow: ArrayView1<f64>,
    exec: Execution,
) -> (Vec<f64>, f64) {
    let sx: f64 = xrow.iter().sum();
    if sx == 0.0 {
        return (vec![0.0; y.nrows()], 0.0);
    }
    let w = map_range(exec, y.nrows(), |i| {
        let mut acc = 0.0;
        for ((yv, dv), xv) in y.row(i).iter().zip(dx.row(i)).zip(xrow) {
            if *xv != 0.0 && *yv != 0.0 {
                acc += yv / dv.max(EPSILON) * xv;
            }
        }
        acc
    });
    (w, sx)
}

/// Multiplicative linNMF step `a ← a · Ψᵀ(Y/DX)x̄ᵀ / Ψᵀ1x̄ᵀ`.
pub(crate) fn lin_rule(coeffs: &Array1<f64>, basis: &Basis, w: &[f64], sx: f64) -> Array1<f64> {
    let num = basis.apply_transpose(w);
    let den = basis.apply_transpose(&vec![sx; basis.rows()]);
    coeffs
        .iter()
        .zip(num.iter().zip(&den))
        .map(|(a, (n, d))| a * (n.max(EPSILON) / d.max(EPSILON)))
        .collect()
}

/// denseNMF step on the l1-normalized coefficients, renormalized afterwards.
pub(crate) fn dense_rule(coeffs: &Array1<f64>, basis: &Basis, w: &[f64], sx: f64, alpha: f64) -> Array1<f64> {
    let norm: f64 = coeffs.sum();
    if norm <= 0.0 {
        return coeffs.clone();
    }
    let a = coeffs / norm;
    let v = Array1::from(basis.apply_transpose(w));
    let u = Array1::from(basis.apply_transpose(&vec![sx; basis.rows()]));
    // 1 ãᵀ z broadcasts the scalar ã·z to every entry
    let a_dot_u = a.dot(&u);
    let a_dot_v = a.dot(&v);
    let a_dot_a = a.dot(&a);
    let mut next: Array1<f64> = a
        .iter()
        .zip(u.iter().zip(v.iter()))
        .map(|(ak, (uk, vk))| {
            let num = a_dot_u + vk + alpha * a_dot_a;
            let den = uk + a_dot_v + alpha * ak;
            ak * (num / den.max(EPSILON))
        })
        .collect();
    let total = next.sum();
    if total > 0.0 {
        next /= total;
    }
    next
}

/// Unconstrained KL column step `d ← d · (Y/DX)x̄ᵀ / 1x̄ᵀ`.
pub(crate) fn plain_column_rule(d: &Array1<f64>, w: &[f64], sx: f64) -> Array1<f64> {
    let den = sx.max(EPSILON);
    d.iter().zip(w).map(|(dv, wv)| dv * (wv.max(EPSILON) / den)).collect()
}

/// In-place gain step `X ← X · Dᵀ(Y/DX) / (Dᵀ1 + λ)` with per-row λ.
pub(crate) fn gains_step(
    x: &mut Array2<f64>,
    d: ArrayView2<f64>,
    y: ArrayView2<f64>,
    dx: ArrayView2<f64>,
    lambdas: &[f64],
    exec: Execution,
) {
    let (bins, frames) = y.dim();
    let atoms = d.ncols();
    if frames == 0 {
        return;
    }
    let mut q = vec![0.0; bins * frames];
    for_each_chunk_mut(exec, &mut q, frames, |i, row| {
        for ((qv, yv), dv) in row.iter_mut().zip(y.row(i)).zip(dx.row(i)) {
            *qv = yv / dv.max(EPSILON);
        }
    });
    let xs = x.as_slice_mut().expect("standard layout gains");
    debug_assert_eq!(xs.len(), atoms * frames);
    for_each_chunk_mut(exec, xs, frames, |j, row| {
        let mut num = vec![0.0; frames];
        let mut colsum = 0.0;
        for i in 0..bins {
            let dij = d[[i, j]];
            colsum += dij;
            if dij == 0.0 {
                continue;
            }
            for (n, qv) in num.iter_mut().zip(&q[i * frames..(i + 1) * frames]) {
                *n += dij * qv;
            }
        }
        let den = (colsum + lambdas[j]).max(EPSILON);
        for (xv, n) in row.iter_mut().zip(&num) {
            *xv *= n / den;
        }
    });
}

fn check_shapes(y: &Array2<f64>, d: &Array2<f64>, x: &Array2<f64>) -> Result<()> {
    if y.nrows() != d.nrows() || d.ncols() != x.nrows() || x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!("Y {:?}, D {:?}, X {:?}", y.dim(), d.dim(), x.dim())));
    }
    Ok(())
}

/// One multiplicative gain update for the dictionary `dict`.
pub fn update_gains(
    x: &Array2<f64>,
    dict: &CompositeDictionary,
    y: &Array2<f64>,
    settings: &SolverSettings,
) -> Result<Array2<f64>> {
    let d = dict.realized();
    check_shapes(y, d, x)?;
    let dx = reconstruct(d.view(), x.view(), settings.execution);
    let lambdas: Vec<f64> = dict.atoms().iter().map(|a| settings.lambda_for(a.kind)).collect();
    let mut next = x.as_standard_layout().into_owned();
    gains_step(&mut next, d.view(), y.view(), dx.view(), &lambdas, settings.execution);
    Ok(next)
}

/// linNMF update of atom `j` given the realized dictionary `d` and gains `x`.
pub fn update_atom_lin(
    atom: &ConstrainedAtom,
    y: &Array2<f64>,
    d: &Array2<f64>,
    x: &Array2<f64>,
    j: usize,
) -> Result<ConstrainedAtom> {
    check_shapes(y, d, x)?;
    let dx = reconstruct(d.view(), x.view(), Execution::Sequential);
    let (w, sx) = ratio_times_row(y.view(), dx.view(), x.row(j), Execution::Sequential);
    let mut next = atom.clone();
    next.coeffs = lin_rule(&atom.coeffs, &atom.basis, &w, sx);
    Ok(next)
}

/// denseNMF update of atom `j`; the result has unit l1 norm.
pub fn update_atom_dense(
    atom: &ConstrainedAtom,
    y: &Array2<f64>,
    d: &Array2<f64>,
    x: &Array2<f64>,
    j: usize,
    alpha: f64,
) -> Result<ConstrainedAtom> {
    check_shapes(y, d, x)?;
    let dx = reconstruct(d.view(), x.view(), Execution::Sequential);
    let (w, sx) = ratio_times_row(y.view(), dx.view(), x.row(j), Execution::Sequential);
    let mut next = atom.clone();
    next.coeffs = dense_rule(&atom.coeffs, &atom.basis, &w, sx, alpha);
    Ok(next)
}
