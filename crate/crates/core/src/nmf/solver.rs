use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::{reconstruct, terms_with, ObjectiveTerms};
use super::updates::{dense_rule, gains_step, lin_rule, plain_column_rule, ratio_times_row};
use super::{AtomKind, Basis, CompositeDictionary};
use crate::error::{invalid, Error, Result};
use crate::exec::{for_each_chunk_mut, Execution};

/// Which update rule the atoms follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Identity-basis atoms are free columns updated with the standard KL rule;
    /// any other atom uses the lin rule.
    Plain,
    Lin,
    /// Speech atoms use the density-regularized rule, noise atoms the lin rule.
    Dense,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "lin" => Ok(Mode::Lin),
            "dense" => Ok(Mode::Dense),
            other => Err(invalid(format!("unknown mode '{other}' (expected plain, lin or dense)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Lin => "lin",
            Mode::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub lambda_speech: f64,
    pub lambda_noise: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Skip atom updates and fit gains only.
    pub frozen_dictionary: bool,
    pub execution: Execution,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            lambda_speech: 0.2,
            lambda_noise: 0.0,
            alpha: 10.0,
            iterations: 25,
            seed: 0,
            frozen_dictionary: false,
            execution: Execution::default(),
        }
    }
}

impl SolverSettings {
    pub fn lambda_for(&self, kind: AtomKind) -> f64 {
        match kind {
            AtomKind::Speech => self.lambda_speech,
            AtomKind::Noise => self.lambda_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_s", self.lambda_speech), ("lambda_n", self.lambda_noise), ("alpha", self.alpha)] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub dictionary: CompositeDictionary,
    pub gains: Array2<f64>,
    /// Objective before the first iteration and after each one.
    pub trace: Vec<ObjectiveTerms>,
}

/// Seeded m×T gains drawn uniformly from (0, 1].
pub fn random_gains(atoms: usize, frames: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((atoms, frames), |_| 1.0 - rng.random::<f64>())
}

/// Factorizes `y ≈ D X` from seeded random gains.
pub fn solve(y: &Array2<f64>, dict: CompositeDictionary, settings: &SolverSettings, mode: Mode) -> Result<SolveOutput> {
    let x = random_gains(dict.len(), y.ncols(), settings.seed);
    solve_from(y, dict, x, settings, mode)
}

/// Factorizes `y ≈ D X` starting from the given gains.
///
/// Each iteration updates every atom in index order, refreshing `D` (and the
/// running `DX`) after each one, then applies one gain update.
pub fn solve_from(
    y: &Array2<f64>,
    dict: CompositeDictionary,
    x0: Array2<f64>,
    settings: &SolverSettings,
    mode: Mode,
) -> Result<SolveOutput> {
    solve_observed(y, dict, x0, settings, mode, |_, _, _| {})
}

/// [`solve_from`] that calls `observer(iteration, dict, x)` after every
/// completed iteration (1-based).
pub fn solve_observed<F>(
    y: &Array2<f64>,
    mut dict: CompositeDictionary,
    x0: Array2<f64>,
    settings: &SolverSettings,
    mode: Mode,
    mut observer: F,
) -> Result<SolveOutput>
where
    F: FnMut(usize, &CompositeDictionary, &Array2<f64>),
{
    settings.validate()?;
    if y.nrows() != dict.bins() || x0.dim() != (dict.len(), y.ncols()) {
        return Err(Error::ShapeMismatch(format!(
            "Y {:?}, D {:?}, X {:?}",
            y.dim(),
            dict.realized().dim(),
            x0.dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("observation must be finite and non-negative"));
    }
    if x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("initial gains must be finite and non-negative"));
    }
    let exec = settings.execution;
    let y = y.as_standard_layout().into_owned();
    let mut x = x0.as_standard_layout().into_owned();
    let lambdas: Vec<f64> = dict.atoms().iter().map(|a| settings.lambda_for(a.kind)).collect();

    if mode == Mode::Dense && !settings.frozen_dictionary {
        for j in 0..dict.len() {
            let atom = &dict.atoms()[j];
            let s = atom.coeffs.sum();
            if atom.kind == AtomKind::Speech && s > 0.0 {
                let c = &atom.coeffs / s;
                dict.set_coeffs(j, c);
            }
        }
    }

    let mut dx = reconstruct(dict.realized().view(), x.view(), exec);
    let mut trace = Vec::with_capacity(settings.iterations + 1);
    trace.push(terms_with(&y, &dx, &dict, &x, settings, mode));

    for iteration in 1..=settings.iterations {
        if !settings.frozen_dictionary {
            for j in 0..dict.len() {
                let (w, sx) = ratio_times_row(y.view(), dx.view(), x.row(j), exec);
                let atom = &dict.atoms()[j];
                let next = match (mode, atom.kind, &atom.basis) {
                    (Mode::Plain, _, Basis::Identity(_)) => plain_column_rule(&atom.coeffs, &w, sx),
                    (Mode::Dense, AtomKind::Speech, basis) => dense_rule(&atom.coeffs, basis, &w, sx, settings.alpha),
                    (_, _, basis) => lin_rule(&atom.coeffs, basis, &w, sx),
                };
                let old: Array1<f64> = dict.realized().column(j).to_owned();
                dict.set_coeffs(j, next);
                let delta: Vec<f64> = dict.realized().column(j).iter().zip(&old).map(|(n, o)| n - o).collect();
                rank_one_update(&mut dx, &delta, x.row(j).as_slice().expect("row"), exec);
            }
            dx = reconstruct(dict.realized().view(), x.view(), exec);
        }
        gains_step(&mut x, dict.realized().view(), y.view(), dx.view(), &lambdas, exec);
        dx = reconstruct(dict.realized().view(), x.view(), exec);
        trace.push(terms_with(&y, &dx, &dict, &x, settings, mode));
        observer(iteration, &dict, &x);
    }

    Ok(SolveOutput { dictionary: dict, gains: x, trace })
}

/// `DX += δ xᵀ`
fn rank_one_update(dx: &mut Array2<f64>, delta: &[f64], xrow: &[f64], exec: Execution) {
    let frames = dx.ncols();
    if frames == 0 {
        return;
    }
    let data = dx.as_slice_mut().expect("standard layout");
    for_each_chunk_mut(exec, data, frames, |i, row| {
        let di = delta[i];
        if di != 0.0 {
            for (v, xv) in row.iter_mut().zip(xrow) {
                *v += di * xv;
            }
        }
    });
}
