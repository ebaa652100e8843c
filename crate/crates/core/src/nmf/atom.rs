use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{invalid, Error, Result};

/// Spanning basis `Ψ` of a constrained atom.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Explicit non-negative K×p matrix, shared between atoms via `Arc`.
    Matrix(Arc<Array2<f64>>),
    /// K×K identity: the atom is an unconstrained column.
    Identity(usize),
}

impl Basis {
    pub fn rows(&self) -> usize {
        match self {
            Basis::Matrix(m) => m.nrows(),
            Basis::Identity(k) => *k,
        }
    }

    /// Number of coefficients the basis expects.
    pub fn dim(&self) -> usize {
        match self {
            Basis::Matrix(m) => m.ncols(),
            Basis::Identity(k) => *k,
        }
    }

    /// `Ψ a`
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        match self {
            Basis::Identity(_) => coeffs.to_vec(),
            Basis::Matrix(m) => m
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(coeffs).map(|(p, a)| p * a).sum())
                .collect(),
        }
    }

    /// `Ψᵀ v`
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Basis::Identity(_) => v.to_vec(),
            Basis::Matrix(m) => {
                let mut out = vec![0.0; m.ncols()];
                for (row, vi) in m.rows().into_iter().zip(v) {
                    if *vi == 0.0 {
                        continue;
                    }
                    for (o, p) in out.iter_mut().zip(row.iter()) {
                        *o += p * vi;
                    }
                }
                out
            }
        }
    }
}

/// Which gain-row sparsity weight (and update rule) an atom uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Speech,
    Noise,
}

/// One dictionary column realized as `basis · coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedAtom {
    pub basis: Basis,
    pub coeffs: Array1<f64>,
    pub kind: AtomKind,
}

impl ConstrainedAtom {
    pub fn new(basis: Basis, coeffs: Array1<f64>, kind: AtomKind) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a basis of dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        if coeffs.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(invalid("atom coefficients must be finite and non-negative"));
        }
        if let Basis::Matrix(m) = &basis {
            if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("atom basis must be finite and non-negative"));
            }
        }
        Ok(Self { basis, coeffs, kind })
    }

    /// `d = Ψ a`
    pub fn realize(&self) -> Vec<f64> {
        self.basis.apply(self.coeffs.as_slice().expect("contiguous coefficients"))
    }
}

/// Ordered atoms (speech first, then noise) with the realized K×m matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeDictionary {
    atoms: Vec<ConstrainedAtom>,
    realized: Array2<f64>,
}

impl CompositeDictionary {
    pub fn new(atoms: Vec<ConstrainedAtom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| invalid("dictionary needs at least one atom"))?;
        let bins = first.basis.rows();
        if let Some(a) = atoms.iter().find(|a| a.basis.rows() != bins) {
            return Err(Error::ShapeMismatch(format!(
                "atom with {} rows in a {bins}-row dictionary",
                a.basis.rows()
            )));
        }
        let speech = atoms.iter().take_while(|a| a.kind == AtomKind::Speech).count();
        if atoms[speech..].iter().any(|a| a.kind == AtomKind::Speech) {
            return Err(invalid("speech atoms must precede noise atoms"));
        }
        let mut dict = Self { realized: Array2::zeros((bins, atoms.len())), atoms };
        dict.refresh();
        Ok(dict)
    }

    pub fn atoms(&self) -> &[ConstrainedAtom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<ConstrainedAtom> {
        self.atoms
    }

    pub fn realized(&self) -> &Array2<f64> {
        &self.realized
    }

    pub fn bins(&self) -> usize {
        self.realized.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn speech_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.kind == AtomKind::Speech).count()
    }

    pub fn noise_count(&self) -> usize {
        self.len() - self.speech_count()
    }

    /// Recomputes every realized column from its atom.
    pub fn refresh(&mut self) {
        for j in 0..self.atoms.len() {
            self.refresh_column(j);
        }
    }

    fn refresh_column(&mut self, j: usize) {
        let d = self.atoms[j].realize();
        self.realized.column_mut(j).assign(&Array1::from(d));
    }

    /// Replaces atom `j`'s coefficients and refreshes its realized column.
    pub fn set_coeffs(&mut self, j: usize, coeffs: Array1<f64>) {
        debug_assert_eq!(coeffs.len(), self.atoms[j].coeffs.len());
        self.atoms[j].coeffs = coeffs;
        self.refresh_column(j);
    }
}
