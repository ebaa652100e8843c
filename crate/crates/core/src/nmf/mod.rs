//! KL-divergence NMF with dictionary atoms constrained to linear subspaces.
//!
//! Each dictionary column is `d_j = Ψ_j a_j` for a fixed non-negative basis
//! `Ψ_j` and learned non-negative coefficients `a_j`. Three solvers share one
//! loop: plain (unconstrained columns), lin (subspace-constrained atoms) and
//! dense (lin plus an l2 density penalty on l1-normalized speech coefficients).

mod atom;
mod objective;
mod solver;
mod updates;

pub use atom::{AtomKind, Basis, CompositeDictionary, ConstrainedAtom};
pub use objective::{kl_divergence, objective, reconstruct, ObjectiveTerms};
pub use solver::{random_gains, solve, solve_from, solve_observed, Mode, SolveOutput, SolverSettings};
pub use updates::{update_atom_dense, update_atom_lin, update_gains};

/// Floor applied to every divisor and inside logarithms.
pub const EPSILON: f64 = 1e-12;
