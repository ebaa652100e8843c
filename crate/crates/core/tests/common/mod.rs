#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use hnmf::nmf::{AtomKind, Basis, CompositeDictionary, ConstrainedAtom};
use hnmf::Signal;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SR: u32 = 8000;

/// Harmonic test signal: `harmonics` partials of `f0` with 1/k amplitudes
/// under a single Hann envelope spanning the whole signal.
pub fn harmonic_signal(f0: f64, harmonics: usize, secs: f64) -> Signal {
    let n = (secs * SR as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / SR as f64;
            let env = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            let s: f64 = (1..=harmonics)
                .map(|k| (2.0 * PI * f0 * k as f64 * t + 0.3 * k as f64).sin() / k as f64)
                .sum();
            0.3 * env * s
        })
        .collect();
    Signal::new(samples, SR).unwrap()
}

/// Gaussian white noise with standard deviation `sigma`.
pub fn white_noise(secs: f64, sigma: f64, seed: u64) -> Signal {
    let n = (secs * SR as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        })
        .collect();
    Signal::new(samples, SR).unwrap()
}

/// Random constrained problem: `speech` atoms with their own sparse bases,
/// `noise` atoms sharing one basis, and `Y` drawn around a planted `D₀X₀`.
pub fn random_problem(seed: u64, bins: usize, frames: usize, speech: usize, noise: usize) -> (Array2<f64>, CompositeDictionary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = Vec::with_capacity(speech + noise);
    for _ in 0..speech {
        let p = rng.random_range(3..=8);
        let psi = Array2::from_shape_fn((bins, p), |_| {
            if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random::<f64>() }
        });
        let coeffs = Array1::from_shape_fn(p, |_| 1.0 - rng.random::<f64>());
        atoms.push(ConstrainedAtom::new(Basis::Matrix(Arc::new(psi)), coeffs, AtomKind::Speech).unwrap());
    }
    let shapes = Arc::new(Array2::from_shape_fn((bins, 6), |_| 1.0 - rng.random::<f64>()));
    for _ in 0..noise {
        let coeffs = Array1::from_shape_fn(6, |_| 1.0 - rng.random::<f64>());
        atoms.push(ConstrainedAtom::new(Basis::Matrix(shapes.clone()), coeffs, AtomKind::Noise).unwrap());
    }
    let dict = CompositeDictionary::new(atoms).unwrap();
    let planted = Array2::from_shape_fn((speech + noise, frames), |_| {
        if rng.random::<f64>() < 0.3 { 0.0 } else { 2.0 * rng.random::<f64>() }
    });
    let clean = dict.realized().dot(&planted);
    let y = clean.mapv(|v| v * (0.5 + rng.random::<f64>()) + 0.01 * rng.random::<f64>());
    (y, dict)
}

/// True when every step of `values` is non-increasing within
/// `1e-9 · (1 + |previous|)`.
pub fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()))
}
