//! Constrained atom bases: harmonic atoms from a grid of hypothesized
//! fundamentals, and noise atoms spanned by trained noise shapes.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::exec::{map_slice, Execution};
use crate::files::write_atomic;
use crate::nmf::{self, AtomKind, Basis, CompositeDictionary, ConstrainedAtom, Mode, ObjectiveTerms, SolverSettings};
use crate::stft::{FrameParams, MagnitudeSpectrogram, WindowSpectrum};

/// Entries below this fraction of their column peak are zeroed.
pub const ATOM_TRUNCATION: f64 = 1e-4;
/// Floor on harmonic amplitudes at exact sinc zeros.
pub const AMPLITUDE_FLOOR: f64 = 1e-8;
/// Oversampling factor of the window spectrum used to place harmonics.
pub const WINDOW_OVERSAMPLE: usize = 8;

/// Equally spaced fundamental hypotheses in Hz, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalGrid {
    pub frequencies: Vec<f64>,
    pub bounds: (f64, f64),
}

impl FundamentalGrid {
    pub fn new(f_min: f64, f_max: f64, count: usize, sample_rate: u32) -> Result<Self> {
        if !(f_min > 0.0 && f_min < f_max && f_max < sample_rate as f64 / 2.0) {
            return Err(invalid(format!(
                "fundamental bounds must satisfy 0 < {f_min} < {f_max} < {}",
                sample_rate as f64 / 2.0
            )));
        }
        if count < 2 {
            return Err(invalid(format!("grid needs at least 2 points, got {count}")));
        }
        let step = (f_max - f_min) / (count - 1) as f64;
        let mut frequencies: Vec<f64> = (0..count).map(|i| f_min + step * i as f64).collect();
        frequencies[count - 1] = f_max;
        Ok(Self { frequencies, bounds: (f_min, f_max) })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

pub fn fundamental_grid(f_min: f64, f_max: f64, count: usize, sample_rate: u32) -> Result<FundamentalGrid> {
    FundamentalGrid::new(f_min, f_max, count, sample_rate)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `c_k = sinc²(k ω̄ / 2)` for `k = 1..=p`, with `ω̄` in rad/sample.
pub fn harmonic_amplitudes(fundamental: f64, p: usize) -> Result<Vec<f64>> {
    if !(fundamental > 0.0 && fundamental < PI) {
        return Err(invalid(format!("fundamental {fundamental} rad/sample must lie in (0, π)")));
    }
    if p == 0 {
        return Err(invalid("need at least one harmonic"));
    }
    Ok((1..=p)
        .map(|k| sinc(k as f64 * fundamental / 2.0).powi(2).max(AMPLITUDE_FLOOR))
        .collect())
}

/// `min(p*, ⌊sr / 2f⌋)`
pub fn harmonic_count(fundamental_hz: f64, sample_rate: u32, p_star: usize) -> usize {
    let limit = (sample_rate as f64 / (2.0 * fundamental_hz)).floor();
    if limit.is_finite() && limit >= 0.0 {
        p_star.min(limit as usize)
    } else {
        p_star
    }
}

/// Basis `Ψ = W C` of every harmonic atom sharing one fundamental.
#[derive(Debug, Clone)]
pub struct HarmonicAtomBasis {
    /// K×p, column `k-1` holds harmonic `k`.
    pub psi: Arc<Array2<f64>>,
    /// rad/sample
    pub fundamental: f64,
    pub fundamental_hz: f64,
    pub harmonic_count: usize,
}

pub fn build_harmonic_basis(
    fundamental_hz: f64,
    params: &FrameParams,
    p_star: usize,
    window: &WindowSpectrum,
) -> Result<HarmonicAtomBasis> {
    let sr = params.sample_rate as f64;
    if !(fundamental_hz > 0.0 && fundamental_hz < sr / 2.0) {
        return Err(invalid(format!("fundamental {fundamental_hz} Hz outside (0, {})", sr / 2.0)));
    }
    let p = harmonic_count(fundamental_hz, params.sample_rate, p_star);
    if p == 0 {
        return Err(invalid(format!("no harmonics fit below Nyquist for {fundamental_hz} Hz")));
    }
    let fundamental = 2.0 * PI * fundamental_hz / sr;
    let amps = harmonic_amplitudes(fundamental, p)?;
    let bins = params.bins();
    let mut psi = Array2::zeros((bins, p));
    for (k, (mut col, c)) in psi.columns_mut().into_iter().zip(&amps).enumerate() {
        let centre = (k + 1) as f64 * fundamental;
        for (i, v) in col.iter_mut().enumerate() {
            *v = c * window.eval(params.bin_omega(i) - centre);
        }
        let peak = col.iter().cloned().fold(0.0, f64::max);
        col.mapv_inplace(|v| if v < ATOM_TRUNCATION * peak { 0.0 } else { v });
    }
    Ok(HarmonicAtomBasis { psi: Arc::new(psi), fundamental, fundamental_hz, harmonic_count: p })
}

/// `m` speech atoms per grid fundamental, each with its own near-uniform
/// coefficients `a ~ U(1/p − 0.001, 1/p + 0.001)`.
pub fn build_speech_atoms(
    grid: &FundamentalGrid,
    per_fundamental: usize,
    params: &FrameParams,
    p_star: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ConstrainedAtom>> {
    if per_fundamental == 0 {
        return Err(invalid("atoms per fundamental must be at least 1"));
    }
    let window = WindowSpectrum::new(params, WINDOW_OVERSAMPLE)?;
    let bases = map_slice(exec, &grid.frequencies, |&f| build_harmonic_basis(f, params, p_star, &window))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = Vec::with_capacity(bases.len() * per_fundamental);
    for basis in &bases {
        let p = basis.harmonic_count;
        let centre = 1.0 / p as f64;
        for _ in 0..per_fundamental {
            let coeffs = Array1::from_shape_fn(p, |_| {
                let v = centre + rng.random_range(-0.001..0.001);
                v.max(f64::MIN_POSITIVE)
            });
            atoms.push(ConstrainedAtom::new(Basis::Matrix(basis.psi.clone()), coeffs, AtomKind::Speech)?);
        }
    }
    Ok(atoms)
}

/// Trained noise spectral shapes `N` (K×r, unit-l1 columns) with the frame
/// geometry they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseShapes {
    pub n_matrix: Array2<f64>,
    pub sample_rate: f64,
    pub window_len: usize,
    pub hop: usize,
}

const SHAPES_MAGIC: &[u8; 4] = b"NSHP";
const SHAPES_HEADER: usize = 4 + 4 + 4 + 8 + 4 + 4;

impl NoiseShapes {
    pub fn bins(&self) -> usize {
        self.n_matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.n_matrix.ncols()
    }

    /// Errors unless the shapes were trained with the same frame geometry.
    pub fn check_params(&self, params: &FrameParams) -> Result<()> {
        if self.bins() != params.bins()
            || self.window_len != params.window_len
            || self.hop != params.hop
            || self.sample_rate != params.sample_rate as f64
        {
            return Err(Error::ShapeMismatch(format!(
                "noise shapes trained for K={}, window={}, hop={}, sr={} but enhancement uses K={}, window={}, hop={}, sr={}",
                self.bins(),
                self.window_len,
                self.hop,
                self.sample_rate,
                params.bins(),
                params.window_len,
                params.hop,
                params.sample_rate
            )));
        }
        Ok(())
    }

    /// Little-endian: magic, u32 K, u32 r, f64 sr, u32 window, u32 hop, then
    /// K·r f64 values column-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (k, r) = self.n_matrix.dim();
        let mut out = Vec::with_capacity(SHAPES_HEADER + 8 * k * r);
        out.extend_from_slice(SHAPES_MAGIC);
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&(r as u32).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.window_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.hop as u32).to_le_bytes());
        for col in self.n_matrix.columns() {
            for v in col {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::BadShapesFile(m.to_string());
        if bytes.len() < SHAPES_HEADER {
            return Err(bad("truncated header"));
        }
        if &bytes[..4] != SHAPES_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let k = u32_at(4);
        let r = u32_at(8);
        let sample_rate = f64_at(12);
        let window_len = u32_at(20);
        let hop = u32_at(24);
        let expected = k
            .checked_mul(r)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(SHAPES_HEADER))
            .ok_or_else(|| bad("size overflow"))?;
        if bytes.len() != expected {
            return Err(Error::BadShapesFile(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        if k == 0 || r == 0 {
            return Err(bad("empty shape matrix"));
        }
        let mut n_matrix = Array2::zeros((k, r));
        for j in 0..r {
            for i in 0..k {
                let v = f64_at(SHAPES_HEADER + 8 * (j * k + i));
                if !v.is_finite() || v < 0.0 {
                    return Err(bad("negative or non-finite shape value"));
                }
                n_matrix[[i, j]] = v;
            }
        }
        Ok(Self { n_matrix, sample_rate, window_len, hop })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Noise shapes plus the objective trace of the unconstrained fit.
#[derive(Debug, Clone)]
pub struct NoiseTraining {
    pub shapes: NoiseShapes,
    /// Gains rescaled so that `shapes.n_matrix · gains` is the fitted spectrogram.
    pub gains: Array2<f64>,
    pub trace: Vec<ObjectiveTerms>,
}

impl NoiseTraining {
    pub fn final_kl(&self) -> f64 {
        self.trace.last().map(|t| t.kl).unwrap_or(f64::NAN)
    }
}

pub fn train_noise_shapes(noise_mag: &MagnitudeSpectrogram, r: usize, iterations: usize, seed: u64) -> Result<NoiseShapes> {
    train_noise_model(noise_mag, r, iterations, seed, Execution::default()).map(|t| t.shapes)
}

/// Plain KL-NMF (no sparsity) of a noise-only spectrogram; the dictionary
/// columns, l1-normalized, become the noise shapes.
pub fn train_noise_model(
    noise_mag: &MagnitudeSpectrogram,
    r: usize,
    iterations: usize,
    seed: u64,
    exec: Execution,
) -> Result<NoiseTraining> {
    if r == 0 {
        return Err(invalid("need at least one noise shape"));
    }
    if noise_mag.frames() < r {
        return Err(invalid(format!("{} noise frames cannot train {r} shapes", noise_mag.frames())));
    }
    if noise_mag.values.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("noise spectrogram is all zero"));
    }
    let bins = noise_mag.bins();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_655f_6431);
    let atoms = (0..r)
        .map(|_| {
            let d = Array1::from_shape_fn(bins, |_| 1.0 - rng.random::<f64>());
            ConstrainedAtom::new(Basis::Identity(bins), d, AtomKind::Noise)
        })
        .collect::<Result<Vec<_>>>()?;
    let settings = SolverSettings {
        lambda_speech: 0.0,
        lambda_noise: 0.0,
        alpha: 0.0,
        iterations,
        seed,
        frozen_dictionary: false,
        execution: exec,
    };
    let out = nmf::solve(&noise_mag.values, CompositeDictionary::new(atoms)?, &settings, Mode::Plain)?;
    let mut n_matrix = out.dictionary.realized().clone();
    let mut gains = out.gains;
    for (mut col, mut row) in n_matrix.columns_mut().into_iter().zip(gains.rows_mut()) {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
            row *= s;
        } else {
            col.fill(1.0 / bins as f64);
            row.fill(0.0);
        }
    }
    let params = noise_mag.params;
    Ok(NoiseTraining {
        shapes: NoiseShapes {
            n_matrix,
            sample_rate: params.sample_rate as f64,
            window_len: params.window_len,
            hop: params.hop,
        },
        gains,
        trace: out.trace,
    })
}

/// `m_n` noise atoms `d_j = N b_j` sharing the basis `N`.
///
/// With `m_n = r` the coefficients start at `e_j + U(0, 0.01]`, so atom `j`
/// begins near shape `j`; otherwise they are drawn from `U(0, 1]`.
pub fn build_noise_bases(shapes: &NoiseShapes, m_n: usize, seed: u64) -> Result<Vec<ConstrainedAtom>> {
    if m_n == 0 {
        return Err(invalid("need at least one noise atom"));
    }
    let r = shapes.rank();
    let basis = Arc::new(shapes.n_matrix.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m_n)
        .map(|j| {
            let coeffs = Array1::from_shape_fn(r, |k| {
                let u = 1.0 - rng.random::<f64>();
                if m_n == r {
                    f64::from(u8::from(k == j)) + 0.01 * u
                } else {
                    u
                }
            });
            ConstrainedAtom::new(Basis::Matrix(basis.clone()), coeffs, AtomKind::Noise)
        })
        .collect()
}
