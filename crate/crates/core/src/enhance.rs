//! End-to-end enhancement: harmonic + noise atoms, constrained factorization of
//! the noisy magnitude, Wiener filtering of the noisy STFT, and the Oracle and
//! unconstrained-NMF baselines used for comparison.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dictionary::{self, build_noise_bases, build_speech_atoms, FundamentalGrid, NoiseShapes};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_slice, Execution};
use crate::nmf::{self, reconstruct, AtomKind, Basis, CompositeDictionary, ConstrainedAtom, Mode, ObjectiveTerms, SolverSettings, EPSILON};
use crate::signal::{snr_db, Signal};
use crate::stft::{istft_with, stft_with, ComplexSpectrogram, FrameParams, MagnitudeSpectrogram};

const SEED_SPEECH: u64 = 0x5350_4545_4348;
const SEED_NOISE: u64 = 0x004e_4f49_5345;
const SEED_ORACLE: u64 = 0x4f52_4143_4c45;
const SEED_PLAIN: u64 = 0x0050_4c41_494e;

/// Iterations of the unconstrained fit that builds the Oracle speech dictionary.
pub const ORACLE_ITERATIONS: usize = 100;

/// Every pipeline hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceConfig {
    pub sr: u32,
    pub window_ms: f64,
    pub overlap: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Number of hypothesized fundamentals `L`.
    pub grid_size: usize,
    /// Speech atoms per fundamental `m`.
    pub atoms_per_fundamental: usize,
    /// Harmonic cap `p*`.
    pub p_star: usize,
    /// Noise shapes `r`.
    pub noise_rank: usize,
    /// Noise atoms `m_n`.
    pub noise_atoms: usize,
    pub lambda_s: f64,
    pub lambda_n: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Iterations of the unconstrained noise-shape fit.
    pub noise_iterations: usize,
    /// Speech dictionary size of the Oracle baseline.
    pub oracle_atoms: usize,
    /// Free speech columns of the unconstrained-NMF baseline.
    pub plain_atoms: usize,
    pub execution: Execution,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            sr: 8000,
            window_ms: 32.0,
            overlap: 0.75,
            f_min: 80.0,
            f_max: 400.0,
            grid_size: 33,
            atoms_per_fundamental: 4,
            p_star: 30,
            noise_rank: 16,
            noise_atoms: 16,
            lambda_s: 0.2,
            lambda_n: 0.0,
            alpha: 10.0,
            iterations: 25,
            mode: Mode::Dense,
            seed: 0,
            noise_iterations: 100,
            oracle_atoms: 32,
            plain_atoms: 132,
            execution: Execution::default(),
        }
    }
}

impl EnhanceConfig {
    pub fn frame_params(&self) -> Result<FrameParams> {
        FrameParams::from_duration(self.sr, self.window_ms, self.overlap)
    }

    pub fn grid(&self) -> Result<FundamentalGrid> {
        FundamentalGrid::new(self.f_min, self.f_max, self.grid_size, self.sr)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            lambda_speech: self.lambda_s,
            lambda_noise: self.lambda_n,
            alpha: self.alpha,
            iterations: self.iterations,
            seed: self.seed,
            frozen_dictionary: false,
            execution: self.execution,
        }
    }

    /// `L · m`
    pub fn speech_atom_count(&self) -> usize {
        self.grid_size * self.atoms_per_fundamental
    }

    pub fn validate(&self) -> Result<()> {
        self.frame_params()?;
        self.grid()?;
        self.solver_settings().validate()?;
        for (name, v) in [
            ("m", self.atoms_per_fundamental),
            ("p_star", self.p_star),
            ("r", self.noise_rank),
            ("m_n", self.noise_atoms),
            ("noise_iterations", self.noise_iterations),
            ("oracle_atoms", self.oracle_atoms),
            ("plain_atoms", self.plain_atoms),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if self.mode == Mode::Plain {
            return Err(invalid("enhancement mode must be lin or dense"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnhanceResult {
    pub denoised: Signal,
    /// `D_s X_s`
    pub speech_magnitude: MagnitudeSpectrogram,
    /// `D_n X_n`
    pub noise_magnitude: MagnitudeSpectrogram,
    pub objective_trace: Vec<ObjectiveTerms>,
    pub speech_atoms: usize,
    pub noise_atoms: usize,
}

/// Scales each noisy bin by `G = speech / max(total, ε)`, clamped to [0, 1].
pub fn wiener_reconstruct(
    noisy: &ComplexSpectrogram,
    speech_mag: &MagnitudeSpectrogram,
    total_mag: &MagnitudeSpectrogram,
) -> Result<ComplexSpectrogram> {
    if noisy.values.dim() != speech_mag.values.dim() || noisy.values.dim() != total_mag.values.dim() {
        return Err(Error::ShapeMismatch(format!(
            "noisy {:?}, speech {:?}, total {:?}",
            noisy.values.dim(),
            speech_mag.values.dim(),
            total_mag.values.dim()
        )));
    }
    let mut values = noisy.values.clone();
    ndarray::Zip::from(&mut values)
        .and(&speech_mag.values)
        .and(&total_mag.values)
        .for_each(|c, s, t| {
            let gain = (s / t.max(EPSILON)).clamp(0.0, 1.0);
            *c *= gain;
        });
    Ok(ComplexSpectrogram { values, params: noisy.params })
}

fn analyse(noisy: &Signal, shapes: &NoiseShapes, config: &EnhanceConfig) -> Result<(FrameParams, ComplexSpectrogram)> {
    config.validate()?;
    if noisy.sample_rate != config.sr {
        return Err(Error::RateMismatch { expected: config.sr, actual: noisy.sample_rate });
    }
    let params = config.frame_params()?;
    shapes.check_params(&params)?;
    let spec = stft_with(noisy, &params, config.execution)?;
    Ok((params, spec))
}

fn noise_atoms(shapes: &NoiseShapes, config: &EnhanceConfig) -> Result<Vec<ConstrainedAtom>> {
    build_noise_bases(shapes, config.noise_atoms, config.seed ^ SEED_NOISE)
}

/// Builds the `L·m` harmonic atoms followed by the `m_n` noise atoms.
pub fn build_dictionary(shapes: &NoiseShapes, config: &EnhanceConfig) -> Result<CompositeDictionary> {
    let params = config.frame_params()?;
    shapes.check_params(&params)?;
    let mut atoms = build_speech_atoms(
        &config.grid()?,
        config.atoms_per_fundamental,
        &params,
        config.p_star,
        config.seed ^ SEED_SPEECH,
        config.execution,
    )?;
    atoms.extend(noise_atoms(shapes, config)?);
    CompositeDictionary::new(atoms)
}

fn factorize(
    noisy: &Signal,
    spec: &ComplexSpectrogram,
    dict: CompositeDictionary,
    settings: &SolverSettings,
    mode: Mode,
) -> Result<EnhanceResult> {
    let params = spec.params;
    let y = spec.magnitude().values;
    let out = nmf::solve(&y, dict, settings, mode)?;
    let ms = out.dictionary.speech_count();
    let d = out.dictionary.realized();
    let x = &out.gains;
    let exec = settings.execution;
    let speech = reconstruct(d.slice(s![.., ..ms]), x.slice(s![..ms, ..]), exec);
    let noise = reconstruct(d.slice(s![.., ms..]), x.slice(s![ms.., ..]), exec);
    let total = &speech + &noise;

    let speech_magnitude = MagnitudeSpectrogram { values: speech, params };
    let noise_magnitude = MagnitudeSpectrogram { values: noise, params };
    let filtered = wiener_reconstruct(spec, &speech_magnitude, &MagnitudeSpectrogram { values: total, params })?;
    let mut samples = istft_with(&filtered, exec)?.samples;
    samples.resize(noisy.len(), 0.0);
    Ok(EnhanceResult {
        denoised: Signal::new(samples, noisy.sample_rate)?,
        speech_magnitude,
        noise_magnitude,
        objective_trace: out.trace,
        speech_atoms: ms,
        noise_atoms: out.dictionary.noise_count(),
    })
}

/// Enhances `noisy` with harmonic speech atoms and trained noise shapes,
/// solving in `config.mode`.
pub fn enhance(noisy: &Signal, shapes: &NoiseShapes, config: &EnhanceConfig) -> Result<EnhanceResult> {
    let (_, spec) = analyse(noisy, shapes, config)?;
    let dict = build_dictionary(shapes, config)?;
    factorize(noisy, &spec, dict, &config.solver_settings(), config.mode)
}

/// Oracle baseline: the speech dictionary is an unconstrained fit of the clean
/// magnitude; speech and noise dictionaries stay frozen and only gains adapt.
pub fn enhance_oracle(
    noisy: &Signal,
    clean: &Signal,
    shapes: &NoiseShapes,
    config: &EnhanceConfig,
    oracle_atoms: usize,
) -> Result<EnhanceResult> {
    if clean.len() != noisy.len() {
        return Err(Error::LengthMismatch { left: clean.len(), right: noisy.len() });
    }
    if clean.sample_rate != noisy.sample_rate {
        return Err(Error::RateMismatch { expected: noisy.sample_rate, actual: clean.sample_rate });
    }
    if oracle_atoms == 0 {
        return Err(invalid("oracle needs at least one atom"));
    }
    let (params, spec) = analyse(noisy, shapes, config)?;
    let clean_mag = stft_with(clean, &params, config.execution)?.magnitude();
    if clean_mag.values.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("clean spectrogram is all zero"));
    }
    let bins = params.bins();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SEED_ORACLE);
    let free = (0..oracle_atoms)
        .map(|_| free_atom(bins, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let fit_settings = SolverSettings {
        lambda_speech: 0.0,
        lambda_noise: 0.0,
        alpha: 0.0,
        iterations: ORACLE_ITERATIONS,
        seed: config.seed ^ SEED_ORACLE,
        frozen_dictionary: false,
        execution: config.execution,
    };
    let fitted = nmf::solve(&clean_mag.values, CompositeDictionary::new(free)?, &fit_settings, Mode::Plain)?;

    let mut atoms = fitted.dictionary.into_atoms();
    atoms.extend(noise_atoms(shapes, config)?);
    let settings = SolverSettings { frozen_dictionary: true, ..config.solver_settings() };
    factorize(noisy, &spec, CompositeDictionary::new(atoms)?, &settings, Mode::Lin)
}

/// Unconstrained-NMF baseline: `free_atoms` free speech columns alongside the
/// noise atoms.
pub fn enhance_plain(noisy: &Signal, shapes: &NoiseShapes, config: &EnhanceConfig, free_atoms: usize) -> Result<EnhanceResult> {
    if free_atoms == 0 {
        return Err(invalid("plain baseline needs at least one speech atom"));
    }
    let (params, spec) = analyse(noisy, shapes, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SEED_PLAIN);
    let mut atoms = (0..free_atoms)
        .map(|_| free_atom(params.bins(), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    atoms.extend(noise_atoms(shapes, config)?);
    factorize(noisy, &spec, CompositeDictionary::new(atoms)?, &config.solver_settings(), Mode::Plain)
}

fn free_atom(bins: usize, rng: &mut ChaCha8Rng) -> Result<ConstrainedAtom> {
    let d = Array1::from_shape_fn(bins, |_| 1.0 - rng.random::<f64>());
    ConstrainedAtom::new(Basis::Identity(bins), d, AtomKind::Speech)
}

/// One cell of the atoms-versus-sparsity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub grid_size: usize,
    pub lambda_s: f64,
    pub total_atoms: usize,
    pub output_snr_db: f64,
}

/// Dense-mode enhancement for every `(L, λ_s)` pair, scored against `clean`.
/// Rows are ordered by `L`, then `λ_s`.
pub fn sweep_atoms_sparsity(
    noisy: &Signal,
    clean: &Signal,
    shapes: &NoiseShapes,
    config: &EnhanceConfig,
    grid_sizes: &[usize],
    lambdas: &[f64],
) -> Result<Vec<SweepRow>> {
    if clean.len() != noisy.len() {
        return Err(Error::LengthMismatch { left: clean.len(), right: noisy.len() });
    }
    let mut cells: Vec<(usize, f64)> =
        grid_sizes.iter().flat_map(|&l| lambdas.iter().map(move |&lam| (l, lam))).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // parallelism goes to the cells; each solver runs sequentially
    let inner = if config.execution.is_parallel() && cells.len() > 1 {
        Execution::Sequential
    } else {
        config.execution
    };
    map_slice(config.execution, &cells, |&(l, lam)| {
        let cell = EnhanceConfig {
            grid_size: l,
            lambda_s: lam,
            mode: Mode::Dense,
            execution: inner,
            ..config.clone()
        };
        let result = enhance(noisy, shapes, &cell)?;
        Ok(SweepRow {
            grid_size: l,
            lambda_s: lam,
            total_atoms: result.speech_atoms,
            output_snr_db: snr_db(clean, &result.denoised)?,
        })
    })
    .into_iter()
    .collect()
}

/// Trains noise shapes from a noise-only recording with the config's frame
/// geometry, rank and seed.
pub fn train_noise(noise: &Signal, config: &EnhanceConfig) -> Result<dictionary::NoiseTraining> {
    if noise.sample_rate != config.sr {
        return Err(Error::RateMismatch { expected: config.sr, actual: noise.sample_rate });
    }
    let params = config.frame_params()?;
    let mag = stft_with(noise, &params, config.execution)?.magnitude();
    dictionary::train_noise_model(&mag, config.noise_rank, config.noise_iterations, config.seed, config.execution)
}

/// Magnitude of the STFT of `signal` under the config's frame geometry.
pub fn magnitude_of(signal: &Signal, config: &EnhanceConfig) -> Result<Array2<f64>> {
    let params = config.frame_params()?;
    Ok(stft_with(signal, &params, config.execution)?.magnitude().values)
}
