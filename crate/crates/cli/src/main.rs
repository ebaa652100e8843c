mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hnmf::diagnostics::{spectrogram_csv, spectrogram_pgm, sweep_csv, trace_csv};
use hnmf::dictionary::NoiseShapes;
use hnmf::enhance::{enhance, enhance_oracle, enhance_plain, magnitude_of, sweep_atoms_sparsity, train_noise, EnhanceConfig};
use hnmf::nmf::Mode;
use hnmf::{mix_at_snr, read_wav, snr_db, write_atomic, write_wav, Error, Execution, Signal};

use config::{parse_list, CliConfig};

/// Minimum noise recording accepted by `train-noise`, in seconds.
const MIN_NOISE_SECS: usize = 2;

#[derive(Parser, Debug)]
#[command(name = "hnmf", version, about = "Speech enhancement with harmonic and trained-noise NMF dictionaries")]
struct Cli {
    /// `key = value` config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["lin", "dense"])]
    mode: Option<String>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Write objective traces and spectrograms next to the outputs.
    #[arg(long, global = true)]
    dump_diagnostics: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn noise shapes from a noise-only recording.
    TrainNoise {
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Output shapes file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Denoise a recording.
    Enhance {
        #[arg(long)]
        noisy: Option<PathBuf>,
        #[arg(long)]
        shapes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mix clean speech with noise at each input SNR and score every method.
    Evaluate {
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        shapes: Option<PathBuf>,
        /// Comma-separated input SNRs in dB; an empty string gives no rows.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<String>,
    },
    /// Output SNR over a grid of fundamental counts and sparsity weights.
    Sweep {
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        shapes: Option<PathBuf>,
        /// Input SNR of the swept mixture in dB.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        input_snr: f64,
        /// Comma-separated fundamental counts L.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated λ_s values.
        #[arg(long)]
        lambdas: Option<String>,
        /// Speech atoms per fundamental (default 5).
        #[arg(long)]
        atoms_per_fundamental: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", format!("{err:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.enhance.seed = seed;
    }
    if let Some(mode) = &cli.mode {
        config.enhance.mode = mode.parse::<Mode>()?;
    }
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    config.enhance.execution = if cli.jobs > 1 { Execution::Parallel } else { Execution::Sequential };
    with_jobs(cli.jobs, || dispatch(cli.command, &config, cli.dump_diagnostics))
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 1 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("starting worker pool")?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T>(_jobs: usize, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f()
}

fn dispatch(command: Command, config: &CliConfig, dump: bool) -> Result<()> {
    match command {
        Command::TrainNoise { noise, out } => {
            let noise = require(noise, &config.noise_wav, "--noise", "noise_wav")?;
            let out = output(out, config.shapes_file.clone(), config, "noise.shapes", "--out")?;
            cmd_train_noise(&noise, &out, config)
        }
        Command::Enhance { noisy, shapes, out } => {
            let noisy = require(noisy, &config.noisy_wav, "--noisy", "noisy_wav")?;
            let shapes = require(shapes, &config.shapes_file, "--shapes", "shapes_file")?;
            let out = output(out, None, config, "enhanced.wav", "--out")?;
            cmd_enhance(&noisy, &shapes, &out, config, dump)
        }
        Command::Evaluate { clean, noise, shapes, snr } => {
            let clean = require(clean, &config.clean_wav, "--clean", "clean_wav")?;
            let noise = require(noise, &config.noise_wav, "--noise", "noise_wav")?;
            let shapes = require(shapes, &config.shapes_file, "--shapes", "shapes_file")?;
            let snrs = match snr {
                Some(list) => parse_list("--snr", &list)?,
                None => config.snr_list.clone(),
            };
            let csv = cmd_evaluate(&clean, &noise, &shapes, config, &snrs)?;
            print!("{csv}");
            Ok(())
        }
        Command::Sweep { clean, noise, shapes, input_snr, grid, lambdas, atoms_per_fundamental, out } => {
            let clean = require(clean, &config.clean_wav, "--clean", "clean_wav")?;
            let noise = require(noise, &config.noise_wav, "--noise", "noise_wav")?;
            let shapes = require(shapes, &config.shapes_file, "--shapes", "shapes_file")?;
            let out = output(out, None, config, "sweep.csv", "--out")?;
            let grid = match grid {
                Some(list) => parse_list("--grid", &list)?,
                None => config.sweep_grid.clone(),
            };
            let lambdas = match lambdas {
                Some(list) => parse_list("--lambdas", &list)?,
                None => config.sweep_lambdas.clone(),
            };
            let mut config = config.clone();
            if let Some(m) = atoms_per_fundamental {
                config.sweep_atoms_per_fundamental = m;
            }
            cmd_sweep(&clean, &noise, &shapes, &out, &config, input_snr, &grid, &lambdas)
        }
    }
}

fn require(flag: Option<PathBuf>, fallback: &Option<PathBuf>, flag_name: &str, key: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .with_context(|| format!("missing input: pass {flag_name} or set {key} in the config"))
}

fn output(flag: Option<PathBuf>, fallback: Option<PathBuf>, config: &CliConfig, name: &str, flag_name: &str) -> Result<PathBuf> {
    flag.or(fallback)
        .or_else(|| config.out_dir.as_ref().map(|d| d.join(name)))
        .with_context(|| format!("missing output: pass {flag_name} or set out_dir in the config"))
}

fn read(path: &Path, sr: u32) -> Result<Signal> {
    let signal = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    if signal.sample_rate != sr {
        return Err(Error::RateMismatch { expected: sr, actual: signal.sample_rate })
            .with_context(|| format!("reading {}", path.display()));
    }
    Ok(signal)
}

fn load_shapes(path: &Path) -> Result<NoiseShapes> {
    NoiseShapes::load(path).with_context(|| format!("loading noise shapes {}", path.display()))
}

fn cmd_train_noise(noise_wav: &Path, out: &Path, config: &CliConfig) -> Result<()> {
    let cfg = &config.enhance;
    let noise = read(noise_wav, cfg.sr)?;
    let needed = MIN_NOISE_SECS * cfg.sr as usize;
    if noise.len() < needed {
        return Err(Error::NoiseTooShort { noise: noise.len(), needed })
            .with_context(|| format!("reading {}", noise_wav.display()));
    }
    let training = train_noise(&noise, cfg)?;
    training.shapes.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!("final_kl = {}", training.final_kl());
    Ok(())
}

fn cmd_enhance(noisy_wav: &Path, shapes_file: &Path, out: &Path, config: &CliConfig, dump: bool) -> Result<()> {
    let cfg = &config.enhance;
    let noisy = read(noisy_wav, cfg.sr)?;
    let shapes = load_shapes(shapes_file)?;
    let result = enhance(&noisy, &shapes, cfg)?;
    write_wav(&result.denoised, out).with_context(|| format!("writing {}", out.display()))?;
    if dump {
        let dir = config
            .out_dir
            .clone()
            .unwrap_or_else(|| out.parent().map(Path::to_path_buf).unwrap_or_default());
        let spectrogram = magnitude_of(&result.denoised, cfg)?;
        for (name, bytes) in [
            ("trace.csv", trace_csv(&result.objective_trace).into_bytes()),
            ("spectrogram.csv", spectrogram_csv(&spectrogram).into_bytes()),
            ("spectrogram.pgm", spectrogram_pgm(&spectrogram)),
        ] {
            let path = dir.join(name);
            write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn cmd_evaluate(clean_wav: &Path, noise_wav: &Path, shapes_file: &Path, config: &CliConfig, snrs: &[f64]) -> Result<String> {
    let cfg = &config.enhance;
    let clean = read(clean_wav, cfg.sr)?;
    let noise = read(noise_wav, cfg.sr)?;
    let shapes = load_shapes(shapes_file)?;
    let mut csv = String::from("method,input_snr_db,output_snr_db\n");
    for &snr in snrs {
        let (noisy, _) = mix_at_snr(&clean, &noise, snr)?;
        let runs = [
            ("lin", enhance(&noisy, &shapes, &EnhanceConfig { mode: Mode::Lin, ..cfg.clone() })?),
            ("dense", enhance(&noisy, &shapes, &EnhanceConfig { mode: Mode::Dense, ..cfg.clone() })?),
            ("plain", enhance_plain(&noisy, &shapes, cfg, cfg.plain_atoms)?),
            ("oracle", enhance_oracle(&noisy, &clean, &shapes, cfg, cfg.oracle_atoms)?),
        ];
        for (method, result) in runs {
            let _ = writeln!(csv, "{method},{snr},{}", snr_db(&clean, &result.denoised)?);
        }
    }
    Ok(csv)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    clean_wav: &Path,
    noise_wav: &Path,
    shapes_file: &Path,
    out: &Path,
    config: &CliConfig,
    input_snr: f64,
    grid: &[usize],
    lambdas: &[f64],
) -> Result<()> {
    let cfg = EnhanceConfig { atoms_per_fundamental: config.sweep_atoms_per_fundamental, ..config.enhance.clone() };
    let clean = read(clean_wav, cfg.sr)?;
    let noise = read(noise_wav, cfg.sr)?;
    let shapes = load_shapes(shapes_file)?;
    let (noisy, _) = mix_at_snr(&clean, &noise, input_snr)?;
    let rows = sweep_atoms_sparsity(&noisy, &clean, &shapes, &cfg, grid, lambdas)?;
    write_atomic(out, sweep_csv(&rows).as_bytes()).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
