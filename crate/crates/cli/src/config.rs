//! `key = value` configuration files.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use hnmf::enhance::EnhanceConfig;

/// Fundamentals tried by `sweep` when none are given.
pub const DEFAULT_SWEEP_GRID: [usize; 8] = [2, 5, 10, 20, 33, 50, 75, 100];
pub const DEFAULT_SWEEP_LAMBDAS: [f64; 3] = [0.2, 0.5, 1.0];
pub const DEFAULT_SNR_LIST: [f64; 4] = [-5.0, 0.0, 5.0, 15.0];
pub const DEFAULT_SWEEP_ATOMS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub enhance: EnhanceConfig,
    pub noise_wav: Option<PathBuf>,
    pub noisy_wav: Option<PathBuf>,
    pub clean_wav: Option<PathBuf>,
    pub shapes_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub snr_list: Vec<f64>,
    pub sweep_grid: Vec<usize>,
    pub sweep_lambdas: Vec<f64>,
    /// Speech atoms per fundamental during `sweep`.
    pub sweep_atoms_per_fundamental: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            enhance: EnhanceConfig::default(),
            noise_wav: None,
            noisy_wav: None,
            clean_wav: None,
            shapes_file: None,
            out_dir: None,
            snr_list: DEFAULT_SNR_LIST.to_vec(),
            sweep_grid: DEFAULT_SWEEP_GRID.to_vec(),
            sweep_lambdas: DEFAULT_SWEEP_LAMBDAS.to_vec(),
            sweep_atoms_per_fundamental: DEFAULT_SWEEP_ATOMS,
        }
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("bad value '{value}' for {key}: {e}"))
}

/// Comma-separated list; blank means empty.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.enhance;
        match key {
            "sr" => e.sr = scalar(key, value)?,
            "window_ms" => e.window_ms = scalar(key, value)?,
            "overlap" => e.overlap = scalar(key, value)?,
            "f_min" => e.f_min = scalar(key, value)?,
            "f_max" => e.f_max = scalar(key, value)?,
            "grid_size" => e.grid_size = scalar(key, value)?,
            "atoms_per_fundamental" => e.atoms_per_fundamental = scalar(key, value)?,
            "p_star" => e.p_star = scalar(key, value)?,
            "noise_rank" => e.noise_rank = scalar(key, value)?,
            "noise_atoms" => e.noise_atoms = scalar(key, value)?,
            "lambda_s" => e.lambda_s = scalar(key, value)?,
            "lambda_n" => e.lambda_n = scalar(key, value)?,
            "alpha" => e.alpha = scalar(key, value)?,
            "iterations" => e.iterations = scalar(key, value)?,
            "mode" => e.mode = scalar(key, value)?,
            "seed" => e.seed = scalar(key, value)?,
            "noise_iterations" => e.noise_iterations = scalar(key, value)?,
            "oracle_atoms" => e.oracle_atoms = scalar(key, value)?,
            "plain_atoms" => e.plain_atoms = scalar(key, value)?,
            "noise_wav" => self.noise_wav = Some(value.into()),
            "noisy_wav" => self.noisy_wav = Some(value.into()),
            "clean_wav" => self.clean_wav = Some(value.into()),
            "shapes_file" => self.shapes_file = Some(value.into()),
            "out_dir" => self.out_dir = Some(value.into()),
            "snr_list" => self.snr_list = parse_list(key, value)?,
            "sweep_grid" => self.sweep_grid = parse_list(key, value)?,
            "sweep_lambdas" => self.sweep_lambdas = parse_list(key, value)?,
            "sweep_atoms_per_fundamental" => self.sweep_atoms_per_fundamental = scalar(key, value)?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected 'key = value'", n + 1);
            };
            self.set(key.trim(), value.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }
}
