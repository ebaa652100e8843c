//! Time-domain signals: WAV I/O, SNR measurement and SNR-controlled mixing.

use std::io::Cursor;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::files::write_atomic;

/// SNR reported when the estimate matches the reference exactly.
pub const SNR_CAP_DB: f64 = 300.0;

const PCM_SCALE: f64 = 32767.0;

/// A mono signal with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    /// Mean squared sample value.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }
}

/// Reads a 16-bit PCM mono WAV file, scaling samples to [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::NonMono { channels: spec.channels });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding(format!(
            "{:?} {} bits/sample (only 16-bit PCM is supported)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| (v as f64 / PCM_SCALE).clamp(-1.0, 1.0)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wav_err)?;
    Signal::new(samples, spec.sample_rate)
}

/// Encodes a signal as a 16-bit PCM mono WAV byte stream, clipping to [-1, 1].
pub fn wav_bytes(signal: &Signal) -> Result<Vec<u8>> {
    if let Some(i) = signal.samples.iter().position(|x| !x.is_finite()) {
        return Err(invalid(format!("non-finite sample at index {i}")));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + 2 * signal.len()));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(wav_err)?;
        for &x in &signal.samples {
            let q = (x.clamp(-1.0, 1.0) * PCM_SCALE).round() as i16;
            writer.write_sample(q).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)?;
    }
    Ok(buf.into_inner())
}

/// Writes a 16-bit PCM mono WAV file. Samples outside [-1, 1] are clipped.
pub fn write_wav(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &wav_bytes(signal)?)
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported WAV format".into()),
        other => Error::Wav(other.to_string()),
    }
}

/// Output SNR in dB of `estimate` against `reference`, capped at [`SNR_CAP_DB`].
pub fn snr_db(reference: &Signal, estimate: &Signal) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: estimate.len() });
    }
    if reference.sample_rate != estimate.sample_rate {
        return Err(Error::RateMismatch {
            expected: reference.sample_rate,
            actual: estimate.sample_rate,
        });
    }
    let signal = reference.energy();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if error == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SNR_CAP_DB))
}

/// Mixes `noise` into `clean` at `target_snr_db`.
///
/// The noise is truncated to the clean length (keeping its first samples) and
/// scaled so that `10 log10(P_clean / P_noise)` equals the target. Returns the
/// noisy mixture and the scaled noise actually added.
pub fn mix_at_snr(clean: &Signal, noise: &Signal, target_snr_db: f64) -> Result<(Signal, Signal)> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::RateMismatch { expected: clean.sample_rate, actual: noise.sample_rate });
    }
    if clean.is_empty() {
        return Err(Error::ZeroPower("clean signal is empty"));
    }
    if noise.len() < clean.len() {
        return Err(Error::NoiseTooShort { noise: noise.len(), needed: clean.len() });
    }
    if !target_snr_db.is_finite() {
        return Err(invalid("target SNR must be finite"));
    }
    let noise = &noise.samples[..clean.len()];
    let p_clean = clean.power();
    let p_noise = noise.iter().map(|x| x * x).sum::<f64>() / noise.len() as f64;
    if p_clean == 0.0 {
        return Err(Error::ZeroPower("clean signal has zero power"));
    }
    if p_noise == 0.0 {
        return Err(Error::ZeroPower("noise signal has zero power"));
    }
    let gain = (p_clean / (p_noise * 10f64.powf(target_snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = noise.iter().map(|x| gain * x).collect();
    let noisy = clean.samples.iter().zip(&scaled).map(|(c, n)| c + n).collect();
    Ok((
        Signal::new(noisy, clean.sample_rate)?,
        Signal::new(scaled, clean.sample_rate)?,
    ))
}
