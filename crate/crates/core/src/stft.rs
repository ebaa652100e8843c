//! Hann-windowed short-time Fourier analysis and weighted overlap-add synthesis.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::exec::{map_range, Execution};
use crate::signal::Signal;

const SYNTHESIS_FLOOR: f64 = 1e-12;
/// Overlap-add normalization never divides by less than this fraction of the
/// peak summed squared window. Only the partially covered edges fall below it;
/// there, filtered frames would otherwise be amplified without bound.
const SYNTHESIS_RELATIVE_FLOOR: f64 = 0.1;

/// Frame geometry shared by analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameParams {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub sample_rate: u32,
}

impl FrameParams {
    pub fn new(window_len: usize, hop: usize, fft_len: usize, sample_rate: u32) -> Result<Self> {
        if window_len < 2 {
            return Err(invalid("window length must be at least 2"));
        }
        if hop == 0 || hop > window_len {
            return Err(invalid(format!("hop {hop} must lie in 1..={window_len}")));
        }
        if fft_len < window_len {
            return Err(invalid("fft length must be at least the window length"));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        Ok(Self { window_len, hop, fft_len, sample_rate })
    }

    /// Window of `window_ms` milliseconds with fractional `overlap`, unpadded FFT.
    pub fn from_duration(sample_rate: u32, window_ms: f64, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(invalid(format!("overlap {overlap} must lie in [0, 1)")));
        }
        let window_len = (sample_rate as f64 * window_ms / 1000.0).round() as usize;
        let hop = ((window_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
        Self::new(window_len, hop, window_len, sample_rate)
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    /// Angular frequency (rad/sample) of bin `i`.
    pub fn bin_omega(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.fft_len as f64
    }
}

/// K×T one-sided complex STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub values: Array2<Complex64>,
    pub params: FrameParams,
}

/// K×T non-negative magnitude spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    pub values: Array2<f64>,
    pub params: FrameParams,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn magnitude(&self) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram { values: self.values.mapv(|c| c.norm()), params: self.params }
    }
}

impl MagnitudeSpectrogram {
    pub fn new(values: Array2<f64>, params: FrameParams) -> Result<Self> {
        if values.nrows() != params.bins() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} bins",
                values.nrows(),
                params.bins()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("magnitudes must be finite and non-negative"));
        }
        Ok(Self { values, params })
    }

    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Symmetric Hann window, `w[t] = 0.5 - 0.5 cos(2πt/(n-1))`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid("hann window needs at least 2 samples"));
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / denom).cos()).collect())
}

pub fn stft(signal: &Signal, params: &FrameParams) -> Result<ComplexSpectrogram> {
    stft_with(signal, params, Execution::default())
}

/// STFT with an explicit execution mode. Frames are independent, so both modes
/// return identical spectrograms.
pub fn stft_with(signal: &Signal, params: &FrameParams, exec: Execution) -> Result<ComplexSpectrogram> {
    if signal.sample_rate != params.sample_rate {
        return Err(Error::RateMismatch { expected: params.sample_rate, actual: signal.sample_rate });
    }
    if signal.len() < params.window_len {
        return Err(Error::SignalTooShort { len: signal.len(), needed: params.window_len });
    }
    let window = hann_window(params.window_len)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.fft_len);
    let frames = params.frame_count(signal.len());
    let bins = params.bins();

    let columns = map_range(exec, frames, |l| {
        let start = l * params.hop;
        let mut buf = vec![Complex64::new(0.0, 0.0); params.fft_len];
        for (t, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            *b = Complex64::new(signal.samples[start + t] * w, 0.0);
        }
        fft.process(&mut buf);
        buf.truncate(bins);
        buf
    });

    let mut values = Array2::zeros((bins, frames));
    for (l, col) in columns.into_iter().enumerate() {
        for (i, c) in col.into_iter().enumerate() {
            values[[i, l]] = c;
        }
    }
    Ok(ComplexSpectrogram { values, params: *params })
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Signal> {
    istft_with(spec, Execution::default())
}

/// Weighted overlap-add synthesis normalized by the (floored) summed squared
/// window.
/// Output length is `(T - 1) * hop + window_len`.
pub fn istft_with(spec: &ComplexSpectrogram, exec: Execution) -> Result<Signal> {
    let p = spec.params;
    let p = FrameParams::new(p.window_len, p.hop, p.fft_len, p.sample_rate)?;
    if spec.bins() != p.bins() {
        return Err(Error::ShapeMismatch(format!("{} bins for fft length {}", spec.bins(), p.fft_len)));
    }
    let frames = spec.frames();
    if frames == 0 {
        return Err(Error::Degenerate("spectrogram has no frames"));
    }
    let window = hann_window(p.window_len)?;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(p.fft_len);
    let bins = p.bins();
    let scale = 1.0 / p.fft_len as f64;

    let blocks = map_range(exec, frames, |l| {
        let mut buf = vec![Complex64::new(0.0, 0.0); p.fft_len];
        for i in 0..bins {
            buf[i] = spec.values[[i, l]];
        }
        for i in bins..p.fft_len {
            buf[i] = spec.values[[p.fft_len - i, l]].conj();
        }
        // DC and Nyquist must be real for a real frame.
        buf[0].im = 0.0;
        if p.fft_len % 2 == 0 {
            buf[p.fft_len / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        buf.iter().zip(&window).map(|(c, w)| c.re * scale * w).collect::<Vec<f64>>()
    });

    let len = (frames - 1) * p.hop + p.window_len;
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    for (l, block) in blocks.iter().enumerate() {
        let start = l * p.hop;
        for (t, (v, w)) in block.iter().zip(&window).enumerate() {
            out[start + t] += v;
            norm[start + t] += w * w;
        }
    }
    let peak = norm.iter().cloned().fold(0.0, f64::max);
    let floor = (SYNTHESIS_RELATIVE_FLOOR * peak).max(SYNTHESIS_FLOOR);
    for (o, n) in out.iter_mut().zip(&norm) {
        *o /= n.max(floor);
    }
    Signal::new(out, p.sample_rate)
}

/// Oversampled magnitude spectrum of the Hann analysis window, scaled to unit
/// peak and evaluated by linear interpolation at arbitrary angular offsets.
#[derive(Debug, Clone)]
pub struct WindowSpectrum {
    mags: Vec<f64>,
}

impl WindowSpectrum {
    pub fn new(params: &FrameParams, oversample: usize) -> Result<Self> {
        if oversample < 4 {
            return Err(invalid(format!("oversample {oversample} must be at least 4")));
        }
        let window = hann_window(params.window_len)?;
        let n = oversample * params.fft_len;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (b, w) in buf.iter_mut().zip(&window) {
            b.re = *w;
        }
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        let peak = buf[0].norm();
        let mags = buf.iter().map(|c| c.norm() / peak).collect();
        Ok(Self { mags })
    }

    /// `|ŵ(ω)|` for `ω` in rad/sample (2π-periodic, even).
    pub fn eval(&self, omega: f64) -> f64 {
        let n = self.mags.len();
        let pos = omega.abs().rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let a = self.mags[i % n];
        let b = self.mags[(i + 1) % n];
        a + frac * (b - a)
    }

    pub fn peak(&self) -> f64 {
        self.mags[0]
    }
}
