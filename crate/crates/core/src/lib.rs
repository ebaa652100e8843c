//! Semi-supervised single-channel speech enhancement with NMF.
//!
//! The noisy magnitude spectrogram is factorized against a dictionary of
//! harmonic speech atoms (Hann-window spectra placed at multiples of a grid of
//! hypothesized fundamentals) and noise atoms spanned by pre-trained noise
//! shapes. Each atom is constrained to its basis, `d_j = Ψ_j a_j`, and fit
//! with KL multiplicative updates. The speech part drives a Wiener gain on
//! the noisy STFT.

pub mod diagnostics;
pub mod dictionary;
pub mod enhance;
pub mod error;
pub mod exec;
mod files;
pub mod nmf;
pub mod signal;
pub mod stft;

pub use error::{Error, Result};
pub use exec::Execution;
pub use files::write_atomic;
pub use signal::{mix_at_snr, read_wav, snr_db, wav_bytes, write_wav, Signal};
pub use stft::{istft, stft, ComplexSpectrogram, FrameParams, MagnitudeSpectrogram};
