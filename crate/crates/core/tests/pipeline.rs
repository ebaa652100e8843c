mod common;

use common::{harmonic_signal, non_increasing, white_noise};
use hnmf::dictionary::NoiseShapes;
use hnmf::enhance::{enhance, enhance_oracle, enhance_plain, sweep_atoms_sparsity, train_noise, EnhanceConfig};
use hnmf::nmf::Mode;
use hnmf::{mix_at_snr, snr_db, wav_bytes, Error, Execution, Signal};
use std::sync::OnceLock;

fn shapes() -> &'static NoiseShapes {
    static SHAPES: OnceLock<NoiseShapes> = OnceLock::new();
    SHAPES.get_or_init(|| train_noise(&white_noise(4.0, 0.1, 1), &EnhanceConfig::default()).unwrap().shapes)
}

fn short_config() -> EnhanceConfig {
    EnhanceConfig { iterations: 10, ..Default::default() }
}

#[test]
fn dictionary_has_expected_columns() {
    let clean = harmonic_signal(150.0, 8, 1.0);
    let noise = white_noise(1.0, 0.1, 2);
    let (noisy, _) = mix_at_snr(&clean, &noise, 5.0).unwrap();
    let out = enhance(&noisy, shapes(), &EnhanceConfig { iterations: 1, ..Default::default() }).unwrap();
    assert_eq!(out.speech_atoms, 132);
    assert_eq!(out.noise_atoms, 16);
    assert_eq!(out.speech_magnitude.values.dim(), (129, out.noise_magnitude.frames()));
}

#[test]
fn output_length_matches_input_for_every_method() {
    let clean = harmonic_signal(200.0, 6, 0.77);
    let noise = white_noise(0.77, 0.1, 3);
    let (noisy, _) = mix_at_snr(&clean, &noise, 0.0).unwrap();
    let cfg = short_config();
    for out in [
        enhance(&noisy, shapes(), &EnhanceConfig { mode: Mode::Lin, ..cfg.clone() }).unwrap(),
        enhance(&noisy, shapes(), &cfg).unwrap(),
        enhance_plain(&noisy, shapes(), &cfg, 40).unwrap(),
        enhance_oracle(&noisy, &clean, shapes(), &cfg, 8).unwrap(),
    ] {
        assert_eq!(out.denoised.len(), noisy.len());
        assert_eq!(out.objective_trace.len(), cfg.iterations + 1);
        let totals: Vec<f64> = out.objective_trace.iter().map(|t| t.total).collect();
        assert!(non_increasing(&totals));
        assert!(out.denoised.samples.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn oracle_on_clean_input_is_near_transparent() {
    let clean = harmonic_signal(130.0, 10, 1.5);
    let out = enhance_oracle(&clean, &clean, shapes(), &EnhanceConfig::default(), 32).unwrap();
    let snr = snr_db(&clean, &out.denoised).unwrap();
    assert!(snr >= 20.0, "{snr}");
}

#[test]
fn noise_only_input_is_suppressed() {
    let noise = white_noise(1.5, 0.1, 9);
    let out = enhance(&noise, shapes(), &EnhanceConfig::default()).unwrap();
    let ratio = out.denoised.energy() / noise.energy();
    assert!(ratio <= 0.1, "{ratio}");
}

#[test]
fn reruns_are_byte_identical() {
    let clean = harmonic_signal(110.0, 10, 1.0);
    let (noisy, _) = mix_at_snr(&clean, &white_noise(1.0, 0.1, 4), 0.0).unwrap();
    let cfg = EnhanceConfig { seed: 17, ..short_config() };
    let a = wav_bytes(&enhance(&noisy, shapes(), &cfg).unwrap().denoised).unwrap();
    let b = wav_bytes(&enhance(&noisy, shapes(), &cfg).unwrap().denoised).unwrap();
    assert_eq!(a, b);
    let seq = EnhanceConfig { execution: Execution::Sequential, ..cfg };
    let c = wav_bytes(&enhance(&noisy, shapes(), &seq).unwrap().denoised).unwrap();
    assert_eq!(a, c);
}

#[test]
fn sweep_cell_equals_direct_call() {
    let clean = harmonic_signal(180.0, 8, 1.0);
    let (noisy, _) = mix_at_snr(&clean, &white_noise(1.0, 0.1, 5), 0.0).unwrap();
    let cfg = EnhanceConfig { atoms_per_fundamental: 2, ..short_config() };
    let rows = sweep_atoms_sparsity(&noisy, &clean, shapes(), &cfg, &[7, 3], &[0.5, 0.2]).unwrap();
    let order: Vec<(usize, f64)> = rows.iter().map(|r| (r.grid_size, r.lambda_s)).collect();
    assert_eq!(order, vec![(3, 0.2), (3, 0.5), (7, 0.2), (7, 0.5)]);
    let direct = enhance(&noisy, shapes(), &EnhanceConfig { grid_size: 7, lambda_s: 0.5, ..cfg }).unwrap();
    assert_eq!(rows[3].output_snr_db, snr_db(&clean, &direct.denoised).unwrap());
    assert_eq!(rows[3].total_atoms, 14);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let cfg = EnhanceConfig::default();
    let other_rate = Signal::new(vec![0.1; 16000], 16000).unwrap();
    assert!(matches!(enhance(&other_rate, shapes(), &cfg), Err(Error::RateMismatch { .. })));
    let clean = harmonic_signal(150.0, 5, 1.0);
    let short = harmonic_signal(150.0, 5, 0.5);
    assert!(matches!(enhance_oracle(&clean, &short, shapes(), &cfg, 4), Err(Error::LengthMismatch { .. })));
    let plain_mode = EnhanceConfig { mode: Mode::Plain, ..cfg };
    assert!(enhance(&clean, shapes(), &plain_mode).is_err());
}

#[test]
fn shapes_file_roundtrip_preserves_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.shapes");
    shapes().save(&path).unwrap();
    let loaded = NoiseShapes::load(&path).unwrap();
    assert_eq!(&loaded, shapes());
}
