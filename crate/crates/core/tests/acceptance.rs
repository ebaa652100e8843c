//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

mod common;

use std::time::{Duration, Instant};

use common::{harmonic_signal, non_increasing, random_problem, white_noise, SR};
use hnmf::dictionary::harmonic_count;
use hnmf::enhance::{build_dictionary, enhance, sweep_atoms_sparsity, train_noise, EnhanceConfig};
use hnmf::nmf::{
    kl_divergence, random_gains, reconstruct, solve, solve_observed, update_atom_dense, update_atom_lin, update_gains,
    AtomKind, Basis, CompositeDictionary, ConstrainedAtom, Mode, SolverSettings,
};
use hnmf::{istft, mix_at_snr, read_wav, snr_db, stft, write_wav, Execution, FrameParams, Signal};
use ndarray::{Array1, Array2};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, what: &str, ok: bool, detail: String) {
    println!("criterion {n}: {} ({what}; {detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {what}; {detail}");
}

#[test]
fn criterion_01_objective_non_increasing() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..20 {
        let (y, dict) = random_problem(1000 + seed, 32, 40, 12, 4);
        for mode in [Mode::Lin, Mode::Dense] {
            let settings = SolverSettings { seed, iterations: 25, alpha: 10.0, ..Default::default() };
            let out = solve(&y, dict.clone(), &settings, mode).unwrap();
            let totals: Vec<f64> = out.trace.iter().map(|t| t.total).collect();
            if totals.len() != 26 || !non_increasing(&totals) {
                failures.push((seed, mode));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "objective non-increasing over 20 problems, lin and dense",
        failures.is_empty() && elapsed < Duration::from_secs(10),
        format!("failures {failures:?}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_fixed_points() {
    let (_, dict) = random_problem(2024, 32, 40, 12, 4);
    let x = random_gains(dict.len(), 40, 7);
    let y = reconstruct(dict.realized().view(), x.view(), Execution::Sequential);
    let settings = SolverSettings { lambda_speech: 0.0, lambda_noise: 0.0, ..Default::default() };

    let gains_fixed = update_gains(&x, &dict, &y, &settings).unwrap() == x;
    let atoms_fixed = dict.atoms().iter().enumerate().all(|(j, atom)| {
        update_atom_lin(atom, &y, dict.realized(), &x, j).unwrap().coeffs == atom.coeffs
    });

    let uniform: Vec<ConstrainedAtom> = dict
        .atoms()
        .iter()
        .map(|a| {
            let p = a.coeffs.len();
            ConstrainedAtom::new(a.basis.clone(), Array1::from_elem(p, 1.0 / p as f64), a.kind).unwrap()
        })
        .collect();
    let udict = CompositeDictionary::new(uniform).unwrap();
    let y = reconstruct(udict.realized().view(), x.view(), Execution::Sequential);
    let mut dense_dev = 0.0f64;
    for (j, atom) in udict.atoms().iter().enumerate().filter(|(_, a)| a.kind == AtomKind::Speech) {
        let next = update_atom_dense(atom, &y, udict.realized(), &x, j, 10.0).unwrap();
        for (a, b) in next.coeffs.iter().zip(&atom.coeffs) {
            dense_dev = dense_dev.max((a - b).abs() / b);
        }
    }
    let dense_fixed = dense_dev == 0.0;
    report(
        2,
        "Y = DX is a fixed point of the gain, lin and dense updates",
        gains_fixed && atoms_fixed && dense_fixed,
        format!("gains exact {gains_fixed}, lin atoms exact {atoms_fixed}, dense max rel dev {dense_dev:.1e}"),
    );
}

#[test]
fn criterion_03_constraint_invariants() {
    let mut runner = TestRunner::new(Config { cases: 32, ..Config::default() });
    let result = runner.run(&(0u64..1_000_000, proptest::bool::ANY), |(seed, dense)| {
        let (y, dict) = random_problem(seed, 24, 30, 6, 3);
        let mode = if dense { Mode::Dense } else { Mode::Lin };
        let settings = SolverSettings { seed, iterations: 15, ..Default::default() };
        let mut worst_constraint = 0.0f64;
        let mut worst_norm = 0.0f64;
        let mut negative = false;
        let x0 = random_gains(dict.len(), y.ncols(), seed);
        solve_observed(&y, dict, x0, &settings, mode, |_, d, x| {
            negative |= x.iter().any(|v| *v < 0.0) || d.realized().iter().any(|v| *v < 0.0);
            for (j, atom) in d.atoms().iter().enumerate() {
                negative |= atom.coeffs.iter().any(|v| *v < 0.0);
                let direct = atom.realize();
                for (a, b) in d.realized().column(j).iter().zip(&direct) {
                    worst_constraint = worst_constraint.max((a - b).abs());
                }
                if dense && atom.kind == AtomKind::Speech {
                    worst_norm = worst_norm.max((atom.coeffs.sum() - 1.0).abs());
                }
            }
        })
        .unwrap();
        proptest::prop_assert!(!negative, "negative factor");
        proptest::prop_assert!(worst_constraint <= 1e-12, "constraint drift {}", worst_constraint);
        proptest::prop_assert!(worst_norm <= 1e-10, "l1 drift {}", worst_norm);
        Ok(())
    });
    report(
        3,
        "d = Ψa, unit l1 dense coefficients and non-negativity after every iteration",
        result.is_ok(),
        format!("32 random runs: {result:?}"),
    );
}

fn brute_force_kl(y: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..y.nrows() {
        for t in 0..y.ncols() {
            let yi = y[[i, t]];
            let vi = v[[i, t]].max(1e-12);
            let log_term = if yi == 0.0 { 0.0 } else { yi * (yi / vi).ln() };
            total += log_term - yi + vi;
        }
    }
    total
}

#[test]
fn criterion_04_kl_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut draw = |zero_prob: f64| {
            Array2::from_shape_fn((5, 5), |_| if rng.random::<f64>() < zero_prob { 0.0 } else { 3.0 * rng.random::<f64>() })
        };
        let y = draw(0.2);
        let v = draw(0.0);
        let expected = brute_force_kl(&y, &v);
        let got = kl_divergence(&y, &v).unwrap();
        worst = worst.max((got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE));
    }
    report(4, "KL agrees with a brute-force sum on 50 pairs", worst <= 1e-12, format!("max rel err {worst:.1e}"));
}

#[test]
fn criterion_05_plain_rank_one_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (k, t) = (129, 122);
    let u: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..t).map(|_| 1.0 - rng.random::<f64>()).collect();
    let y = Array2::from_shape_fn((k, t), |(i, j)| u[i] * w[j]);
    let start = Instant::now();
    let atom = ConstrainedAtom::new(
        Basis::Identity(k),
        Array1::from_shape_fn(k, |_| 1.0 - rng.random::<f64>()),
        AtomKind::Speech,
    )
    .unwrap();
    let settings = SolverSettings { lambda_speech: 0.0, iterations: 100, seed: 56, ..Default::default() };
    let out = solve(&y, CompositeDictionary::new(vec![atom]).unwrap(), &settings, Mode::Plain).unwrap();
    let elapsed = start.elapsed();
    let ratio = out.trace.last().unwrap().kl / out.trace[0].kl;
    report(
        5,
        "plain mode fits a rank-1 matrix",
        ratio < 1e-6 && elapsed < Duration::from_secs(1),
        format!("final/initial KL {ratio:.1e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_06_stft_roundtrip() {
    let params = FrameParams::from_duration(SR, 32.0, 0.75).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let samples: Vec<f64> = (0..SR as usize).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let signal = Signal::new(samples, SR).unwrap();
        let back = istft(&stft(&signal, &params).unwrap()).unwrap();
        let interior = params.window_len..signal.len() - params.window_len;
        let peak = signal.samples[interior.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = interior.map(|i| (back.samples[i] - signal.samples[i]).abs()).fold(0.0f64, f64::max);
        worst = worst.max(err / peak);
    }
    report(6, "istft(stft(x)) = x on interior samples of 100 signals", worst <= 1e-6, format!("max rel err {worst:.1e}"));
}

#[test]
fn criterion_07_end_to_end_enhancement() {
    let start = Instant::now();
    let config = EnhanceConfig::default();
    let shapes = train_noise(&white_noise(10.0, 0.1, 1), &config).unwrap().shapes;
    let clean = harmonic_signal(120.0, 10, 2.0);
    let (noisy, _) = mix_at_snr(&clean, &white_noise(2.0, 0.1, 2), 0.0).unwrap();
    let out = enhance(&noisy, &shapes, &config).unwrap();
    let elapsed = start.elapsed();
    let input = snr_db(&clean, &noisy).unwrap();
    let output = snr_db(&clean, &out.denoised).unwrap();
    report(
        7,
        "dense enhancement of a 120 Hz harmonic at 0 dB gains at least 3 dB",
        output - input >= 3.0 && elapsed < Duration::from_secs(60),
        format!("input {input:.2} dB, output {output:.2} dB, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_08_dictionary_sizing() {
    let config = EnhanceConfig::default();
    let shapes = train_noise(&white_noise(2.0, 0.1, 8), &config).unwrap().shapes;
    let dict = build_dictionary(&shapes, &config).unwrap();
    let (speech, noise) = (dict.speech_count(), dict.noise_count());
    let (p_high, p_low) = (harmonic_count(400.0, SR, 30), harmonic_count(80.0, SR, 30));
    let first = dict.atoms()[0].coeffs.len();
    let last = dict.atoms()[speech - 1].coeffs.len();
    report(
        8,
        "default dictionary sizes and harmonic counts",
        speech == 132 && noise == 16 && p_high == 10 && p_low == 30 && first == 30 && last == 10,
        format!("{speech} speech, {noise} noise, p(400 Hz) = {p_high}, p(80 Hz) = {p_low}, atom dims {first}..{last}"),
    );
}

#[test]
fn criterion_09_sweep_interior_maximum() {
    let start = Instant::now();
    let config = EnhanceConfig { atoms_per_fundamental: 5, ..Default::default() };
    let shapes = train_noise(&white_noise(10.0, 0.1, 1), &config).unwrap().shapes;
    let clean = harmonic_signal(120.0, 10, 2.0);
    let (noisy, _) = mix_at_snr(&clean, &white_noise(2.0, 0.1, 2), 0.0).unwrap();
    let grid = [2, 5, 10, 20, 33, 50, 75, 100];
    let rows = sweep_atoms_sparsity(&noisy, &clean, &shapes, &config, &grid, &[0.2, 0.5, 1.0]).unwrap();
    let elapsed = start.elapsed();
    let curve: Vec<(usize, f64)> =
        rows.iter().filter(|r| r.lambda_s == 0.2).map(|r| (r.grid_size, r.output_snr_db)).collect();
    let first = curve.first().unwrap().1;
    let last = curve.last().unwrap().1;
    let interior = curve[1..curve.len() - 1].iter().cloned().fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    report(
        9,
        "SNR versus L has an interior maximum at λ_s = 0.2",
        rows.len() == 24 && interior.1 > first && interior.1 > last && elapsed < Duration::from_secs(1800),
        format!("L=2: {first:.2}, L={}: {:.2}, L=100: {last:.2} dB, {elapsed:.2?}", interior.0, interior.1),
    );
}

#[test]
fn criterion_10_deterministic_output() {
    let config = EnhanceConfig { seed: 10, ..Default::default() };
    let shapes = train_noise(&white_noise(2.0, 0.1, 3), &config).unwrap().shapes;
    let clean = harmonic_signal(160.0, 8, 1.0);
    let (noisy, _) = mix_at_snr(&clean, &white_noise(1.0, 0.1, 4), 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.wav"), dir.path().join("b.wav")];
    for path in &paths {
        write_wav(&enhance(&noisy, &shapes, &config).unwrap().denoised, path).unwrap();
    }
    let a = std::fs::read(&paths[0]).unwrap();
    let b = std::fs::read(&paths[1]).unwrap();
    let readable = read_wav(&paths[0]).map(|s| s.len() == noisy.len()).unwrap_or(false);
    report(
        10,
        "identical seeds give byte-identical WAV files",
        a == b && readable,
        format!("{} bytes each", a.len()),
    );
}
