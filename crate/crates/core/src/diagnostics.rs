//! Text and image dumps: objective traces, sweep tables, spectrograms.

use std::fmt::Write;

use ndarray::Array2;

use crate::enhance::SweepRow;
use crate::nmf::ObjectiveTerms;

pub const TRACE_HEADER: &str = "iteration,kl,sparsity_term,density_term,total";
pub const SWEEP_HEADER: &str = "L,lambda_s,total_atoms,output_snr_db";

pub fn trace_csv(trace: &[ObjectiveTerms]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, t) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{}", t.kl, t.sparsity, t.density, t.total);
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.grid_size, r.lambda_s, r.total_atoms, r.output_snr_db);
    }
    out
}

/// Raw K×T magnitudes, one line per frequency bin (lowest first).
pub fn spectrogram_csv(values: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Binary 8-bit PGM of the log-magnitude, min-max normalized per image, with
/// the highest frequency bin on the top row.
pub fn spectrogram_pgm(values: &Array2<f64>) -> Vec<u8> {
    let (bins, frames) = values.dim();
    let logs = values.mapv(|v| (v.max(1e-12)).ln());
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut out = format!("P5\n{frames} {bins}\n255\n").into_bytes();
    for i in (0..bins).rev() {
        for t in 0..frames {
            let level = if range > 0.0 { (logs[[i, t]] - lo) / range * 255.0 } else { 0.0 };
            out.push(level.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
