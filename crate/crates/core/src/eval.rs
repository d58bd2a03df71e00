//! Objective prosody-transfer evaluation.
//!
//! Synthesized and reference utterances are aligned by dynamic time warping
//! over their cepstral tracks; the warp path then pairs F0 frames, from which
//! RMSE, Pearson correlation and the F0 frame error are computed and
//! aggregated to corpus level as mean plus or minus standard deviation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{CepstralTrack, PitchTrack};

/// Relative deviation above which a both-voiced pair is a gross pitch error.
pub const DEFAULT_GROSS_THRESHOLD: f64 = 0.20;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("vector dimensionality mismatch")]
    DimMismatch,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("no pair has both frames voiced (ffe = {ffe_pct}%)")]
    NoVoicedOverlap { ffe_pct: f64, n_frames: usize },
    #[error("constant f0 among voiced pairs, correlation undefined (rmse = {rmse_hz} Hz, ffe = {ffe_pct}%)")]
    ZeroVariance {
        rmse_hz: f64,
        ffe_pct: f64,
        n_frames: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Monotone alignment between two frame sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pub steps: Vec<(usize, usize)>,
}

impl WarpPath {
    /// Check start, end and step-increment invariants against the two
    /// sequence lengths.
    pub fn validate(&self, len_a: usize, len_b: usize) -> bool {
        if self.steps.first() != Some(&(0, 0)) {
            return false;
        }
        if self.steps.last() != Some(&(len_a.wrapping_sub(1), len_b.wrapping_sub(1))) {
            return false;
        }
        self.steps.windows(2).all(|w| {
            let (di, dj) = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimal-cost monotone alignment under Euclidean local distance and steps
/// {(1,0),(0,1),(1,1)}; ties prefer the diagonal, then advancing the first
/// sequence.
pub fn dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(WarpPath, f64), EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySequence);
    }
    let dim = a[0].len();
    if a.iter().chain(b.iter()).any(|v| v.len() != dim) {
        return Err(EvalError::DimMismatch);
    }

    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let idx = |i: usize, j: usize| i * m + j;

    for i in 0..n {
        for j in 0..m {
            let local = euclidean(&a[i], &b[j]);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[idx(0, j - 1)],
                (_, 0) => acc[idx(i - 1, 0)],
                _ => acc[idx(i - 1, j - 1)]
                    .min(acc[idx(i - 1, j)])
                    .min(acc[idx(i, j - 1)]),
            };
            acc[idx(i, j)] = best + local;
        }
    }

    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        let (ni, nj) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[idx(i - 1, j - 1)];
                let up = acc[idx(i - 1, j)];
                let left = acc[idx(i, j - 1)];
                let best = diag.min(up).min(left);
                if diag == best {
                    (i - 1, j - 1)
                } else if up == best {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        steps.push((ni, nj));
        i = ni;
        j = nj;
    }
    steps.reverse();

    Ok((WarpPath { steps }, acc[idx(n - 1, m - 1)]))
}

/// One aligned F0 observation pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Pair {
    pub ref_f0: f64,
    pub ref_voiced: bool,
    pub syn_f0: f64,
    pub syn_voiced: bool,
}

/// Reuse a cepstral warp path to pair F0 frames, one pair per path step.
pub fn align_f0(
    path: &WarpPath,
    reference: &PitchTrack,
    synthesized: &PitchTrack,
) -> Result<Vec<F0Pair>, EvalError> {
    let Some(&(last_i, last_j)) = path.steps.last() else {
        return Err(EvalError::EmptySequence);
    };
    if reference.len() != last_i + 1 || synthesized.len() != last_j + 1 {
        return Err(EvalError::LengthMismatch(format!(
            "path ends at ({last_i}, {last_j}) but tracks have {} and {} frames",
            reference.len(),
            synthesized.len()
        )));
    }
    Ok(path
        .steps
        .iter()
        .map(|&(i, j)| F0Pair {
            ref_f0: reference.f0_hz[i],
            ref_voiced: reference.voiced[i],
            syn_f0: synthesized.f0_hz[j],
            syn_voiced: synthesized.voiced[j],
        })
        .collect())
}

/// F0 RMSE (Hz), Pearson correlation and frame error for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_hz: f64,
    pub corr: f64,
    pub ffe_pct: f64,
    pub n_frames: usize,
}

/// RMSE and correlation over both-voiced pairs; FFE counts voicing-decision
/// mismatches plus both-voiced pairs whose relative deviation exceeds the
/// gross threshold, as a percentage of all pairs.
pub fn f0_metrics(pairs: &[F0Pair], gross_threshold: f64) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptySequence);
    }
    let total = pairs.len();
    let mismatches = pairs
        .iter()
        .filter(|p| p.ref_voiced != p.syn_voiced)
        .count();
    let both: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.ref_voiced && p.syn_voiced)
        .map(|p| (p.ref_f0, p.syn_f0))
        .collect();
    let gross = both
        .iter()
        .filter(|(r, s)| ((s - r) / r).abs() > gross_threshold)
        .count();
    let ffe_pct = (100.0 * (mismatches + gross) as f64) / total as f64;

    if both.is_empty() {
        return Err(EvalError::NoVoicedOverlap {
            ffe_pct,
            n_frames: total,
        });
    }

    let nb = both.len() as f64;
    let rmse_hz = (both
        .iter()
        .map(|(r, s)| (s - r) * (s - r))
        .sum::<f64>()
        / nb)
        .sqrt();

    let mean_r = both.iter().map(|(r, _)| r).sum::<f64>() / nb;
    let mean_s = both.iter().map(|(_, s)| s).sum::<f64>() / nb;
    let var_r: f64 = both.iter().map(|(r, _)| (r - mean_r) * (r - mean_r)).sum();
    let var_s: f64 = both.iter().map(|(_, s)| (s - mean_s) * (s - mean_s)).sum();
    if var_r == 0.0 || var_s == 0.0 {
        return Err(EvalError::ZeroVariance {
            rmse_hz,
            ffe_pct,
            n_frames: total,
        });
    }
    let cov: f64 = both
        .iter()
        .map(|(r, s)| (r - mean_r) * (s - mean_s))
        .sum();
    let corr = cov / (var_r.sqrt() * var_s.sqrt());

    Ok(EvalReport {
        rmse_hz,
        corr,
        ffe_pct,
        n_frames: total,
    })
}

/// Full objective comparison of one utterance pair: DTW over cepstra, path
/// reuse for F0, then the F0 metrics.
pub fn evaluate_utterance(
    ref_ceps: &CepstralTrack,
    syn_ceps: &CepstralTrack,
    ref_pitch: &PitchTrack,
    syn_pitch: &PitchTrack,
    gross_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let (path, _) = dtw(&ref_ceps.frames, &syn_ceps.frames)?;
    let pairs = align_f0(&path, ref_pitch, syn_pitch)?;
    f0_metrics(&pairs, gross_threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Corpus-level aggregation: per-metric mean and population standard
/// deviation over utterances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub rmse_hz: MeanSd,
    pub corr: MeanSd,
    pub ffe_pct: MeanSd,
    pub n_utterances: usize,
}

fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanSd {
        mean,
        sd: var.sqrt(),
    }
}

pub fn summarize_reports(reports: &[EvalReport]) -> Result<CorpusSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let collect = |f: fn(&EvalReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    Ok(CorpusSummary {
        rmse_hz: mean_sd(&collect(|r| r.rmse_hz)),
        corr: mean_sd(&collect(|r| r.corr)),
        ffe_pct: mean_sd(&collect(|r| r.ffe_pct)),
        n_utterances: reports.len(),
    })
}

/// "16.4 ± 7.4" style cell.
pub fn format_mean_sd(stat: &MeanSd, decimals: usize) -> String {
    format!("{:.decimals$} ± {:.decimals$}", stat.mean, stat.sd)
}

/// Aligned-column text table with one row per labeled corpus.
pub fn render_summary_table(rows: &[(String, CorpusSummary)]) -> String {
    let headers = ["Corpus", "RMSE (Hz)", "CORR", "FFE (%)"];
    let mut cells: Vec<[String; 4]> = vec![headers.map(str::to_string)];
    for (label, s) in rows {
        cells.push([
            label.clone(),
            format_mean_sd(&s.rmse_hz, 1),
            format_mean_sd(&s.corr, 2),
            format_mean_sd(&s.ffe_pct, 2),
        ]);
    }
    let widths: Vec<usize> = (0..4)
        .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
