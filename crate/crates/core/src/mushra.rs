//! MUSHRA score analysis: per-system medians, pairwise Wilcoxon signed-rank
//! and paired t tests, and Bonferroni-Holm correction.
//!
//! The Wilcoxon p-value is exact (full sign-assignment distribution) up to
//! n = 12 usable differences and a tie-corrected normal approximation above;
//! the t tail uses the regularized incomplete beta via Lentz's continued
//! fraction.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Largest sample size handled by exact sign-assignment enumeration.
pub const DEFAULT_EXACT_MAX_N: usize = 12;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty score set")]
    EmptyScores,
    #[error("degenerate sample: fewer than 5 non-zero differences")]
    DegenerateSample,
    #[error("zero variance among differences")]
    ZeroVariance,
    #[error("too few samples: {0} (need at least 2)")]
    TooFewSamples(usize),
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("malformed score csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("incomplete block: listener {listener:?} utterance {utterance:?} rated {got} of {expected} systems")]
    IncompleteBlock {
        listener: String,
        utterance: String,
        got: usize,
        expected: usize,
    },
}

/// Complete-block MUSHRA ratings: every (listener, utterance) cell rates all
/// systems, scores in [0, 100].
#[derive(Debug, Clone)]
pub struct MushraScores {
    pub systems: Vec<String>,
    // (listener, utterance) -> system -> score, deterministically ordered
    blocks: BTreeMap<(String, String), BTreeMap<String, f64>>,
}

impl MushraScores {
    pub fn new(
        rows: Vec<(String, String, String, f64)>,
    ) -> Result<Self, StatsError> {
        if rows.is_empty() {
            return Err(StatsError::EmptyScores);
        }
        let mut systems = Vec::new();
        let mut blocks: BTreeMap<(String, String), BTreeMap<String, f64>> = BTreeMap::new();
        for (line, (listener, utterance, system, score)) in rows.into_iter().enumerate() {
            if !(0.0..=100.0).contains(&score) {
                return Err(StatsError::MalformedCsv {
                    line: line + 2,
                    reason: format!("score {score} outside [0, 100]"),
                });
            }
            if !systems.contains(&system) {
                systems.push(system.clone());
            }
            blocks
                .entry((listener, utterance))
                .or_default()
                .insert(system, score);
        }
        for ((listener, utterance), cell) in &blocks {
            if cell.len() != systems.len() {
                return Err(StatsError::IncompleteBlock {
                    listener: listener.clone(),
                    utterance: utterance.clone(),
                    got: cell.len(),
                    expected: systems.len(),
                });
            }
        }
        Ok(Self { systems, blocks })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Scores of one system in block order.
    pub fn system_scores(&self, system: &str) -> Vec<f64> {
        self.blocks.values().map(|cell| cell[system]).collect()
    }
}

pub const SCORES_CSV_HEADER: &str = "listener,utterance,system,score";

pub fn parse_scores_csv(text: &str) -> Result<MushraScores, StatsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SCORES_CSV_HEADER => {}
        _ => {
            return Err(StatsError::MalformedCsv {
                line: 1,
                reason: format!("expected header {SCORES_CSV_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(StatsError::MalformedCsv {
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let score: f64 = fields[3].parse().map_err(|_| StatsError::MalformedCsv {
            line: idx + 1,
            reason: format!("bad score {:?}", fields[3]),
        })?;
        rows.push((
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            score,
        ));
    }
    MushraScores::new(rows)
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median score per system, in the systems' declared order.
pub fn mushra_medians(scores: &MushraScores) -> Vec<(String, f64)> {
    scores
        .systems
        .iter()
        .map(|sys| {
            let mut vals = scores.system_scores(sys);
            (sys.clone(), median_of(&mut vals))
        })
        .collect()
}

/// Linear-interpolation quartiles (min, q1, median, q3, max).
pub fn quartiles(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let at = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    Some([sorted[0], at(0.25), at(0.5), at(0.75), sorted[sorted.len() - 1]])
}

/// Average ranks of |d|, doubled so ties yield integers.
fn doubled_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let n = abs_diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs_diffs[a].partial_cmp(&abs_diffs[b]).unwrap());
    let mut ranks = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        // average of ranks i+1 ..= j+1, doubled: (i+1 + j+1)
        let doubled = (i as u64 + 1) + (j as u64 + 1);
        for &idx in &order[i..=j] {
            ranks[idx] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank p-value with the default exact/approximate
/// switch at n = 12.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    wilcoxon_signed_rank_with(x, y, DEFAULT_EXACT_MAX_N)
}

/// Like [`wilcoxon_signed_rank`] with a configurable exact-enumeration bound.
pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    exact_max_n: usize,
) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::TooFewSamples(x.len().min(y.len())));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(StatsError::DegenerateSample);
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks2 = doubled_ranks(&abs);
    let w2_plus: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();

    if n <= exact_max_n {
        Ok(exact_two_sided_p(&ranks2, w2_plus))
    } else {
        // normal approximation with tie correction
        let w_plus = w2_plus as f64 / 2.0;
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        let mut sorted = abs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        if var <= 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        let z = (w_plus - mean) / var.sqrt();
        Ok((2.0 * normal_sf(z.abs())).min(1.0))
    }
}

/// Exact two-sided p over all sign assignments: the probability of a rank sum
/// at least as far from the null center as the observed one.
fn exact_two_sided_p(ranks2: &[u64], w2_obs: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for w in (0..=reach).rev() {
            if counts[w] > 0 {
                counts[w + r] += counts[w];
            }
        }
        reach += r;
    }
    // the distribution is symmetric around total/2; compare doubled distances
    // to avoid halves
    let dist_obs = (2 * w2_obs).abs_diff(total);
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(w, _)| (2 * w as u64).abs_diff(total) >= dist_obs)
        .map(|(_, &c)| c)
        .sum();
    extreme as f64 / 2f64.powi(ranks2.len() as i32)
}

/// Two-sided paired t-test p-value.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(StatsError::TooFewSamples(x.len().min(y.len())));
    }
    let n = x.len() as f64;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    Ok(student_t_two_sided_p(t, df))
}

/// Two-sided tail probability of Student's t via the regularized incomplete
/// beta function.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    regularized_beta(df / 2.0, 0.5, df / (df + t * t)).min(1.0)
}

/// One Holm decision, in the caller's hypothesis order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolmDecision {
    pub p: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
}

/// Bonferroni-Holm step-down correction at level `alpha`.
///
/// Hypotheses are rejected in ascending p order while p_(k) <= alpha/(m-k);
/// the first failure stops the procedure. Adjusted p-values are the running
/// maximum of (m-k)*p_(k), capped at 1.
pub fn holm_correction(pvals: &[f64], alpha: f64) -> Result<Vec<HolmDecision>, StatsError> {
    for &p in pvals {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(StatsError::InvalidP(p));
        }
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap());

    let mut out = vec![
        HolmDecision {
            p: 0.0,
            adjusted_p: 0.0,
            rejected: false,
        };
        m
    ];
    let mut running_adj: f64 = 0.0;
    let mut stopped = false;
    for (k, &idx) in order.iter().enumerate() {
        let p = pvals[idx];
        let factor = (m - k) as f64;
        running_adj = running_adj.max((factor * p).min(1.0));
        let reject = !stopped && p <= alpha / factor;
        if !reject {
            stopped = true;
        }
        out[idx] = HolmDecision {
            p,
            adjusted_p: running_adj,
            rejected: reject,
        };
    }
    Ok(out)
}

// ---- numeric kernels ----

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Standard normal survival function P(Z > z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    // Chebyshev-fitted approximation, |error| < 1.2e-7
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t * (-z * z
        - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87
                                    + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
    .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

// ---- report assembly ----

#[derive(Debug, Clone, Serialize)]
pub struct MedianEntry {
    pub system: String,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseEntry {
    pub system_a: String,
    pub system_b: String,
    pub n: usize,
    pub wilcoxon_p: Option<f64>,
    pub t_p: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolmEntry {
    pub system_a: String,
    pub system_b: String,
    pub p: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolmFamily {
    pub alpha_05: Vec<HolmEntry>,
    pub alpha_01: Vec<HolmEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MushraReport {
    pub medians: Vec<MedianEntry>,
    pub pairwise: Vec<PairwiseEntry>,
    pub holm_wilcoxon: HolmFamily,
    pub holm_t_test: HolmFamily,
}

fn holm_family(
    pairs: &[(String, String)],
    pvals: &[f64],
) -> Result<HolmFamily, StatsError> {
    let family = |alpha: f64| -> Result<Vec<HolmEntry>, StatsError> {
        let decisions = holm_correction(pvals, alpha)?;
        Ok(pairs
            .iter()
            .zip(&decisions)
            .map(|((a, b), d)| HolmEntry {
                system_a: a.clone(),
                system_b: b.clone(),
                p: d.p,
                adjusted_p: d.adjusted_p,
                rejected: d.rejected,
            })
            .collect())
    };
    Ok(HolmFamily {
        alpha_05: family(0.05)?,
        alpha_01: family(0.01)?,
    })
}

/// Full analysis: medians, pairwise tests over per-(listener, utterance)
/// score pairs, and Holm decisions at 0.05 and 0.01. Degenerate pairs carry
/// null p-values and are excluded from the Holm families.
pub fn analyze_scores(scores: &MushraScores) -> Result<MushraReport, StatsError> {
    let medians = mushra_medians(scores)
        .into_iter()
        .map(|(system, median)| MedianEntry { system, median })
        .collect();

    let mut pairwise = Vec::new();
    let mut wil_pairs = Vec::new();
    let mut wil_ps = Vec::new();
    let mut t_pairs = Vec::new();
    let mut t_ps = Vec::new();

    for i in 0..scores.systems.len() {
        for j in i + 1..scores.systems.len() {
            let sys_a = scores.systems[i].clone();
            let sys_b = scores.systems[j].clone();
            let a = scores.system_scores(&sys_a);
            let b = scores.system_scores(&sys_b);
            let wilcoxon_p = wilcoxon_signed_rank(&a, &b).ok();
            let t_p = paired_t(&a, &b).ok();
            if let Some(p) = wilcoxon_p {
                wil_pairs.push((sys_a.clone(), sys_b.clone()));
                wil_ps.push(p);
            }
            if let Some(p) = t_p {
                t_pairs.push((sys_a.clone(), sys_b.clone()));
                t_ps.push(p);
            }
            pairwise.push(PairwiseEntry {
                system_a: sys_a,
                system_b: sys_b,
                n: a.len(),
                wilcoxon_p,
                t_p,
            });
        }
    }

    Ok(MushraReport {
        medians,
        pairwise,
        holm_wilcoxon: holm_family(&wil_pairs, &wil_ps)?,
        holm_t_test: holm_family(&t_pairs, &t_ps)?,
    })
}
