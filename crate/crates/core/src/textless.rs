//! Reference vectors without a transcript, built from CTC posteriorgrams.
//!
//! Greedy per-frame argmax labels are collapsed into phone emissions, long
//! blank runs (> 200 ms) become pauses, and prosodic features are averaged
//! over each emission's stable region. Phone duration is represented by the
//! distances to the neighboring tokens, and the posterior row at the
//! representative frame rides along with each vector.

use std::fmt::Write as _;

use thiserror::Error;

use crate::align::PAUSE_SYMBOL;
use crate::dsp::{CepstralTrack, PitchTrack};
use crate::prosody::SpeakerStats;

/// Conventional final-column symbol for the CTC blank.
pub const BLANK_SYMBOL: &str = "<blank>";
/// Blank runs strictly longer than this become a pause token.
pub const DEFAULT_PAUSE_THRESHOLD_MS: f64 = 200.0;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TextlessError {
    #[error("malformed posteriorgram: {0}")]
    Malformed(String),
    #[error("malformed posteriorgram csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("track/posteriorgram mismatch: {0}")]
    TrackAlignmentMismatch(String),
}

/// Per-frame probabilities over a phone inventory whose last entry is blank.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    pub phones: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub hop_ms: f64,
}

impl Posteriorgram {
    pub fn new(
        phones: Vec<String>,
        rows: Vec<Vec<f64>>,
        hop_ms: f64,
    ) -> Result<Self, TextlessError> {
        if phones.len() < 2 {
            return Err(TextlessError::Malformed(
                "inventory needs at least one phone plus blank".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != phones.len() {
                return Err(TextlessError::Malformed(format!(
                    "row {i} has {} entries, inventory has {}",
                    row.len(),
                    phones.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(TextlessError::Malformed(format!(
                    "row {i} has probabilities outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(TextlessError::Malformed(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self {
            phones,
            rows,
            hop_ms,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.phones.len() - 1
    }

    /// Per-frame argmax label index; ties go to the lowest index.
    pub fn argmax_labels(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|row| {
                let mut best = 0usize;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// One collapsed non-blank argmax run.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub phone: String,
    pub run_start: usize,
    pub run_end: usize,
    pub rep_frame: usize,
}

/// A reference token: an emission or an inserted pause.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub phone: String,
    pub run_start: usize,
    pub run_end: usize,
    pub rep_frame: usize,
    pub is_pau: bool,
}

/// The text-less per-token reference vector (normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct TextlessRefVector {
    pub phone: String,
    pub f0: f64,
    pub mgc0: f64,
    pub d_prev: f64,
    pub d_next: f64,
    pub posterior_row: Vec<f64>,
    pub is_pau: bool,
    pub f0_missing: bool,
}

fn runs(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let mut j = i;
        while j + 1 < labels.len() && labels[j + 1] == labels[i] {
            j += 1;
        }
        out.push((labels[i], i, j));
        i = j + 1;
    }
    out
}

/// Collapse per-frame argmax labels into non-blank emissions. Consecutive
/// identical labels merge into one emission whose representative frame is the
/// middle of the run; blank frames separate runs and are dropped.
pub fn greedy_emissions(pg: &Posteriorgram) -> Vec<Emission> {
    let blank = pg.blank_index();
    runs(&pg.argmax_labels())
        .into_iter()
        .filter(|&(label, _, _)| label != blank)
        .map(|(label, start, end)| Emission {
            phone: pg.phones[label].clone(),
            run_start: start,
            run_end: end,
            rep_frame: (start + end) / 2,
        })
        .collect()
}

/// Inclusive frame ranges where the argmax is blank.
pub fn blank_runs(pg: &Posteriorgram) -> Vec<(usize, usize)> {
    let blank = pg.blank_index();
    runs(&pg.argmax_labels())
        .into_iter()
        .filter(|&(label, _, _)| label == blank)
        .map(|(_, start, end)| (start, end))
        .collect()
}

/// Interleave emissions with pause tokens for every blank run strictly longer
/// than `threshold_ms`. The pause sits at the midpoint of its blank run and
/// ordering by time is preserved.
pub fn insert_pauses(
    emissions: &[Emission],
    blank_runs: &[(usize, usize)],
    hop_ms: f64,
    threshold_ms: f64,
) -> Vec<Token> {
    let mut tokens: Vec<Token> = emissions
        .iter()
        .map(|e| Token {
            phone: e.phone.clone(),
            run_start: e.run_start,
            run_end: e.run_end,
            rep_frame: e.rep_frame,
            is_pau: false,
        })
        .collect();

    for &(start, end) in blank_runs {
        let duration_ms = (end - start + 1) as f64 * hop_ms;
        if duration_ms > threshold_ms {
            tokens.push(Token {
                phone: PAUSE_SYMBOL.to_string(),
                run_start: start,
                run_end: end,
                rep_frame: (start + end) / 2,
                is_pau: true,
            });
        }
    }

    tokens.sort_by_key(|t| t.run_start);
    tokens
}

/// Raw (d_prev, d_next) in seconds for each representative frame; boundary
/// tokens measure to the utterance start and end.
pub fn token_distances(reps: &[usize], hop_ms: f64, n_frames: usize) -> Vec<(f64, f64)> {
    let time = |frames: usize| (frames as f64 * hop_ms) / 1000.0;
    (0..reps.len())
        .map(|k| {
            let d_prev = if k == 0 {
                time(reps[0])
            } else {
                time(reps[k] - reps[k - 1])
            };
            let d_next = if k + 1 == reps.len() {
                time(n_frames - reps[k])
            } else {
                time(reps[k + 1] - reps[k])
            };
            (d_prev, d_next)
        })
        .collect()
}

/// Aggregate prosody over each token's run and speaker-normalize.
///
/// F0 is the voiced mean over the run, falling back to the utterance voiced
/// mean and then to a flagged zero (z = 0); c0 is the run mean. The neighbor
/// distances are normalized with the global duration statistics.
pub fn aggregate_textless(
    tokens: &[Token],
    pitch: &PitchTrack,
    ceps: &CepstralTrack,
    pg: &Posteriorgram,
    stats: &SpeakerStats,
) -> Result<Vec<TextlessRefVector>, TextlessError> {
    if pitch.hop_ms != ceps.hop_ms || pitch.hop_ms != pg.hop_ms {
        return Err(TextlessError::TrackAlignmentMismatch(format!(
            "hop mismatch: pitch {} ms, ceps {} ms, posteriorgram {} ms",
            pitch.hop_ms, ceps.hop_ms, pg.hop_ms
        )));
    }
    let lens = [pitch.len(), ceps.len(), pg.len()];
    let n = *lens.iter().min().unwrap();
    if *lens.iter().max().unwrap() - n > 1 {
        return Err(TextlessError::TrackAlignmentMismatch(format!(
            "length mismatch: pitch {} vs ceps {} vs posteriorgram {} frames",
            pitch.len(),
            ceps.len(),
            pg.len()
        )));
    }
    if n == 0 {
        return Err(TextlessError::TrackAlignmentMismatch("empty tracks".into()));
    }

    let utt_voiced: Vec<f64> = (0..n.min(pitch.len()))
        .filter(|&i| pitch.voiced[i])
        .map(|i| pitch.f0_hz[i])
        .collect();
    let utt_f0_mean = if utt_voiced.is_empty() {
        None
    } else {
        Some(utt_voiced.iter().sum::<f64>() / utt_voiced.len() as f64)
    };

    let f0_sd = stats.f0_var.sqrt();
    let c0_sd = stats.mgc0_var.sqrt();
    let dur = &stats.global_duration;
    let dur_sd = dur.sd();
    // on a log-duration scale, floor distances at one hop before the log
    let hop_s = pitch.hop_ms / 1000.0;
    let dur_value = |d: f64| {
        if stats.log_duration {
            d.max(hop_s).ln()
        } else {
            d
        }
    };

    let reps: Vec<usize> = tokens.iter().map(|t| t.rep_frame.min(n - 1)).collect();
    let distances = token_distances(&reps, pitch.hop_ms, n);

    let mut out = Vec::with_capacity(tokens.len());
    for (token, &(d_prev, d_next)) in tokens.iter().zip(&distances) {
        let lo = token.run_start.min(n - 1);
        let hi = token.run_end.min(n - 1);
        let run_voiced: Vec<f64> = (lo..=hi)
            .filter(|&i| pitch.voiced[i])
            .map(|i| pitch.f0_hz[i])
            .collect();
        let (raw_f0, f0_missing) = if !run_voiced.is_empty() {
            (run_voiced.iter().sum::<f64>() / run_voiced.len() as f64, false)
        } else if let Some(m) = utt_f0_mean {
            (m, true)
        } else {
            (0.0, true)
        };
        let raw_c0 =
            (lo..=hi).map(|i| ceps.frames[i][0]).sum::<f64>() / (hi - lo + 1) as f64;

        let f0 = if f0_missing && raw_f0 == 0.0 {
            0.0
        } else {
            (raw_f0 - stats.f0_mean) / f0_sd
        };

        out.push(TextlessRefVector {
            phone: token.phone.clone(),
            f0,
            mgc0: (raw_c0 - stats.mgc0_mean) / c0_sd,
            d_prev: (dur_value(d_prev) - dur.mean) / dur_sd,
            d_next: (dur_value(d_next) - dur.mean) / dur_sd,
            posterior_row: pg.rows[token.rep_frame.min(n - 1)].clone(),
            is_pau: token.is_pau,
            f0_missing,
        });
    }
    Ok(out)
}

/// Convenience wrapper: argmax decode, pause insertion, aggregation.
pub fn textless_reference(
    pitch: &PitchTrack,
    ceps: &CepstralTrack,
    pg: &Posteriorgram,
    stats: &SpeakerStats,
    pause_threshold_ms: f64,
) -> Result<Vec<TextlessRefVector>, TextlessError> {
    let emissions = greedy_emissions(pg);
    let blanks = blank_runs(pg);
    let tokens = insert_pauses(&emissions, &blanks, pg.hop_ms, pause_threshold_ms);
    aggregate_textless(&tokens, pitch, ceps, pg, stats)
}

/// Posteriorgram CSV: header = inventory (blank last), one probability row
/// per frame. The hop lives in a JSON sidecar, passed separately.
pub fn format_posteriorgram_csv(pg: &Posteriorgram) -> String {
    let mut out = pg.phones.join(",");
    out.push('\n');
    for row in &pg.rows {
        let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_posteriorgram_csv(text: &str, hop_ms: f64) -> Result<Posteriorgram, TextlessError> {
    let mut lines = text.lines().enumerate();
    let phones: Vec<String> = match lines.next() {
        Some((_, header)) if !header.is_empty() => {
            header.split(',').map(|s| s.to_string()).collect()
        }
        _ => {
            return Err(TextlessError::MalformedCsv {
                line: 1,
                reason: "missing header row".into(),
            })
        }
    };
    if phones.last().map(String::as_str) != Some(BLANK_SYMBOL) {
        return Err(TextlessError::MalformedCsv {
            line: 1,
            reason: format!("last inventory column must be {BLANK_SYMBOL:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        rows.push(row.map_err(|_| TextlessError::MalformedCsv {
            line: idx + 1,
            reason: "bad probability value".into(),
        })?);
    }
    Posteriorgram::new(phones, rows, hop_ms)
}

pub const TEXTLESS_CSV_HEADER: &str = "phone,f0,mgc0,d_prev,d_next,is_pau,f0_missing,posterior";

/// Textless vectors as CSV with a trailing semicolon-joined posterior blob.
pub fn format_textless_csv(vectors: &[TextlessRefVector]) -> String {
    let mut out = String::from(TEXTLESS_CSV_HEADER);
    out.push('\n');
    for v in vectors {
        let blob: Vec<String> = v.posterior_row.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            v.phone,
            v.f0,
            v.mgc0,
            v.d_prev,
            v.d_next,
            u8::from(v.is_pau),
            u8::from(v.f0_missing),
            blob.join(";")
        );
    }
    out
}

pub fn parse_textless_csv(text: &str) -> Result<Vec<TextlessRefVector>, TextlessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TEXTLESS_CSV_HEADER => {}
        _ => {
            return Err(TextlessError::MalformedCsv {
                line: 1,
                reason: format!("expected header {TEXTLESS_CSV_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(TextlessError::MalformedCsv {
                line: line_no,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64, TextlessError> {
            s.parse().map_err(|_| TextlessError::MalformedCsv {
                line: line_no,
                reason: format!("bad number {s:?}"),
            })
        };
        let flag = |s: &str| -> Result<bool, TextlessError> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(TextlessError::MalformedCsv {
                    line: line_no,
                    reason: format!("bad flag {s:?}"),
                }),
            }
        };
        let posterior_row: Result<Vec<f64>, _> =
            fields[7].split(';').map(&num).collect();
        out.push(TextlessRefVector {
            phone: fields[0].to_string(),
            f0: num(fields[1])?,
            mgc0: num(fields[2])?,
            d_prev: num(fields[3])?,
            d_next: num(fields[4])?,
            is_pau: flag(fields[5])?,
            f0_missing: flag(fields[6])?,
            posterior_row: posterior_row?,
        });
    }
    Ok(out)
}
