//! Phoneme-level prosody aggregation and speaker normalization.
//!
//! Frame-level tracks are averaged per phone state into a 7-dimensional
//! vector (3 state F0 means, 3 state power-proxy means, duration), then
//! z-scored with per-speaker statistics; duration is additionally normalized
//! per phoneme identity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{frames_in_interval, PhoneAlignment};
use crate::dsp::{CepstralTrack, PitchTrack};

/// Variances are floored here so constants never divide by zero.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Track pair may disagree by at most this many frames.
const TRACK_SLACK_FRAMES: usize = 1;
/// Alignment may extend past the last full analysis window by up to this many
/// frames (trailing samples shorter than a window produce no frame).
const ALIGN_SLACK_FRAMES: f64 = 3.0;

#[derive(Debug, Error)]
pub enum AggError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("track/alignment mismatch: {0}")]
    TrackAlignmentMismatch(String),
    #[error("malformed prosody csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("malformed stats json: {0}")]
    MalformedJson(String),
}

/// The 7-dimensional per-phoneme prosodic representation.
///
/// Raw vectors carry Hz / log-energy / seconds; after [`normalize`] every
/// numeric dimension is in z-units. `f0_missing[i]` marks states that had no
/// voiced frames and were filled by the fallback ladder; `dur_global` marks
/// durations normalized with global statistics because the phone was unseen.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyVector {
    pub phone: String,
    pub f0_state: [f64; 3],
    pub mgc0_state: [f64; 3],
    pub duration: f64,
    pub f0_missing: [bool; 3],
    pub dur_global: bool,
}

impl ProsodyVector {
    /// The 7 numeric dimensions in serialization order.
    pub fn numeric(&self) -> [f64; 7] {
        [
            self.f0_state[0],
            self.f0_state[1],
            self.f0_state[2],
            self.mgc0_state[0],
            self.mgc0_state[1],
            self.mgc0_state[2],
            self.duration,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean: f64,
    pub var: f64,
    pub count: usize,
}

impl MomentStats {
    fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            var: var.max(VARIANCE_FLOOR),
            count: values.len(),
        })
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Per-speaker normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerStats {
    pub f0_mean: f64,
    pub f0_var: f64,
    pub mgc0_mean: f64,
    pub mgc0_var: f64,
    pub duration: BTreeMap<String, MomentStats>,
    pub global_duration: MomentStats,
    /// Duration moments (and raw vector durations) are on a log scale.
    #[serde(default)]
    pub log_duration: bool,
}

impl SpeakerStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("speaker stats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, AggError> {
        serde_json::from_str(text).map_err(|e| AggError::MalformedJson(e.to_string()))
    }
}

/// Aggregation options. Duration is linear seconds by default; the log scale
/// is available as a switch and is recorded in the collected statistics so
/// normalization stays consistent.
#[derive(Debug, Clone, Copy, Default)]
pub struct AggOptions {
    pub log_duration: bool,
}

impl AggOptions {
    fn duration(&self, seconds: f64) -> f64 {
        if self.log_duration {
            seconds.ln()
        } else {
            seconds
        }
    }
}

/// One utterance's inputs to aggregation.
pub type UtteranceFeatures<'a> = (&'a PitchTrack, &'a CepstralTrack, &'a PhoneAlignment);

fn check_consistency(
    pitch: &PitchTrack,
    ceps: &CepstralTrack,
    align: &PhoneAlignment,
) -> Result<usize, AggError> {
    if pitch.hop_ms != ceps.hop_ms {
        return Err(AggError::TrackAlignmentMismatch(format!(
            "hop mismatch: pitch {} ms vs ceps {} ms",
            pitch.hop_ms, ceps.hop_ms
        )));
    }
    if pitch.len().abs_diff(ceps.len()) > TRACK_SLACK_FRAMES {
        return Err(AggError::TrackAlignmentMismatch(format!(
            "track length mismatch: pitch {} vs ceps {} frames",
            pitch.len(),
            ceps.len()
        )));
    }
    let n = pitch.len().min(ceps.len());
    if n == 0 {
        return Err(AggError::TrackAlignmentMismatch("empty tracks".into()));
    }
    let align_frames = align.total_s * 1000.0 / pitch.hop_ms;
    if (align_frames - n as f64).abs() > ALIGN_SLACK_FRAMES {
        return Err(AggError::TrackAlignmentMismatch(format!(
            "alignment spans {:.3} s (~{align_frames:.1} frames) but tracks have {n} frames",
            align.total_s
        )));
    }
    Ok(n)
}

/// Population mean/variance of f0 (voiced frames), c0 (all frames), and phone
/// durations over a single speaker's corpus.
pub fn collect_speaker_stats(corpus: &[UtteranceFeatures]) -> Result<SpeakerStats, AggError> {
    collect_speaker_stats_with(corpus, AggOptions::default())
}

pub fn collect_speaker_stats_with(
    corpus: &[UtteranceFeatures],
    opts: AggOptions,
) -> Result<SpeakerStats, AggError> {
    if corpus.is_empty() {
        return Err(AggError::EmptyCorpus);
    }

    let mut f0_values = Vec::new();
    let mut c0_values = Vec::new();
    let mut durations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut all_durations = Vec::new();

    for (pitch, ceps, align) in corpus {
        let n = check_consistency(pitch, ceps, align)?;
        f0_values.extend(
            (0..n.min(pitch.len())).filter(|&i| pitch.voiced[i]).map(|i| pitch.f0_hz[i]),
        );
        c0_values.extend(ceps.frames[..n.min(ceps.len())].iter().map(|f| f[0]));
        for seg in &align.segments {
            durations
                .entry(seg.phone.clone())
                .or_default()
                .push(opts.duration(seg.duration_s()));
            all_durations.push(opts.duration(seg.duration_s()));
        }
    }

    let f0 = MomentStats::from_values(&f0_values).unwrap_or(MomentStats {
        mean: 0.0,
        var: VARIANCE_FLOOR,
        count: 0,
    });
    let c0 = MomentStats::from_values(&c0_values).expect("tracks are non-empty");
    let global_duration = MomentStats::from_values(&all_durations)
        .ok_or_else(|| AggError::TrackAlignmentMismatch("no phone segments in corpus".into()))?;

    Ok(SpeakerStats {
        f0_mean: f0.mean,
        f0_var: f0.var,
        mgc0_mean: c0.mean,
        mgc0_var: c0.var,
        duration: durations
            .into_iter()
            .map(|(p, v)| (p, MomentStats::from_values(&v).unwrap()))
            .collect(),
        global_duration,
        log_duration: opts.log_duration,
    })
}

/// Aggregate one utterance into raw per-phoneme vectors.
///
/// Per state: f0 is the mean over voiced frames and c0 the mean over all
/// frames. States with no voiced frames fall back to the phone-level voiced
/// mean, then the utterance voiced mean, then raw 0, and are flagged.
pub fn aggregate_utterance(
    pitch: &PitchTrack,
    ceps: &CepstralTrack,
    align: &PhoneAlignment,
) -> Result<Vec<ProsodyVector>, AggError> {
    aggregate_utterance_with(pitch, ceps, align, AggOptions::default())
}

pub fn aggregate_utterance_with(
    pitch: &PitchTrack,
    ceps: &CepstralTrack,
    align: &PhoneAlignment,
    opts: AggOptions,
) -> Result<Vec<ProsodyVector>, AggError> {
    let n = check_consistency(pitch, ceps, align)?;
    let hop_ms = pitch.hop_ms;

    let utt_voiced: Vec<f64> = (0..n.min(pitch.len()))
        .filter(|&i| pitch.voiced[i])
        .map(|i| pitch.f0_hz[i])
        .collect();
    let utt_f0_mean = mean(&utt_voiced);
    let utt_c0_mean = mean(&ceps.frames[..n.min(ceps.len())]
        .iter()
        .map(|f| f[0])
        .collect::<Vec<_>>());

    let mut out = Vec::with_capacity(align.segments.len());
    for seg in &align.segments {
        let phone_range = frames_in_interval((seg.start_s, seg.end_s), hop_ms, n);
        let phone_voiced: Vec<f64> = phone_range
            .clone()
            .filter(|&i| pitch.voiced[i])
            .map(|i| pitch.f0_hz[i])
            .collect();
        let phone_c0: Vec<f64> = phone_range.map(|i| ceps.frames[i][0]).collect();

        let mut f0_state = [0.0; 3];
        let mut mgc0_state = [0.0; 3];
        let mut f0_missing = [false; 3];

        for (k, interval) in seg.states.iter().enumerate() {
            let range = frames_in_interval(*interval, hop_ms, n);
            let state_voiced: Vec<f64> = range
                .clone()
                .filter(|&i| pitch.voiced[i])
                .map(|i| pitch.f0_hz[i])
                .collect();
            let state_c0: Vec<f64> = range.map(|i| ceps.frames[i][0]).collect();

            f0_state[k] = match (
                state_voiced.is_empty(),
                phone_voiced.is_empty(),
                utt_voiced.is_empty(),
            ) {
                (false, _, _) => mean(&state_voiced).unwrap(),
                (true, false, _) => {
                    f0_missing[k] = true;
                    mean(&phone_voiced).unwrap()
                }
                (true, true, false) => {
                    f0_missing[k] = true;
                    utt_f0_mean.unwrap()
                }
                (true, true, true) => {
                    f0_missing[k] = true;
                    0.0
                }
            };

            mgc0_state[k] = mean(&state_c0)
                .or_else(|| mean(&phone_c0))
                .or(utt_c0_mean)
                .unwrap_or(0.0);
        }

        out.push(ProsodyVector {
            phone: seg.phone.clone(),
            f0_state,
            mgc0_state,
            duration: opts.duration(seg.duration_s()),
            f0_missing,
            dur_global: false,
        });
    }
    Ok(out)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Z-score raw vectors with speaker statistics.
///
/// F0 and c0 dimensions use speaker-level moments, duration the per-phone
/// moments (global moments for unseen phones, flagged). F0 states that fell
/// through the whole fallback ladder (raw 0, flagged) map to z = 0.
pub fn normalize(vectors: &[ProsodyVector], stats: &SpeakerStats) -> Vec<ProsodyVector> {
    let f0_sd = stats.f0_var.sqrt();
    let c0_sd = stats.mgc0_var.sqrt();
    vectors
        .iter()
        .map(|v| {
            let mut f0_state = [0.0; 3];
            let mut mgc0_state = [0.0; 3];
            for k in 0..3 {
                f0_state[k] = if v.f0_missing[k] && v.f0_state[k] == 0.0 {
                    0.0
                } else {
                    (v.f0_state[k] - stats.f0_mean) / f0_sd
                };
                mgc0_state[k] = (v.mgc0_state[k] - stats.mgc0_mean) / c0_sd;
            }
            let (dur_stats, dur_global) = match stats.duration.get(&v.phone) {
                Some(s) => (s, false),
                None => (&stats.global_duration, true),
            };
            ProsodyVector {
                phone: v.phone.clone(),
                f0_state,
                mgc0_state,
                duration: (v.duration - dur_stats.mean) / dur_stats.sd(),
                f0_missing: v.f0_missing,
                dur_global,
            }
        })
        .collect()
}

pub const PROSODY_CSV_HEADER: &str = "phone,f0_1,f0_2,f0_3,mgc0_1,mgc0_2,mgc0_3,dur,flags";

fn flags_field(v: &ProsodyVector) -> String {
    let mut s = String::with_capacity(4);
    for m in v.f0_missing {
        s.push(if m { '1' } else { '0' });
    }
    s.push(if v.dur_global { '1' } else { '0' });
    s
}

/// Serialize vectors as CSV (header + one row per phone).
pub fn format_prosody_csv(vectors: &[ProsodyVector]) -> String {
    let mut out = String::from(PROSODY_CSV_HEADER);
    out.push('\n');
    for v in vectors {
        let n = v.numeric();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            v.phone, n[0], n[1], n[2], n[3], n[4], n[5], n[6],
            flags_field(v)
        ));
    }
    out
}

pub fn parse_prosody_csv(text: &str) -> Result<Vec<ProsodyVector>, AggError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == PROSODY_CSV_HEADER => {}
        _ => {
            return Err(AggError::MalformedCsv {
                line: 1,
                reason: format!("expected header {PROSODY_CSV_HEADER:?}"),
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
        if fields.len() != 9 {
            return Err(AggError::MalformedCsv {
                line: line_no,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let mut nums = [0.0f64; 7];
        for (i, field) in fields[1..8].iter().enumerate() {
            nums[i] = field.parse().map_err(|_| AggError::MalformedCsv {
                line: line_no,
                reason: format!("bad number {field:?}"),
            })?;
        }
        let flags = fields[8];
        if flags.len() != 4 || !flags.chars().all(|c| c == '0' || c == '1') {
            return Err(AggError::MalformedCsv {
                line: line_no,
                reason: format!("bad flags {flags:?}"),
            });
        }
        let bits: Vec<bool> = flags.chars().map(|c| c == '1').collect();
        out.push(ProsodyVector {
            phone: fields[0].to_string(),
            f0_state: [nums[0], nums[1], nums[2]],
            mgc0_state: [nums[3], nums[4], nums[5]],
            duration: nums[6],
            f0_missing: [bits[0], bits[1], bits[2]],
            dur_global: bits[3],
        });
    }
    Ok(out)
}
