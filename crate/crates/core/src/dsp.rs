//! Frame-level prosodic feature extraction.
//!
//! Produces the two per-frame tracks everything downstream consumes: an F0
//! track with voicing decisions (normalized-autocorrelation pitch detector)
//! and a cepstral track whose coefficient 0 doubles as the frame power proxy
//! (mgc0 stand-in). All operations are pure functions of their inputs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Voicing requires the normalized autocorrelation peak to reach this value.
pub const VOICING_PEAK_THRESHOLD: f64 = 0.5;
/// Frames with de-meaned RMS below this floor are always unvoiced.
pub const SILENCE_RMS_FLOOR: f64 = 1e-4;
/// Mel filterbank energies are floored here before the log.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

pub const DEFAULT_F0_MIN_HZ: f64 = 60.0;
pub const DEFAULT_F0_MAX_HZ: f64 = 400.0;
pub const DEFAULT_N_MELS: usize = 40;
pub const DEFAULT_N_CEPS: usize = 13;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("waveform must be non-empty")]
    EmptySignal,
    #[error("sample rate {0} Hz too low (minimum 8000)")]
    InvalidSampleRate(u32),
    #[error("invalid frame spec: window {window_ms} ms, hop {hop_ms} ms")]
    InvalidFrameSpec { window_ms: f64, hop_ms: f64 },
    #[error("invalid f0 range [{f0_min}, {f0_max}] Hz for sample rate {sample_rate}")]
    InvalidRange {
        f0_min: f64,
        f0_max: f64,
        sample_rate: u32,
    },
    #[error("invalid cepstral order: n_ceps {n_ceps} > n_mels {n_mels} or n_mels > {n_bins} FFT bins")]
    InvalidOrder {
        n_ceps: usize,
        n_mels: usize,
        n_bins: usize,
    },
    #[error("malformed track json: {0}")]
    MalformedJson(String),
    #[error("track violates invariant: {0}")]
    InvariantViolation(String),
}

/// Mono audio with samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::EmptySignal);
        }
        if sample_rate < 8000 {
            return Err(DspError::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis framing: window and hop in milliseconds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameSpec {
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.hop_ms > 0.0 && self.hop_ms <= self.window_ms {
            Ok(())
        } else {
            Err(DspError::InvalidFrameSpec {
                window_ms: self.window_ms,
                hop_ms: self.hop_ms,
            })
        }
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }
}

/// Per-frame F0 in Hz with voicing decisions; f0 is 0 exactly where unvoiced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub hop_ms: f64,
    #[serde(rename = "f0")]
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if self.f0_hz.len() != self.voiced.len() {
            return Err(DspError::InvariantViolation(
                "f0 and voiced lengths differ".into(),
            ));
        }
        for (i, (&f0, &v)) in self.f0_hz.iter().zip(&self.voiced).enumerate() {
            if !f0.is_finite() {
                return Err(DspError::InvariantViolation(format!(
                    "non-finite f0 at frame {i}"
                )));
            }
            if (f0 > 0.0) != v {
                return Err(DspError::InvariantViolation(format!(
                    "frame {i}: f0 {f0} inconsistent with voiced={v}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pitch track serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DspError> {
        let track: Self =
            serde_json::from_str(text).map_err(|e| DspError::MalformedJson(e.to_string()))?;
        track.validate()?;
        Ok(track)
    }
}

/// Per-frame cepstral coefficient vectors; coefficient 0 is the power proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepstralTrack {
    pub hop_ms: f64,
    #[serde(rename = "ceps")]
    pub frames: Vec<Vec<f64>>,
}

impl CepstralTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The c0 sequence (mgc0 stand-in).
    pub fn c0(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f[0])
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let order = self.frames.first().map(|f| f.len()).unwrap_or(0);
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.len() != order {
                return Err(DspError::InvariantViolation(format!(
                    "frame {i} has {} coefficients, expected {order}",
                    frame.len()
                )));
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(DspError::InvariantViolation(format!(
                    "non-finite coefficient in frame {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cepstral track serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DspError> {
        let track: Self =
            serde_json::from_str(text).map_err(|e| DspError::MalformedJson(e.to_string()))?;
        track.validate()?;
        Ok(track)
    }
}

/// Slice the signal into overlapping analysis windows.
///
/// Yields floor((N - W) / H) + 1 full windows (none if the signal is shorter
/// than one window); trailing samples that do not fill a window are dropped.
pub fn frame_signal<'a>(wav: &'a Waveform, spec: &FrameSpec) -> Vec<&'a [f64]> {
    let w = spec.window_samples(wav.sample_rate);
    let h = spec.hop_samples(wav.sample_rate);
    if w == 0 || h == 0 || wav.samples.len() < w {
        return Vec::new();
    }
    let count = (wav.samples.len() - w) / h + 1;
    (0..count).map(|i| &wav.samples[i * h..i * h + w]).collect()
}

/// Normalized-autocorrelation pitch detector.
///
/// Search lags span [sr/f0_max, sr/f0_min]; a frame is voiced when the peak
/// normalized autocorrelation reaches 0.5 and the de-meaned frame RMS clears
/// the silence floor. The peak lag is refined by parabolic interpolation and
/// the resulting f0 clamped into [f0_min, f0_max].
pub fn estimate_f0(
    wav: &Waveform,
    spec: &FrameSpec,
    f0_min: f64,
    f0_max: f64,
) -> Result<PitchTrack, DspError> {
    spec.validate()?;
    let sr = wav.sample_rate as f64;
    if !(f0_min > 0.0 && f0_min < f0_max && f0_max < sr / 2.0) {
        return Err(DspError::InvalidRange {
            f0_min,
            f0_max,
            sample_rate: wav.sample_rate,
        });
    }

    let frames = frame_signal(wav, spec);
    let mut f0_hz = Vec::with_capacity(frames.len());
    let mut voiced = Vec::with_capacity(frames.len());

    for frame in frames {
        let (f0, v) = detect_frame_f0(frame, sr, f0_min, f0_max);
        f0_hz.push(f0);
        voiced.push(v);
    }

    Ok(PitchTrack {
        hop_ms: spec.hop_ms,
        f0_hz,
        voiced,
    })
}

fn detect_frame_f0(frame: &[f64], sr: f64, f0_min: f64, f0_max: f64) -> (f64, bool) {
    let n = frame.len();
    let mean = frame.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = frame.iter().map(|s| s - mean).collect();

    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms < SILENCE_RMS_FLOOR {
        return (0.0, false);
    }

    let lag_min = (sr / f0_max).ceil() as usize;
    let lag_max = ((sr / f0_min).floor() as usize).min(n - 1);
    if lag_min < 2 || lag_min > lag_max {
        return (0.0, false);
    }

    // prefix sums of energy for the ncc denominators
    let mut cum = vec![0.0; n + 1];
    for (i, &v) in x.iter().enumerate() {
        cum[i + 1] = cum[i] + v * v;
    }
    let ncc = |lag: usize| -> f64 {
        let m = n - lag;
        let num: f64 = (0..m).map(|i| x[i] * x[i + lag]).sum();
        let e_head = cum[m];
        let e_tail = cum[n] - cum[lag];
        let denom = (e_head * e_tail).sqrt();
        if denom > 0.0 {
            num / denom
        } else {
            0.0
        }
    };

    let corr: Vec<f64> = (lag_min..=lag_max).map(&ncc).collect();
    let global_max = corr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if global_max < VOICING_PEAK_THRESHOLD {
        return (0.0, false);
    }

    // A periodic signal peaks equally at every multiple of its period; take
    // the smallest-lag local maximum that comes close to the global one.
    let mut best_lag = lag_min + corr
        .iter()
        .position(|&v| v == global_max)
        .unwrap_or(0);
    let mut best_val = global_max;
    for (off, &v) in corr.iter().enumerate() {
        let left = if off == 0 { f64::NEG_INFINITY } else { corr[off - 1] };
        let right = corr.get(off + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if v >= left && v >= right && v >= 0.9 * global_max {
            best_lag = lag_min + off;
            best_val = v;
            break;
        }
    }

    if best_val < VOICING_PEAK_THRESHOLD {
        return (0.0, false);
    }

    // parabolic refinement around the peak
    let mut lag = best_lag as f64;
    if best_lag > 1 && best_lag < n - 1 {
        let left = ncc(best_lag - 1);
        let right = ncc(best_lag + 1);
        let denom = left - 2.0 * best_val + right;
        if denom.abs() > 1e-12 {
            let delta = 0.5 * (left - right) / denom;
            if delta.abs() <= 1.0 {
                lag += delta;
            }
        }
    }

    let f0 = (sr / lag).clamp(f0_min, f0_max);
    (f0, true)
}

/// Mel-filterbank cepstra: power spectrum -> triangular mel filters -> floored
/// log -> type-II cosine transform scaled by 1/n_mels, so coefficient 0 is the
/// mean log filterbank energy.
pub fn compute_cepstra(
    wav: &Waveform,
    spec: &FrameSpec,
    n_mels: usize,
    n_ceps: usize,
) -> Result<CepstralTrack, DspError> {
    spec.validate()?;
    let w = spec.window_samples(wav.sample_rate);
    let fft_size = w.next_power_of_two();
    let n_bins = fft_size / 2 + 1;
    if n_ceps == 0 || n_mels == 0 || n_ceps > n_mels || n_mels > n_bins {
        return Err(DspError::InvalidOrder {
            n_ceps,
            n_mels,
            n_bins,
        });
    }

    let window = hann_periodic(w);
    let filterbank = mel_filterbank(n_mels, fft_size, wav.sample_rate as f64);
    let dct = dct_basis(n_ceps, n_mels);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);

    let mut frames_out = Vec::new();
    for frame in frame_signal(wav, spec) {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&window)
            .map(|(&s, &h)| Complex::new(s * h, 0.0))
            .collect();
        buf.resize(fft_size, Complex::new(0.0, 0.0));
        fft.process(&mut buf);

        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        let log_mels: Vec<f64> = filterbank
            .iter()
            .map(|filt| {
                let e: f64 = filt.iter().map(|&(bin, wgt)| wgt * power[bin]).sum();
                e.max(LOG_ENERGY_FLOOR).ln()
            })
            .collect();

        let ceps: Vec<f64> = dct
            .iter()
            .map(|row| {
                row.iter().zip(&log_mels).map(|(c, l)| c * l).sum::<f64>() / n_mels as f64
            })
            .collect();
        frames_out.push(ceps);
    }

    Ok(CepstralTrack {
        hop_ms: spec.hop_ms,
        frames: frames_out,
    })
}

fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters as sparse (bin, weight) lists covering [0, sr/2].
fn mel_filterbank(n_mels: usize, fft_size: usize, sr: f64) -> Vec<Vec<(usize, f64)>> {
    let n_bins = fft_size / 2 + 1;
    let mel_max = hz_to_mel(sr / 2.0);
    let centers: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();

    let bin_hz = |bin: usize| bin as f64 * sr / fft_size as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (centers[m], centers[m + 1], centers[m + 2]);
            let mut filt = Vec::new();
            for bin in 0..n_bins {
                let f = bin_hz(bin);
                let w = if f > lo && f < mid {
                    (f - lo) / (mid - lo)
                } else if (f - mid).abs() < f64::EPSILON * mid.max(1.0) {
                    1.0
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                if w > 0.0 {
                    filt.push((bin, w));
                }
            }
            filt
        })
        .collect()
}

fn dct_basis(n_ceps: usize, n_mels: usize) -> Vec<Vec<f64>> {
    (0..n_ceps)
        .map(|k| {
            (0..n_mels)
                .map(|m| {
                    (std::f64::consts::PI * k as f64 * (m as f64 + 0.5) / n_mels as f64).cos()
                })
                .collect()
        })
        .collect()
}
