//! Reference-signal toolkit for fine-grained prosody transfer.
//!
//! The pipeline: extract frame-level prosodic features from audio
//! ([`dsp`]), aggregate them per phoneme using forced-alignment labels
//! ([`align`], [`prosody`]) or CTC posteriorgrams when no transcript exists
//! ([`textless`]), encode the aggregated vectors with a small variational
//! reference encoder ([`vae`]), and evaluate transfer objectively ([`eval`])
//! and from listening-test scores ([`mushra`]).

pub mod align;
pub mod dsp;
pub mod eval;
pub mod manifest;
pub mod mushra;
pub mod prosody;
pub mod textless;
pub mod vae;
pub mod wav;

pub use align::{parse_alignment, tri_partition, PhoneAlignment, PhoneSegment};
pub use dsp::{
    compute_cepstra, estimate_f0, frame_signal, CepstralTrack, FrameSpec, PitchTrack, Waveform,
};
pub use prosody::{
    aggregate_utterance, collect_speaker_stats, normalize, ProsodyVector, SpeakerStats,
};
pub use eval::{align_f0, dtw, evaluate_utterance, f0_metrics, EvalReport, WarpPath};
pub use manifest::{validate_manifest, Manifest};
pub use mushra::{holm_correction, mushra_medians, paired_t, wilcoxon_signed_rank, MushraScores};
pub use textless::{greedy_emissions, insert_pauses, Posteriorgram, TextlessRefVector};
pub use vae::{
    encode, grad_check, kl_active, kl_divergence, kl_scale, reparam_sample, train,
    EncoderParams, GaussianPosterior, TrainConfig,
};
