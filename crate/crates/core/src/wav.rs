//! Mono WAV input/output, wrapping `hound`.
//!
//! Accepts the two encodings common feature-extraction frontends produce,
//! 16-bit signed integer PCM and 32-bit IEEE float, and exposes samples as
//! `f64` in [-1, 1].

use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

use crate::dsp::Waveform;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("malformed wav file: {0}")]
    Malformed(#[from] hound::Error),
    #[error("unsupported wav encoding: {0}")]
    Unsupported(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(#[from] crate::dsp::DspError),
}

/// Parse a mono PCM16 or float32 WAV file from raw bytes.
pub fn parse_wav(data: &[u8]) -> Result<Waveform, WavError> {
    let mut reader = WavReader::new(Cursor::new(data))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::Unsupported(format!(
            "{} channels (mono required)",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(WavError::Unsupported(format!(
                "{fmt:?} with {bits} bits (PCM16 or float32 required)"
            )))
        }
    };
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

pub fn read_wav<P: AsRef<Path>>(path: P) -> Result<Waveform, WavError> {
    let data = std::fs::read(path).map_err(hound::Error::IoError)?;
    parse_wav(&data)
}

/// Encode a waveform as 16-bit PCM WAV bytes. Samples are clamped to [-1, 1].
pub fn encode_wav_pcm16(wav: &Waveform) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wav.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("in-memory wav writer");
        for &s in &wav.samples {
            let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer.write_sample(v).expect("in-memory wav write");
        }
        writer.finalize().expect("in-memory wav finalize");
    }
    cursor.into_inner()
}

/// Encode a waveform as 32-bit IEEE float WAV bytes.
pub fn encode_wav_f32(wav: &Waveform) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wav.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("in-memory wav writer");
        for &s in &wav.samples {
            writer.write_sample(s as f32).expect("in-memory wav write");
        }
        writer.finalize().expect("in-memory wav finalize");
    }
    cursor.into_inner()
}

pub fn write_wav_pcm16<P: AsRef<Path>>(path: P, wav: &Waveform) -> Result<(), WavError> {
    std::fs::write(path, encode_wav_pcm16(wav)).map_err(hound::Error::IoError)?;
    Ok(())
}
