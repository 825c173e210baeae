use std::io::{Read, Seek};
use std::path::Path;

use crate::error::{Error, Result};

use super::{SOURCE_RATE, TARGET_RATE};

/// Mono PCM audio scaled to [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SOURCE_RATE && sample_rate != TARGET_RATE {
            return Err(Error::UnsupportedFormat(format!(
                "sample rate {sample_rate} Hz (expected {SOURCE_RATE} or {TARGET_RATE})"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty waveform".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Decodes a 16-bit PCM mono WAV file.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Malformed(m) => Error::Malformed(format!("{}: {m}", path.display())),
        Error::UnsupportedFormat(m) => Error::UnsupportedFormat(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn decode_wav<R: Read + Seek>(reader: R) -> Result<Waveform> {
    let mut wav = hound::WavReader::new(reader).map_err(|e| match e {
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV variant".into()),
        other => Error::Malformed(other.to_string()),
    })?;
    let spec = wav.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!("{} channels (expected mono)", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}-bit {:?} samples (expected 16-bit PCM)",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let declared = wav.len() as usize;
    let samples = wav
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::Malformed(format!("data chunk shorter than declared: {e}")))?;
    if samples.len() != declared {
        return Err(Error::Malformed(format!(
            "header declares {declared} samples, found {}",
            samples.len()
        )));
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Encodes as 16-bit PCM mono, rounding and saturating.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).map_err(|e| Error::Malformed(e.to_string()))?;
        for &s in wave.samples() {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v).map_err(|e| Error::Malformed(e.to_string()))?;
        }
        w.finalize().map_err(|e| Error::Malformed(e.to_string()))?;
    }
    crate::blob::write_atomic(path, &cursor.into_inner())
}
