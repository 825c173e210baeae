use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AudioRecord, AudioSource, Gender};
use crate::audio::{Waveform, PADDED_LEN, TARGET_RATE};
use crate::error::{Error, Result};

/// Harmonic "voice" with a class-dependent fundamental.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenderSynth {
    /// Fundamental of class 0 (male).
    pub f0_low: f64,
    /// Fundamental of class 1 (female).
    pub f0_high: f64,
    pub harmonics: usize,
    /// Relative spread of speaker fundamentals around the class centre.
    pub speaker_spread: f64,
}

impl Default for GenderSynth {
    fn default() -> Self {
        GenderSynth {
            f0_low: 120.0,
            f0_high: 220.0,
            harmonics: 5,
            speaker_spread: 0.2,
        }
    }
}

/// Ten class prototypes. Each signal mixes a class-independent low "voice"
/// (fundamental drawn from `background_hz`, plus its octave, optionally
/// with a slow loudness envelope) with class `c`'s carrier
/// `base_hz + c * step_hz`, amplitude-modulated at `am_base_hz + c * am_step_hz`.
/// The carrier spans the whole signal, or one Hann-windowed burst when
/// `burst_len > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitSynth {
    pub base_hz: f64,
    pub step_hz: f64,
    pub am_base_hz: f64,
    pub am_step_hz: f64,
    pub am_depth: f64,
    /// Burst duration in samples; 0 makes the burst span the whole signal.
    pub burst_len: usize,
    pub burst_level: f64,
    pub background_level: f64,
    pub background_hz: [f64; 2],
    /// Rate of the background's slow loudness envelope.
    pub syllable_hz: f64,
    /// Depth of that envelope; 0 keeps the background at constant level.
    pub syllable_depth: f64,
}

impl Default for DigitSynth {
    fn default() -> Self {
        DigitSynth {
            base_hz: 400.0,
            step_hz: 300.0,
            am_base_hz: 20.0,
            am_step_hz: 8.0,
            am_depth: 0.5,
            burst_len: 0,
            burst_level: 0.7,
            background_level: 1.0,
            background_hz: [80.0, 150.0],
            syllable_hz: 3.0,
            syllable_depth: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// 2 for the gender-like task, 10 for the digit-like task.
    pub classes: usize,
    pub per_class: usize,
    /// Distinct speakers per class (gender) or overall (digit).
    pub speakers: usize,
    /// Id of the first generated speaker, so that separately generated
    /// sets can use disjoint speaker ids.
    pub first_speaker: u32,
    pub min_len: usize,
    pub max_len: usize,
    /// Relative per-example frequency jitter.
    pub jitter: f64,
    /// Relative per-speaker offset of the digit-like carriers.
    pub speaker_spread: f64,
    pub min_amplitude: f64,
    pub max_amplitude: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub gender: GenderSynth,
    pub digit: DigitSynth,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 10,
            per_class: 50,
            speakers: 12,
            first_speaker: 0,
            min_len: 3000,
            max_len: 6000,
            jitter: 0.02,
            speaker_spread: 0.02,
            min_amplitude: 0.3,
            max_amplitude: 0.8,
            noise: 0.01,
            gender: GenderSynth::default(),
            digit: DigitSynth::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic data: {m}")));
        if self.classes != 2 && self.classes != 10 {
            return bad(format!("classes must be 2 or 10, got {}", self.classes));
        }
        if self.per_class == 0 || self.speakers == 0 {
            return bad("per_class and speakers must be positive".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len || self.max_len > PADDED_LEN {
            return bad(format!(
                "length range {}..={} must lie within 1..={PADDED_LEN}",
                self.min_len, self.max_len
            ));
        }
        let nonneg = [
            self.jitter,
            self.speaker_spread,
            self.gender.speaker_spread,
            self.noise,
            self.min_amplitude,
        ];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0)
            || !(self.min_amplitude <= self.max_amplitude && self.max_amplitude <= 1.0)
        {
            return bad("jitter, spread, noise and amplitudes must be finite, non-negative, amplitudes at most 1".into());
        }
        let nyquist = TARGET_RATE as f64 / 2.0;
        let top = match self.classes {
            2 => self.gender.f0_high.max(self.gender.f0_low) * self.gender.harmonics as f64,
            _ => self.digit.base_hz + 9.0 * self.digit.step_hz,
        };
        let spread = if self.classes == 2 { self.gender.speaker_spread } else { self.speaker_spread };
        if spread >= 1.0 || top * (1.0 + self.jitter + spread) >= nyquist {
            return bad(format!("highest component {top} Hz reaches the {nyquist} Hz Nyquist limit"));
        }
        let d = &self.digit;
        if !(d.background_hz[0] > 0.0 && d.background_hz[0] <= d.background_hz[1])
            || d.background_level < 0.0
            || d.burst_level <= 0.0
            || !(0.0..=1.0).contains(&d.am_depth)
            || !(0.0..=1.0).contains(&d.syllable_depth)
            || !(d.syllable_hz >= 0.0)
        {
            return bad("digit background, burst level or modulation depth out of range".into());
        }
        if self.gender.harmonics == 0 || self.gender.f0_low <= 0.0 || self.digit.base_hz <= 0.0 {
            return bad("frequencies and harmonic count must be positive".into());
        }
        Ok(())
    }
}

fn fade(i: usize, len: usize) -> f64 {
    const RAMP: usize = 200;
    let ramp = RAMP.min(len / 2).max(1);
    let d = i.min(len - 1 - i);
    if d >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * d as f64 / ramp as f64).cos()
    }
}

/// Generates `classes × per_class` in-memory 8 kHz records ordered by take,
/// then class. Gender-like records use class 0 for male and 1 for female
/// speakers; digit-like records carry the class as their digit.
pub fn synth_generate(config: &SynthConfig, rng: &mut impl Rng) -> Result<Vec<AudioRecord>> {
    config.validate()?;
    let noise = Normal::new(0.0, config.noise).map_err(|e| Error::Config(e.to_string()))?;
    let rate = TARGET_RATE as f64;
    let spread = if config.classes == 2 { config.gender.speaker_spread } else { config.speaker_spread };
    let groups = if config.classes == 2 { 2 } else { 1 };
    let speaker_scale: Vec<f64> = (0..groups * config.speakers)
        .map(|_| 1.0 + spread * rng.random_range(-1.0..=1.0))
        .collect();
    let mut out = Vec::with_capacity(config.classes * config.per_class);
    for take in 0..config.per_class {
        for class in 0..config.classes {
            let slot = (take % config.speakers) as u32;
            let (local, gender, digit) = if config.classes == 2 {
                let gender = if class == 0 { Gender::Male } else { Gender::Female };
                (class as u32 * config.speakers as u32 + slot, gender, (take % 10) as u8)
            } else {
                let gender = if slot.is_multiple_of(2) { Gender::Female } else { Gender::Male };
                (slot, gender, class as u8)
            };
            let speaker = config.first_speaker + local;
            let len = rng.random_range(config.min_len..=config.max_len);
            let amplitude = rng.random_range(config.min_amplitude..=config.max_amplitude);
            let scale = speaker_scale[local as usize] * (1.0 + config.jitter * rng.random_range(-1.0..=1.0));
            let phase = rng.random_range(0.0..2.0 * PI);
            let mut samples: Vec<f64> = if config.classes == 2 {
                let g = &config.gender;
                let f0 = if class == 0 { g.f0_low } else { g.f0_high } * scale;
                let norm: f64 = (1..=g.harmonics).map(|h| 1.0 / h as f64).sum();
                (0..len)
                    .map(|i| {
                        let t = i as f64 / rate;
                        let v: f64 = (1..=g.harmonics)
                            .map(|h| (2.0 * PI * f0 * h as f64 * t + h as f64 * phase).sin() / h as f64)
                            .sum();
                        v / norm
                    })
                    .collect()
            } else {
                let d = &config.digit;
                let carrier = (d.base_hz + class as f64 * d.step_hz) * scale;
                let am = d.am_base_hz + class as f64 * d.am_step_hz;
                let burst = if d.burst_len == 0 { len } else { d.burst_len.min(len) };
                let start = rng.random_range(0..=len - burst);
                let voice = rng.random_range(d.background_hz[0]..=d.background_hz[1]);
                let voice_phase = rng.random_range(0.0..2.0 * PI);
                let syllable_phase = rng.random_range(0.0..2.0 * PI);
                let norm = d.background_level * 1.5 + d.burst_level;
                (0..len)
                    .map(|i| {
                        let t = i as f64 / rate;
                        let loudness =
                            1.0 - d.syllable_depth * 0.5 * (1.0 - (2.0 * PI * d.syllable_hz * t + syllable_phase).cos());
                        let bg = loudness
                            * ((2.0 * PI * voice * t + voice_phase).sin()
                                + 0.5 * (4.0 * PI * voice * t + voice_phase).sin());
                        let tone = if (start..start + burst).contains(&i) {
                            let u = (i - start) as f64 / burst as f64;
                            let window = if d.burst_len == 0 { 1.0 } else { 0.5 - 0.5 * (2.0 * PI * u).cos() };
                            let env = 1.0 - d.am_depth * 0.5 * (1.0 - (2.0 * PI * am * t).cos());
                            window * env * (2.0 * PI * carrier * t + phase).sin()
                        } else {
                            0.0
                        };
                        (d.background_level * bg + d.burst_level * tone) / norm
                    })
                    .collect()
            };
            for (i, s) in samples.iter_mut().enumerate() {
                let v = amplitude * fade(i, len) * *s + noise.sample(rng);
                *s = v.clamp(-1.0, 1.0 - 1.0 / 32768.0);
            }
            out.push(AudioRecord {
                source: AudioSource::Memory(Arc::new(Waveform::new(samples, TARGET_RATE)?)),
                digit,
                speaker,
                gender,
                take: take as u32,
                fold: None,
            });
        }
    }
    Ok(out)
}
