use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

use super::pad::{PaddedSignal, PADDED_LEN};
use super::TARGET_RATE;

pub const SEGMENT: usize = 455;
pub const HOP: usize = 35;
pub const BINS: usize = SEGMENT / 2 + 1;
pub const FRAMES: usize = PADDED_LEN.div_ceil(HOP) + 1;
pub const CROP: usize = 227;
/// Decibel floor applied to magnitudes before taking the logarithm.
pub const DB_FLOOR: f64 = 1e-10;

/// Frequency × time matrix stored row-major (`bins` rows of `frames` values).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    bins: usize,
    frames: usize,
}

impl Spectrogram {
    pub fn new(data: Vec<f64>, bins: usize, frames: usize) -> Result<Self> {
        if bins == 0 || frames == 0 || data.len() != bins * frames {
            return Err(Error::Shape(format!(
                "spectrogram of {bins}x{frames} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Spectrogram { data, bins, frames })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.data[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn hz_per_bin(&self) -> f64 {
        TARGET_RATE as f64 / SEGMENT as f64
    }

    pub fn seconds_per_frame(&self) -> f64 {
        HOP as f64 / TARGET_RATE as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(bins, frames, 1)` network input.
    pub fn to_tensor<F: Real>(&self) -> Tensor<F> {
        Tensor::from_f64(vec![self.bins, self.frames, 1], &self.data).expect("consistent shape")
    }

    pub fn from_tensor<F: Real>(t: &Tensor<F>) -> Result<Self> {
        match *t.shape() {
            [bins, frames, 1] => Spectrogram::new(t.to_f64_vec(), bins, frames),
            ref s => Err(Error::Shape(format!("expected (bins, frames, 1), got {s:?}"))),
        }
    }
}

/// Periodic Hann window of the segment length.
pub fn hann() -> &'static [f64] {
    static WINDOW: OnceLock<Vec<f64>> = OnceLock::new();
    WINDOW.get_or_init(|| {
        (0..SEGMENT)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / SEGMENT as f64).cos())
            .collect()
    })
}

fn plan() -> Arc<dyn Fft<f64>> {
    static PLAN: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    PLAN.get_or_init(|| FftPlanner::new().plan_fft_forward(SEGMENT)).clone()
}

/// Linear-magnitude STFT with centred frames: frame `t` covers input
/// samples `[35t - 227, 35t + 228)`, out-of-range samples read as zero.
pub fn stft_spectrogram(p: &PaddedSignal) -> Spectrogram {
    let x = p.samples();
    let w = hann();
    let fft = plan();
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); SEGMENT];
    let mut data = vec![0.0; BINS * FRAMES];
    let half = (SEGMENT / 2) as isize;
    for t in 0..FRAMES {
        let start = (t * HOP) as isize - half;
        for (n, c) in buf.iter_mut().enumerate() {
            let idx = start + n as isize;
            let v = if idx >= 0 && (idx as usize) < x.len() {
                x[idx as usize] * w[n]
            } else {
                0.0
            };
            *c = Complex::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf[..BINS].iter().enumerate() {
            data[k * FRAMES + t] = c.norm();
        }
    }
    Spectrogram {
        data,
        bins: BINS,
        frames: FRAMES,
    }
}

/// `20·log10(max(m, 1e-10))`, reference amplitude 1.
pub fn to_decibels(s: &Spectrogram) -> Spectrogram {
    Spectrogram {
        data: s.data.iter().map(|&m| 20.0 * m.max(DB_FLOOR).log10()).collect(),
        ..*s
    }
}

/// Drops the highest frequency bin and the last three frames.
pub fn crop_227(s: &Spectrogram) -> Result<Spectrogram> {
    if s.bins != BINS || s.frames != FRAMES {
        return Err(Error::Shape(format!(
            "crop expects {BINS}x{FRAMES}, got {}x{}",
            s.bins, s.frames
        )));
    }
    let data = (0..CROP).flat_map(|r| s.row(r)[..CROP].iter().copied()).collect();
    Ok(Spectrogram {
        data,
        bins: CROP,
        frames: CROP,
    })
}

/// Full spectrogram front end: STFT, decibels, crop.
pub fn spectrogram_input(p: &PaddedSignal) -> Spectrogram {
    crop_227(&to_decibels(&stft_spectrogram(p))).expect("STFT shape is fixed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{pad_at, Waveform};

    #[test]
    fn shape_constants() {
        assert_eq!((BINS, FRAMES), (228, 230));
    }

    #[test]
    fn zero_signal() {
        let p = pad_at(&Waveform::new(vec![0.0; 10], 8000).unwrap(), 0).unwrap();
        let s = stft_spectrogram(&p);
        assert_eq!((s.bins(), s.frames()), (228, 230));
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decibel_points() {
        let s = Spectrogram::new(vec![1.0, 0.0, 10.0], 1, 3).unwrap();
        let d = to_decibels(&s);
        assert_eq!(d.data(), &[0.0, -200.0, 20.0]);
    }

    #[test]
    fn crop_markers() {
        let mut s = Spectrogram::new(vec![0.0; BINS * FRAMES], BINS, FRAMES).unwrap();
        s.data_mut()[227 * FRAMES + 5] = 7.0;
        s.data_mut()[3 * FRAMES + 229] = 8.0;
        s.data_mut()[3 * FRAMES + 226] = 9.0;
        let c = crop_227(&s).unwrap();
        assert_eq!((c.bins(), c.frames()), (227, 227));
        assert!(!c.data().contains(&7.0));
        assert!(!c.data().contains(&8.0));
        assert_eq!(c.get(3, 226), 9.0);
        assert!(crop_227(&c).is_err());
    }
}
