use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::{Waveform, SOURCE_RATE, TARGET_RATE};

const TAPS: usize = 127;
const FACTOR: usize = (SOURCE_RATE / TARGET_RATE) as usize;
/// Low-pass cutoff at 90% of the 4 kHz target Nyquist frequency.
const CUTOFF_HZ: f64 = 0.9 * TARGET_RATE as f64 / 2.0;

/// Blackman-windowed sinc low-pass with unit DC gain.
fn taps() -> &'static [f64; TAPS] {
    static TAPS_CELL: OnceLock<[f64; TAPS]> = OnceLock::new();
    TAPS_CELL.get_or_init(|| {
        let fc = CUTOFF_HZ / SOURCE_RATE as f64;
        let mid = (TAPS / 2) as f64;
        let mut h = [0.0; TAPS];
        for (n, h) in h.iter_mut().enumerate() {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let x = 2.0 * PI * n as f64 / (TAPS - 1) as f64;
            *h = sinc * (0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos());
        }
        let gain: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= gain);
        h
    })
}

/// 48 kHz → 8 kHz: zero-phase anti-aliasing filter, then keeps every sixth
/// sample. Output length is `⌈n / 6⌉`.
pub fn resample_to_8k(w: &Waveform) -> Result<Waveform> {
    if w.sample_rate() != SOURCE_RATE {
        return Err(Error::InvalidArgument(format!(
            "resampler expects {SOURCE_RATE} Hz input, got {} Hz",
            w.sample_rate()
        )));
    }
    let h = taps();
    let x = w.samples();
    let half = (TAPS / 2) as isize;
    let out_len = x.len().div_ceil(FACTOR);
    let out = (0..out_len)
        .map(|m| {
            let centre = (m * FACTOR) as isize;
            h.iter()
                .enumerate()
                .filter_map(|(j, &hj)| {
                    let idx = centre + half - j as isize;
                    (idx >= 0 && (idx as usize) < x.len()).then(|| hj * x[idx as usize])
                })
                .sum()
        })
        .collect();
    Waveform::new(out, TARGET_RATE)
}
