use crate::audio::Spectrogram;
use crate::error::{Error, Result};

/// Stretches the frequency axis by `factor`: output row `f` samples the
/// input at fractional row `f / factor` by linear interpolation. Rows that
/// would read beyond the last input row take the spectrogram minimum.
pub fn scale_frequency_axis(s: &Spectrogram, factor: f64) -> Result<Spectrogram> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency scale factor {factor} must be positive")));
    }
    let (bins, frames) = (s.bins(), s.frames());
    let floor = s.min();
    let last = (bins - 1) as f64;
    let mut out = Vec::with_capacity(bins * frames);
    for f in 0..bins {
        let src = f as f64 / factor;
        if src > last {
            out.extend(std::iter::repeat_n(floor, frames));
            continue;
        }
        let lo = src.floor() as usize;
        let frac = src - lo as f64;
        if frac == 0.0 {
            out.extend_from_slice(s.row(lo));
        } else {
            let (a, b) = (s.row(lo), s.row(lo + 1));
            out.extend(a.iter().zip(b).map(|(&a, &b)| a + frac * (b - a)));
        }
    }
    Spectrogram::new(out, bins, frames)
}
