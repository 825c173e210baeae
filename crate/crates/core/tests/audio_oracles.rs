use std::f64::consts::PI;

use audiolrp::audio::{
    crop_227, pad_at, pad_random, resample_to_8k, spectrogram_input, stft_spectrogram, to_decibels,
    Spectrogram, Waveform,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/naive_dft.rs"]
mod naive_dft;

use naive_dft::{naive_frame, sine};

#[test]
fn stft_matches_naive_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..8000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = pad_at(&Waveform::new(x.clone(), 8000).unwrap(), 0).unwrap();
    let s = stft_spectrogram(&p);
    assert_eq!((s.bins(), s.frames()), (228, 230));
    let mut worst: f64 = 0.0;
    for t in 0..230 {
        let oracle = naive_frame(&x, t);
        for (k, o) in oracle.iter().enumerate() {
            worst = worst.max((s.get(k, t) - o).abs());
        }
    }
    assert!(worst < 1e-6, "max abs error {worst:e}");
}

#[test]
fn one_kilohertz_peaks_at_bin_57() {
    let p = pad_at(&Waveform::new(sine(1000.0, 8000, 8000, 0.5), 8000).unwrap(), 0).unwrap();
    let s = stft_spectrogram(&p);
    for t in 0..s.frames() {
        let peak = (0..s.bins()).max_by(|&a, &b| s.get(a, t).total_cmp(&s.get(b, t))).unwrap();
        assert_eq!(peak, 57, "frame {t}");
    }
}

#[test]
fn metadata() {
    let p = pad_at(&Waveform::new(vec![0.1; 100], 8000).unwrap(), 0).unwrap();
    let s = spectrogram_input(&p);
    assert_eq!((s.bins(), s.frames()), (227, 227));
    assert!((s.hz_per_bin() - 8000.0 / 455.0).abs() < 1e-12);
    assert!((s.seconds_per_frame() - 35.0 / 8000.0).abs() < 1e-15);
}

/// Least-squares amplitude of a sinusoid of known frequency.
fn fitted_amplitude(x: &[f64], freq: f64, rate: f64) -> f64 {
    let (mut ss, mut cc, mut sc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let (s, c) = (2.0 * PI * freq * i as f64 / rate).sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += v * s;
        xc += v * c;
    }
    let det = ss * cc - sc * sc;
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    (a * a + b * b).sqrt()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[test]
fn resampling_preserves_passband_sine() {
    let w = Waveform::new(sine(1000.0, 48_000, 48_000, 0.7), 48_000).unwrap();
    let out = resample_to_8k(&w).unwrap();
    assert_eq!(out.len(), 8000);
    let interior = &out.samples()[20..7980];
    let amp = fitted_amplitude(interior, 1000.0, 8000.0);
    assert!((amp - 0.7).abs() / 0.7 < 0.01, "amplitude {amp}");
}

#[test]
fn resampling_rejects_above_nyquist() {
    let input = sine(5000.0, 48_000, 48_000, 0.7);
    let out = resample_to_8k(&Waveform::new(input.clone(), 48_000).unwrap()).unwrap();
    let ratio = rms(&out.samples()[20..7980]) / rms(&input);
    assert!(ratio < 0.05, "rms ratio {ratio}");
}

#[test]
fn padding_offsets_are_uniform() {
    let w = Waveform::new(vec![0.5; 4000], 8000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bins = [0usize; 10];
    for _ in 0..10_000 {
        let off = pad_random(&w, &mut rng).unwrap().offset();
        assert!(off <= 4000);
        bins[(off * 10 / 4001).min(9)] += 1;
    }
    let expected = 1000.0;
    let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // Critical value of chi-square with 9 degrees of freedom at 0.01.
    assert!(chi2 < 21.666, "chi-square {chi2}, bins {bins:?}");
}

#[test]
fn padded_region_stays_exactly_zero_after_resampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let raw: Vec<f64> = (0..24_000).map(|_| rng.random_range(-0.9..0.9)).collect();
    let down = resample_to_8k(&Waveform::new(raw, 48_000).unwrap()).unwrap();
    let p = pad_random(&down, &mut rng).unwrap();
    let range = p.signal_range();
    for (i, &v) in p.samples().iter().enumerate() {
        if !range.contains(&i) {
            assert_eq!(v.to_bits(), 0.0f64.to_bits(), "sample {i}");
        }
    }
}

#[test]
fn pipeline_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let w = Waveform::new(sine(440.0, 48_000, 20_000, 0.3), 48_000).unwrap();
        let p = pad_random(&resample_to_8k(&w).unwrap(), &mut rng).unwrap();
        let s = spectrogram_input(&p);
        (p, s.data().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn crop_is_identity_on_kept_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<f64> = (0..228 * 230).map(|_| rng.random()).collect();
    let s = Spectrogram::new(data, 228, 230).unwrap();
    let c = crop_227(&s).unwrap();
    for r in 0..227 {
        for t in 0..227 {
            assert_eq!(c.get(r, t), s.get(r, t));
        }
    }
}

proptest! {
    #[test]
    fn decibels_increase_strictly_above_floor(a in 1e-9f64..1e6, b in 1e-9f64..1e6) {
        prop_assume!(a < b);
        let s = Spectrogram::new(vec![a, b], 1, 2).unwrap();
        let d = to_decibels(&s);
        prop_assert!(d.data()[0] < d.data()[1]);
    }

    #[test]
    fn any_signal_gives_fixed_shape(len in 1usize..=8000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = pad_random(&Waveform::new(x, 8000).unwrap(), &mut rng).unwrap();
        let s = stft_spectrogram(&p);
        prop_assert_eq!((s.bins(), s.frames()), (228, 230));
        prop_assert!(s.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
