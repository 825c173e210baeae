//! Term-by-term windowed DFT, the reference for the FFT-based STFT.
#![allow(dead_code)]

use std::f64::consts::PI;

pub fn sine(freq: f64, rate: u32, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect()
}

/// Windowed DFT of one centred frame, evaluated term by term.
pub fn naive_frame(x: &[f64], frame: usize) -> Vec<f64> {
    let n = 455usize;
    let start = frame as isize * 35 - 227;
    let framed: Vec<f64> = (0..n)
        .map(|i| {
            let idx = start + i as isize;
            let v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
            v * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        })
        .collect();
    (0..228)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in framed.iter().enumerate() {
                let phase = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += v * phase.cos();
                im += v * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

