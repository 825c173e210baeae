//! Binary PPM rendering of relevance maps and perturbation curves.

use audiolrp::eval::{PerturbationCurve, StrategyKind};
use audiolrp::{Error, Result};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const RED: Rgb = [255, 0, 0];
pub const BLUE: Rgb = [0, 0, 255];
const BLACK: Rgb = [0, 0, 0];

/// An RGB raster, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Image {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, x: i64, y: i64, color: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = color;
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb, dash: Option<usize>) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        let mut step = 0usize;
        loop {
            if dash.is_none_or(|d| (step / d).is_multiple_of(2)) {
                self.set(x, y, color);
            }
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
            step += 1;
        }
    }

    /// Binary portable pixmap bytes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

fn blend(a: Rgb, b: Rgb, t: f64) -> Rgb {
    std::array::from_fn(|i| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8)
}

/// Diverging color of a relevance value already divided by max |R|: white
/// at zero, pure red at +1 and pure blue at -1.
pub fn diverging(t: f64, neutral: Rgb) -> Rgb {
    let t = t.clamp(-1.0, 1.0);
    if t >= 0.0 {
        blend(neutral, RED, t)
    } else {
        blend(neutral, BLUE, -t)
    }
}

/// Divides by the largest magnitude. Non-finite values are rejected; an
/// all-zero map stays zero.
fn normalize(relevance: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = relevance.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("relevance map contains {v}")));
    }
    let max = relevance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if max == 0.0 {
        vec![0.0; relevance.len()]
    } else {
        relevance.iter().map(|v| v / max).collect()
    })
}

/// Heatmap of a `(bins, frames)` relevance map stored bin-major. Low
/// frequencies end up at the bottom. With `underlay` (same layout, e.g.
/// the dB spectrogram) neutral pixels show the base image in gray instead
/// of white.
pub fn spectrogram_heatmap(relevance: &[f64], bins: usize, frames: usize, underlay: Option<&[f64]>) -> Result<Image> {
    if relevance.len() != bins * frames || underlay.is_some_and(|u| u.len() != relevance.len()) {
        return Err(Error::Shape(format!("heatmap expects {bins}x{frames} values")));
    }
    let t = normalize(relevance)?;
    let gray = match underlay {
        Some(u) => {
            let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            let span = if hi > lo { hi - lo } else { 1.0 };
            Some(u.iter().map(|v| (((v - lo) / span) * 255.0).round() as u8).collect::<Vec<_>>())
        }
        None => None,
    };
    let mut img = Image::filled(frames, bins, WHITE);
    for b in 0..bins {
        let y = bins - 1 - b;
        for f in 0..frames {
            let i = b * frames + f;
            let neutral = gray.as_ref().map_or(WHITE, |g| [g[i]; 3]);
            img.pixels[y * frames + f] = diverging(t[i], neutral);
        }
    }
    Ok(img)
}

pub const WAVEFORM_HEIGHT: usize = 256;

/// Waveform drawn as a trace whose color at every sample encodes that
/// sample's relevance; neutral samples are drawn in gray.
pub fn waveform_heatmap(samples: &[f64], relevance: &[f64]) -> Result<Image> {
    if samples.len() != relevance.len() || samples.is_empty() {
        return Err(Error::Shape("waveform and relevance lengths differ".into()));
    }
    let t = normalize(relevance)?;
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak = if peak > 0.0 { peak } else { 1.0 };
    let h = WAVEFORM_HEIGHT as i64;
    let row = |v: f64| ((0.5 - 0.5 * v / peak) * (h - 1) as f64).round() as i64;
    let mut img = Image::filled(samples.len(), WAVEFORM_HEIGHT, WHITE);
    let mut prev = row(samples[0]);
    for (x, (&v, &r)) in samples.iter().zip(&t).enumerate() {
        let y = row(v);
        let color = diverging(r, [160, 160, 160]);
        img.line((x as i64, prev), (x as i64, y), color, None);
        prev = y;
    }
    Ok(img)
}

const PLOT_W: usize = 640;
const PLOT_H: usize = 400;
const MARGIN: i64 = 40;

pub fn strategy_color(kind: StrategyKind) -> Rgb {
    match kind {
        StrategyKind::Random => [120, 120, 120],
        StrategyKind::Amplitude => [0, 150, 0],
        StrategyKind::Relevance => RED,
    }
}

/// Accuracy against perturbed fraction, one polyline per strategy, with a
/// dashed black chance line. Both axes span [0, 1].
pub fn curve_plot(curve: &PerturbationCurve) -> Image {
    let mut img = Image::filled(PLOT_W, PLOT_H, WHITE);
    let (w, h) = (PLOT_W as i64 - 2 * MARGIN, PLOT_H as i64 - 2 * MARGIN);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x.clamp(0.0, 1.0) * w as f64).round() as i64,
            MARGIN + h - (y.clamp(0.0, 1.0) * h as f64).round() as i64,
        )
    };
    img.line(to_px(0.0, 0.0), to_px(1.0, 0.0), BLACK, None);
    img.line(to_px(0.0, 0.0), to_px(0.0, 1.0), BLACK, None);
    for k in 1..=10 {
        let v = k as f64 / 10.0;
        let (x, y0) = to_px(v, 0.0);
        img.line((x, y0), (x, y0 + 4), BLACK, None);
        let (x0, y) = to_px(0.0, v);
        img.line((x0 - 4, y), (x0, y), BLACK, None);
    }
    img.line(to_px(0.0, curve.chance), to_px(1.0, curve.chance), BLACK, Some(6));

    let mut kinds: Vec<StrategyKind> = Vec::new();
    for p in &curve.points {
        if !kinds.contains(&p.strategy) {
            kinds.push(p.strategy);
        }
    }
    for kind in kinds {
        let mut pts: Vec<(f64, f64)> = curve
            .points
            .iter()
            .filter(|p| p.strategy == kind)
            .map(|p| (p.fraction, p.accuracy))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = strategy_color(kind);
        for pair in pts.windows(2) {
            img.line(to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1), color, None);
        }
        for &(x, y) in &pts {
            let (px, py) = to_px(x, y);
            for d in -2..=2 {
                img.line((px - 2, py + d), (px + 2, py + d), color, None);
            }
        }
    }
    img
}
