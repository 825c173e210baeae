//! Convolution and pooling kernels over channels-last buffers.
//!
//! 1-D layers are handled as 2-D layers with a unit-height image, so a
//! `(length, channels)` signal is a `(1, length, channels)` image.

use crate::tensor::{gemm, MatRef, Real};

use super::spec::LayerSpec;

/// Geometry of a convolution over an `(in_h, in_w, channels)` image.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_channels: usize,
}

impl ConvGeom {
    /// Geometry for a conv layer given its input and output shapes.
    pub fn of(layer: &LayerSpec, input: &[usize], output: &[usize]) -> Option<Self> {
        match *layer {
            LayerSpec::Conv1d {
                kernel,
                stride,
                padding,
                out_channels,
                ..
            } => Some(ConvGeom {
                in_h: 1,
                in_w: input[0],
                channels: input[1],
                kh: 1,
                kw: kernel,
                stride_h: 1,
                stride_w: stride,
                pad_h: 0,
                pad_w: padding,
                out_h: 1,
                out_w: output[0],
                out_channels,
            }),
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                out_channels,
                ..
            } => Some(ConvGeom {
                in_h: input[0],
                in_w: input[1],
                channels: input[2],
                kh: kernel,
                kw: kernel,
                stride_h: stride,
                stride_w: stride,
                pad_h: padding,
                pad_w: padding,
                out_h: output[0],
                out_w: output[1],
                out_channels,
            }),
            _ => None,
        }
    }

    /// Number of output positions.
    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Receptive-field size, i.e. the row length of the unrolled patches.
    pub fn patch(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    /// Input pixel covered by kernel tap `(dy, dx)` at output `(oy, ox)`.
    #[inline]
    fn source(&self, oy: usize, ox: usize, dy: usize, dx: usize) -> Option<usize> {
        let iy = (oy * self.stride_h + dy).checked_sub(self.pad_h)?;
        let ix = (ox * self.stride_w + dx).checked_sub(self.pad_w)?;
        (iy < self.in_h && ix < self.in_w).then_some(iy * self.in_w + ix)
    }

    /// A 1-D convolution's patches are overlapping contiguous windows of the
    /// zero-padded input, so no unrolled copy is needed.
    fn is_sliding_1d(&self) -> bool {
        self.in_h == 1 && self.kh == 1 && self.pad_h == 0
    }

    /// Unrolls the input into a `positions × patch` matrix. Columns are
    /// tap-major, `(dy, dx, channel)`.
    pub fn unroll<F: Real>(&self, input: &[F]) -> Unrolled<F> {
        let c = self.channels;
        let patch = self.patch();
        if self.is_sliding_1d() {
            let mut buf = vec![F::zero(); (self.in_w + 2 * self.pad_w) * c];
            buf[self.pad_w * c..][..input.len()].copy_from_slice(input);
            return Unrolled {
                buf,
                rows: self.positions(),
                cols: patch,
                row_stride: self.stride_w * c,
            };
        }
        let mut buf = vec![F::zero(); self.positions() * patch];
        for oy in 0..self.out_h {
            for ox in 0..self.out_w {
                let row = &mut buf[(oy * self.out_w + ox) * patch..][..patch];
                for dy in 0..self.kh {
                    for dx in 0..self.kw {
                        if let Some(pix) = self.source(oy, ox, dy, dx) {
                            row[(dy * self.kw + dx) * c..][..c]
                                .copy_from_slice(&input[pix * c..][..c]);
                        }
                    }
                }
            }
        }
        Unrolled {
            buf,
            rows: self.positions(),
            cols: patch,
            row_stride: patch,
        }
    }

    /// Adjoint of [`ConvGeom::unroll`]: scatters tap-major patch rows back
    /// onto the input grid, summing overlapping contributions.
    pub fn col2im<F: Real>(&self, cols: &[F], out: &mut [F]) {
        let c = self.channels;
        let patch = self.patch();
        if self.is_sliding_1d() {
            let mut padded = vec![F::zero(); (self.in_w + 2 * self.pad_w) * c];
            for (t, row) in cols.chunks_exact(patch).enumerate() {
                let dst = &mut padded[t * self.stride_w * c..][..patch];
                for (d, &v) in dst.iter_mut().zip(row) {
                    *d += v;
                }
            }
            for (o, &v) in out.iter_mut().zip(&padded[self.pad_w * c..]) {
                *o += v;
            }
            return;
        }
        for oy in 0..self.out_h {
            for ox in 0..self.out_w {
                let row = &cols[(oy * self.out_w + ox) * patch..][..patch];
                for dy in 0..self.kh {
                    for dx in 0..self.kw {
                        if let Some(pix) = self.source(oy, ox, dy, dx) {
                            let src = &row[(dy * self.kw + dx) * c..][..c];
                            for (d, &v) in out[pix * c..][..c].iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Reorders a `(out, in, kh, kw)` weight tensor to `(out, kh, kw, in)`,
    /// matching the unrolled column order.
    pub fn tap_major<F: Real>(&self, weight: &[F]) -> Vec<F> {
        let (c, taps) = (self.channels, self.kh * self.kw);
        let mut out = vec![F::zero(); weight.len()];
        for (o_w, o_t) in weight.chunks_exact(c * taps).zip(out.chunks_exact_mut(c * taps)) {
            for ch in 0..c {
                for t in 0..taps {
                    o_t[t * c + ch] = o_w[ch * taps + t];
                }
            }
        }
        out
    }

    /// Adds a tap-major weight gradient into a `(out, in, kh, kw)` buffer.
    fn add_from_tap_major<F: Real>(&self, tap: &[F], weight: &mut [F]) {
        let (c, taps) = (self.channels, self.kh * self.kw);
        for (o_t, o_w) in tap.chunks_exact(c * taps).zip(weight.chunks_exact_mut(c * taps)) {
            for ch in 0..c {
                for t in 0..taps {
                    o_w[ch * taps + t] += o_t[t * c + ch];
                }
            }
        }
    }

    /// Convolution output (`positions × out_channels`, channels-last).
    pub fn forward<F: Real>(&self, cols: &Unrolled<F>, weight: &[F], bias: Option<&[F]>) -> Vec<F> {
        let wt = self.tap_major(weight);
        let mut out = vec![F::zero(); self.positions() * self.out_channels];
        gemm(
            F::one(),
            cols.view(),
            MatRef::new(&wt, self.out_channels, self.patch()).t(),
            F::zero(),
            &mut out,
        );
        if let Some(bias) = bias {
            for row in out.chunks_exact_mut(self.out_channels) {
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
        }
        out
    }

    /// Applies the transpose of the convolution's linear part to
    /// `upstream`, giving an input-shaped buffer.
    pub fn backward_data<F: Real>(&self, upstream: &[F], weight: &[F]) -> Vec<F> {
        let wt = self.tap_major(weight);
        let mut dcols = vec![F::zero(); self.positions() * self.patch()];
        gemm(
            F::one(),
            MatRef::new(upstream, self.positions(), self.out_channels),
            MatRef::new(&wt, self.out_channels, self.patch()),
            F::zero(),
            &mut dcols,
        );
        let mut dx = vec![F::zero(); self.in_h * self.in_w * self.channels];
        self.col2im(&dcols, &mut dx);
        dx
    }

    /// Accumulates the weight gradient `upstreamᵀ · cols` and the bias
    /// gradient (column sums of `upstream`).
    pub fn backward_params<F: Real>(
        &self,
        upstream: &[F],
        cols: &Unrolled<F>,
        dweight: &mut [F],
        dbias: Option<&mut [F]>,
    ) {
        let mut dwt = vec![F::zero(); dweight.len()];
        gemm(
            F::one(),
            MatRef::new(upstream, self.positions(), self.out_channels).t(),
            cols.view(),
            F::zero(),
            &mut dwt,
        );
        self.add_from_tap_major(&dwt, dweight);
        if let Some(dbias) = dbias {
            for row in upstream.chunks_exact(self.out_channels) {
                for (d, &g) in dbias.iter_mut().zip(row) {
                    *d += g;
                }
            }
        }
    }
}

/// Unrolled convolution patches: a `rows × cols` matrix whose rows may
/// overlap in the backing buffer.
pub struct Unrolled<F> {
    buf: Vec<F>,
    rows: usize,
    cols: usize,
    row_stride: usize,
}

impl<F> Unrolled<F> {
    pub fn view(&self) -> MatRef<'_, F> {
        MatRef {
            data: &self.buf,
            rows: self.rows,
            cols: self.cols,
            row_stride: self.row_stride,
            col_stride: 1,
        }
    }

    /// Element `(row, col)` of the unrolled matrix.
    pub fn get(&self, row: usize, col: usize) -> &F {
        &self.buf[row * self.row_stride + col]
    }
}

/// Geometry of a max pool over an `(in_h, in_w, channels)` image.
#[derive(Debug, Clone, Copy)]
pub struct PoolGeom {
    pub in_w: usize,
    pub channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeom {
    pub fn of(layer: &LayerSpec, input: &[usize], output: &[usize]) -> Option<Self> {
        match *layer {
            LayerSpec::MaxPool1d { kernel, stride } => Some(PoolGeom {
                in_w: input[0],
                channels: input[1],
                kh: 1,
                kw: kernel,
                stride_h: 1,
                stride_w: stride,
                out_h: 1,
                out_w: output[0],
            }),
            LayerSpec::MaxPool2d { kernel, stride } => Some(PoolGeom {
                in_w: input[1],
                channels: input[2],
                kh: kernel,
                kw: kernel,
                stride_h: stride,
                stride_w: stride,
                out_h: output[0],
                out_w: output[1],
            }),
            _ => None,
        }
    }

    /// Max pooling; returns the pooled values and, for every output element,
    /// the flat input index that attained the maximum. Ties go to the first
    /// element in row-major window order, which is the lowest index.
    pub fn forward<F: Real>(&self, input: &[F]) -> (Vec<F>, Vec<usize>) {
        let c = self.channels;
        let n = self.out_h * self.out_w * c;
        let mut out = vec![F::zero(); n];
        let mut argmax = vec![0usize; n];
        for oy in 0..self.out_h {
            for ox in 0..self.out_w {
                let base = (oy * self.out_w + ox) * c;
                for dy in 0..self.kh {
                    for dx in 0..self.kw {
                        let pix = (oy * self.stride_h + dy) * self.in_w + ox * self.stride_w + dx;
                        let src = &input[pix * c..][..c];
                        let first = dy == 0 && dx == 0;
                        for ch in 0..c {
                            if first || src[ch] > out[base + ch] {
                                out[base + ch] = src[ch];
                                argmax[base + ch] = pix * c + ch;
                            }
                        }
                    }
                }
            }
        }
        (out, argmax)
    }
}

/// Routes each upstream value to the input position recorded in `argmax`.
pub fn scatter_argmax<F: Real>(upstream: &[F], argmax: &[usize], input_len: usize) -> Vec<F> {
    let mut out = vec![F::zero(); input_len];
    for (&g, &i) in upstream.iter().zip(argmax) {
        out[i] += g;
    }
    out
}
