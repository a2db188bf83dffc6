//! Dense float64 kernels. All `gemm_*` functions accumulate into `out`.

/// `out[m,n] += a[m,k] · b[k,n]`
pub fn gemm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,n] += a[m,k] · b[n,k]ᵀ`
pub fn gemm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    let bt = transpose(b, n, k);
    gemm_nn(a, &bt, m, k, n, out);
}

/// `out[m,n] += a[k,m]ᵀ · b[k,n]`
pub fn gemm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Row-major `[rows, cols]` → `[cols, rows]`.
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Geometry of a square-kernel convolution from an input grid to an output grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(channels: usize, in_h: usize, in_w: usize, kernel: usize, stride: usize, pad: usize) -> Option<Self> {
        let span_h = (in_h + 2 * pad).checked_sub(kernel)?;
        let span_w = (in_w + 2 * pad).checked_sub(kernel)?;
        if stride == 0 || kernel == 0 {
            return None;
        }
        Some(ConvGeometry {
            channels,
            in_h,
            in_w,
            kernel,
            stride,
            pad,
            out_h: span_h / stride + 1,
            out_w: span_w / stride + 1,
        })
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    #[inline]
    fn source(&self, out_pos: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (out_pos * self.stride + k) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

/// Unfolds `x[C,H,W]` into `[C·k·k, out_h·out_w]`.
pub fn im2col(x: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let cols = g.col_cols();
    let mut out = vec![0.0; g.col_rows() * cols];
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let Some(iy) = g.source(oy, ky, g.in_h) else { continue };
                    for ox in 0..g.out_w {
                        if let Some(ix) = g.source(ox, kx, g.in_w) {
                            dst[oy * g.out_w + ox] = x[(c * g.in_h + iy) * g.in_w + ix];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: folds columns back, accumulating into `x[C,H,W]`.
pub fn col2im(cols_data: &[f64], g: &ConvGeometry, x: &mut [f64]) {
    let cols = g.col_cols();
    for c in 0..g.channels {
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src = &cols_data[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let Some(iy) = g.source(oy, ky, g.in_h) else { continue };
                    for ox in 0..g.out_w {
                        if let Some(ix) = g.source(ox, kx, g.in_w) {
                            x[(c * g.in_h + iy) * g.in_w + ix] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Direct-loop 2D convolution: `x[C,H,W]`, `w[O,C,k,k]`, `b[O]` → `[O,Ho,Wo]`.
pub fn conv2d_naive(x: &[f64], w: &[f64], b: &[f64], out_channels: usize, g: &ConvGeometry) -> Vec<f64> {
    let k = g.kernel;
    let mut out = vec![0.0; out_channels * g.out_h * g.out_w];
    for o in 0..out_channels {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let mut acc = b[o];
                for c in 0..g.channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                            let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                            if iy < 0 || ix < 0 || iy as usize >= g.in_h || ix as usize >= g.in_w {
                                continue;
                            }
                            acc += x[(c * g.in_h + iy as usize) * g.in_w + ix as usize]
                                * w[((o * g.channels + c) * k + ky) * k + kx];
                        }
                    }
                }
                out[(o * g.out_h + oy) * g.out_w + ox] = acc;
            }
        }
    }
    out
}

/// Direct-loop transposed convolution: `x[C,Hi,Wi]`, `w[C,O,k,k]`, `b[O]` → `[O,Ho,Wo]`.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_naive(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    in_channels: usize,
    in_h: usize,
    in_w: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_channels * out_h * out_w];
    for o in 0..out_channels {
        out[o * out_h * out_w..(o + 1) * out_h * out_w].fill(b[o]);
    }
    for c in 0..in_channels {
        for iy in 0..in_h {
            for ix in 0..in_w {
                let v = x[(c * in_h + iy) * in_w + ix];
                for o in 0..out_channels {
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let oy = (iy * stride + ky) as isize - pad as isize;
                            let ox = (ix * stride + kx) as isize - pad as isize;
                            if oy < 0 || ox < 0 || oy as usize >= out_h || ox as usize >= out_w {
                                continue;
                            }
                            out[(o * out_h + oy as usize) * out_w + ox as usize] +=
                                v * w[((c * out_channels + o) * kernel + ky) * kernel + kx];
                        }
                    }
                }
            }
        }
    }
    out
}
