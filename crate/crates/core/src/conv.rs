//! Spatial convolution primitives with replicate-edge borders.
//!
//! Convolution follows the usual definition
//! `out(x, y) = Σ_{u,v} w(u, v) · in(x − u, y − v)` with offsets `u, v` in
//! `[−h, h]` for a kernel of side `2h + 1`. Out-of-frame samples take the
//! value of the nearest edge pixel.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Odd-sized square kernel; `weights[(v + h) * size + (u + h)]` is the weight
/// at offset `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialKernel {
    size: usize,
    weights: Vec<f64>,
}

impl SpatialKernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {size}")));
        }
        if weights.len() != size * size {
            return Err(Error::invalid(format!("kernel needs {} weights, got {}", size * size, weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("kernel weights must be finite"));
        }
        Ok(SpatialKernel { size, weights })
    }

    /// Samples `f(u, v)` over the centered integer grid.
    pub(crate) fn from_fn(size: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = (size / 2) as isize;
        let mut weights = Vec::with_capacity(size * size);
        for v in -h..=h {
            for u in -h..=h {
                weights.push(f(u as f64, v as f64));
            }
        }
        Self::new(size, weights)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn half(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at signed offset `(u, v)` from the center.
    pub fn at(&self, u: isize, v: isize) -> f64 {
        let h = self.half() as isize;
        self.weights[((v + h) as usize) * self.size + (u + h) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn subtract_mean(&mut self) {
        let mean = self.sum() / self.weights.len() as f64;
        self.weights.iter_mut().for_each(|w| *w -= mean);
    }
}

/// Direct 2-D convolution. `O(w·h·size²)`; used for small kernels and as the
/// reference for the faster paths.
pub fn convolve(input: &Raster, kernel: &SpatialKernel) -> Raster {
    let (w, h) = input.dims();
    let half = kernel.half();
    let padded = pad_replicate(input, half);
    let pw = w + 2 * half;
    let mut out = vec![0.0; w * h];
    let size = kernel.size();
    // out(x,y) = Σ w(u,v) in(x−u, y−v); padded index of in(x−u) is x−u+half.
    for vi in 0..size {
        let v = vi as isize - half as isize;
        for ui in 0..size {
            let u = ui as isize - half as isize;
            let wt = kernel.at(u, v);
            if wt == 0.0 {
                continue;
            }
            for y in 0..h {
                let py = (y as isize - v + half as isize) as usize;
                let src = &padded[py * pw..(py + 1) * pw];
                let off = (half as isize - u) as usize;
                let dst = &mut out[y * w..(y + 1) * w];
                for (d, s) in dst.iter_mut().zip(&src[off..off + w]) {
                    *d += wt * s;
                }
            }
        }
    }
    Raster::from_vec_unchecked(w, h, out)
}

/// Convolution with the separable kernel `w(u, v) = col[v] · row[u]`
/// (both odd-length, centered).
pub fn convolve_separable(input: &Raster, row: &[f64], col: &[f64]) -> Raster {
    let horizontal = convolve_rows(input, row);
    convolve_cols(&horizontal, col)
}

fn convolve_rows(input: &Raster, taps: &[f64]) -> Raster {
    debug_assert!(taps.len() % 2 == 1);
    let (w, h) = input.dims();
    let half = taps.len() / 2;
    let mut out = vec![0.0; w * h];
    let mut line = vec![0.0; w + 2 * half];
    for y in 0..h {
        let row = input.row(y);
        line[..half].fill(row[0]);
        line[half..half + w].copy_from_slice(row);
        line[half + w..].fill(row[w - 1]);
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &t) in taps.iter().enumerate() {
            // tap k is offset u = k − half; reads in(x − u) = line[x + 2·half − k]
            let off = 2 * half - k;
            for (d, s) in dst.iter_mut().zip(&line[off..off + w]) {
                *d += t * s;
            }
        }
    }
    Raster::from_vec_unchecked(w, h, out)
}

fn convolve_cols(input: &Raster, taps: &[f64]) -> Raster {
    debug_assert!(taps.len() % 2 == 1);
    let (w, h) = input.dims();
    let half = taps.len() as isize / 2;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (k, &t) in taps.iter().enumerate() {
            let v = k as isize - half;
            let sy = (y as isize - v).clamp(0, h as isize - 1) as usize;
            for (d, s) in dst.iter_mut().zip(input.row(sy)) {
                *d += t * s;
            }
        }
    }
    Raster::from_vec_unchecked(w, h, out)
}

/// Sliding-window maximum with a `size × size` window, stride 1 and
/// replicate borders. The window covers offsets `−(size−1)/2 ..= size/2`.
pub fn max_pool(input: &Raster, size: usize) -> Raster {
    assert!(size >= 1);
    if size == 1 {
        return input.clone();
    }
    let (w, h) = input.dims();
    let lo = (size as isize - 1) / 2;
    let hi = size as isize / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = input.row(y);
        for x in 0..w {
            let mut m = f64::NEG_INFINITY;
            for dx in -lo..=hi {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                m = m.max(row[sx]);
            }
            tmp[y * w + x] = m;
        }
    }
    let mut out = vec![f64::NEG_INFINITY; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for dy in -lo..=hi {
            let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
            for (d, s) in dst.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                *d = d.max(*s);
            }
        }
    }
    Raster::from_vec_unchecked(w, h, out)
}

fn pad_replicate(input: &Raster, pad: usize) -> Vec<f64> {
    let (w, h) = input.dims();
    let pw = w + 2 * pad;
    let ph = h + 2 * pad;
    let mut out = vec![0.0; pw * ph];
    for py in 0..ph {
        let sy = (py as isize - pad as isize).clamp(0, h as isize - 1) as usize;
        let src = input.row(sy);
        let dst = &mut out[py * pw..(py + 1) * pw];
        dst[..pad].fill(src[0]);
        dst[pad..pad + w].copy_from_slice(src);
        dst[pad + w..].fill(src[w - 1]);
    }
    out
}

/// Smallest length `≥ n` whose prime factors are all ≤ 7.
fn fft_length(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// FFT convolution of real frames against a fixed bank of kernel pairs at a
/// fixed frame size.
///
/// Each bank entry packs two real kernels as `re + i·im`; since inputs are
/// real, one complex product yields both convolutions at once. Results match
/// [`convolve`] (replicate borders) up to floating-point rounding, and an
/// all-zero input gives exact zeros.
pub struct FftBank {
    width: usize,
    height: usize,
    pad: usize,
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    // kernel spectra in transposed (column-major) layout, nx rows of ny
    spectra: Vec<Vec<Complex64>>,
}

impl FftBank {
    pub fn new(width: usize, height: usize, pairs: &[(&SpatialKernel, &SpatialKernel)]) -> Result<Self> {
        let size = pairs.first().map(|(a, _)| a.size()).unwrap_or(1);
        if pairs.iter().any(|(a, b)| a.size() != size || b.size() != size) {
            return Err(Error::invalid("all kernels in an FFT bank must share one size"));
        }
        let pad = size / 2;
        let nx = fft_length(width + 2 * pad);
        let ny = fft_length(height + 2 * pad);
        let mut planner = FftPlanner::new();
        let mut bank = FftBank {
            width,
            height,
            pad,
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
            spectra: Vec::with_capacity(pairs.len()),
        };
        for (re, im) in pairs {
            let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
            let h = pad as isize;
            for v in -h..=h {
                for u in -h..=h {
                    let ix = u.rem_euclid(nx as isize) as usize;
                    let iy = v.rem_euclid(ny as isize) as usize;
                    buf[iy * nx + ix] = Complex64::new(re.at(u, v), im.at(u, v));
                }
            }
            let spec = bank.forward(buf, ny);
            bank.spectra.push(spec);
        }
        Ok(bank)
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    /// 2-D forward transform; only the first `live_rows` rows may be nonzero.
    /// Returns the spectrum in transposed layout.
    fn forward(&self, mut buf: Vec<Complex64>, live_rows: usize) -> Vec<Complex64> {
        let (nx, ny) = (self.nx, self.ny);
        self.row_fwd.process(&mut buf[..live_rows * nx]);
        let mut t = transpose(&buf, nx, ny);
        self.col_fwd.process(&mut t);
        t
    }

    /// Convolves `input` with every kernel pair; entry `k` of the result is
    /// `(input ∗ re_k, input ∗ im_k)`.
    pub fn apply(&self, input: &Raster) -> Result<Vec<(Raster, Raster)>> {
        if input.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                got: input.dims(),
                path: None,
            });
        }
        let (w, h, pad, nx, ny) = (self.width, self.height, self.pad, self.nx, self.ny);
        if input.is_all_zero() {
            return Ok((0..self.len()).map(|_| (Raster::zeros(w, h), Raster::zeros(w, h))).collect());
        }
        let padded = pad_replicate(input, pad);
        let pw = w + 2 * pad;
        let ph = h + 2 * pad;
        let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
        for y in 0..ph {
            for x in 0..pw {
                buf[y * nx + x].re = padded[y * pw + x];
            }
        }
        let spec = self.forward(buf, ph);
        let norm = 1.0 / (nx * ny) as f64;
        let mut out = Vec::with_capacity(self.len());
        let mut prod = vec![Complex64::new(0.0, 0.0); nx * ny];
        for kspec in &self.spectra {
            for ((p, a), b) in prod.iter_mut().zip(&spec).zip(kspec) {
                *p = a * b;
            }
            self.col_inv.process(&mut prod);
            let mut rows = transpose(&prod, ny, nx);
            // output pixel (x, y) sits at padded index (x + pad, y + pad)
            let live = &mut rows[pad * nx..(pad + h) * nx];
            self.row_inv.process(live);
            let mut re = vec![0.0; w * h];
            let mut im = vec![0.0; w * h];
            for y in 0..h {
                let src = &live[y * nx..(y + 1) * nx];
                for x in 0..w {
                    let c = src[x + pad];
                    re[y * w + x] = c.re * norm;
                    im[y * w + x] = c.im * norm;
                }
            }
            out.push((Raster::from_vec_unchecked(w, h, re), Raster::from_vec_unchecked(w, h, im)));
        }
        Ok(out)
    }
}

fn transpose(src: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::new(0.0, 0.0); cols * rows];
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    dst
}
