//! SGC dendrite layer: oriented spatiotemporal change detection.
//!
//! Each channel is a Gabor kernel in space combined with a derivative kernel
//! in time. Because the 3-D filter is an outer product, the response is
//! computed as one spatial convolution of the temporally filtered frame.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::conv::{FftBank, SpatialKernel};
use crate::error::{Error, Result};
use crate::raster::{Raster, Sequence};
use crate::stack::DirectionalStack;

/// Phases of the quadrature pair realized per direction.
pub const PHASES: [f64; 2] = [0.0, FRAC_PI_2];

/// Real Gabor kernel `env(x′, y′) · cos(2π x′/λ + φ)` with
/// `env = exp(−(x′² + γ² y′²) / 2σ²)` in coordinates rotated by θ.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub lambda: f64,
    kernel: SpatialKernel,
}

impl GaborKernel {
    /// Samples the kernel exactly on the integer grid (no DC removal).
    pub fn new(theta: f64, phi: f64, gamma: f64, sigma: f64, lambda: f64, size: usize) -> Result<Self> {
        if !(sigma > 0.0 && lambda > 0.0 && gamma > 0.0) {
            return Err(Error::invalid("Gabor gamma, sigma and lambda must be positive"));
        }
        let (s, c) = theta.sin_cos();
        let kernel = SpatialKernel::from_fn(size, |x, y| {
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            let env = (-(xr * xr + gamma * gamma * yr * yr) / (2.0 * sigma * sigma)).exp();
            env * (2.0 * PI * xr / lambda + phi).cos()
        })?;
        Ok(GaborKernel { theta, phi, gamma, sigma, lambda, kernel })
    }

    /// Same kernel with its mean subtracted so it sums to zero.
    pub fn zero_mean(mut self) -> Self {
        self.kernel.subtract_mean();
        self
    }

    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }

    pub fn size(&self) -> usize {
        self.kernel.size()
    }

    pub fn at(&self, u: isize, v: isize) -> f64 {
        self.kernel.at(u, v)
    }
}

/// Zero-mean Gabor kernels for `θ_k = kπ/n` and phases `{0, π/2}`, ordered
/// direction-major.
pub fn gabor_bank(config: &PipelineConfig) -> Result<Vec<GaborKernel>> {
    config.validate()?;
    let mut bank = Vec::with_capacity(config.n_directions * PHASES.len());
    for theta in config.directions() {
        for phi in PHASES {
            bank.push(
                GaborKernel::new(
                    theta,
                    phi,
                    config.gabor_gamma,
                    config.gabor_sigma,
                    config.gabor_lambda,
                    config.kernel_size,
                )?
                .zero_mean(),
            );
        }
    }
    Ok(bank)
}

/// Odd-length taps over frame offsets `−h ..= h`; the filtered value at `t`
/// is `Σ_k taps[k] · frame[t + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalKernel {
    taps: Vec<f64>,
}

impl TemporalKernel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.len() % 2 == 0 {
            return Err(Error::invalid("temporal kernel needs an odd number of taps"));
        }
        if taps.iter().sum::<f64>().abs() > 1e-12 {
            return Err(Error::invalid("temporal taps must sum to zero"));
        }
        let n = taps.len();
        if (0..n).any(|i| taps[i] != -taps[n - 1 - i]) {
            return Err(Error::invalid("temporal taps must be antisymmetric"));
        }
        Ok(TemporalKernel { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn half(&self) -> usize {
        self.taps.len() / 2
    }

    /// Weighted sum of the frames centered on `window[half]`.
    pub fn apply(&self, window: &[&Raster]) -> Raster {
        assert_eq!(window.len(), self.taps.len());
        let (w, h) = window[0].dims();
        let mut out = vec![0.0; w * h];
        for (&t, f) in self.taps.iter().zip(window) {
            if t == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f.data()) {
                *o += t * v;
            }
        }
        Raster::from_vec_unchecked(w, h, out)
    }

    /// Applies the kernel along a scalar time series; border samples are
    /// dropped.
    pub fn apply_series(&self, series: &[f64]) -> Vec<f64> {
        series.windows(self.taps.len()).map(|w| w.iter().zip(&self.taps).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Central-difference (Sobel-style) derivative `[−1, 0, +1]`.
pub fn temporal_kernel() -> TemporalKernel {
    TemporalKernel { taps: vec![-1.0, 0.0, 1.0] }
}

/// Precomputed Gabor bank for one frame size.
pub struct DendriteLayer {
    directions: Vec<f64>,
    temporal: TemporalKernel,
    bank: FftBank,
}

impl DendriteLayer {
    pub fn new(config: &PipelineConfig, width: usize, height: usize) -> Result<Self> {
        let kernels = gabor_bank(config)?;
        let pairs: Vec<_> = kernels.chunks(2).map(|p| (p[0].kernel(), p[1].kernel())).collect();
        Ok(DendriteLayer {
            directions: config.directions(),
            temporal: temporal_kernel(),
            bank: FftBank::new(width, height, &pairs)?,
        })
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn temporal(&self) -> &TemporalKernel {
        &self.temporal
    }

    /// Responses for one output time given the temporal window of frames;
    /// entry `d` holds the `(φ = 0, φ = π/2)` maps for direction `d`.
    pub fn respond(&self, window: &[&Raster]) -> Result<Vec<(Raster, Raster)>> {
        let change = self.temporal.apply(window);
        self.bank.apply(&change)
    }
}

/// Full dendrite response of a (retina-filtered) sequence. Output times are
/// the frames with a complete temporal window.
pub fn dendrite_response(seq: &Sequence, config: &PipelineConfig) -> Result<DirectionalStack> {
    let temporal = temporal_kernel();
    let span = temporal.taps().len();
    if seq.len() < span {
        return Err(Error::SequenceTooShort { needed: span, got: seq.len() });
    }
    let (w, h) = seq.dims().expect("non-empty");
    let layer = DendriteLayer::new(config, w, h)?;
    let half = temporal.half();
    let times: Vec<usize> = (half..seq.len() - half).collect();
    let per_time = times
        .par_iter()
        .map(|&t| {
            let window: Vec<&Raster> = seq.frames()[t - half..=t + half].iter().collect();
            layer.respond(&window)
        })
        .collect::<Result<Vec<_>>>()?;
    let maps = per_time.into_iter().flatten().flat_map(|(a, b)| [a, b]).collect();
    DirectionalStack::new(config.directions(), PHASES.to_vec(), times, maps)
}
