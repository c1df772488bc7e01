//! Retinal ganglion layer: Gaussian smoothing of every input frame.

use rayon::prelude::*;

use crate::conv::{self, SpatialKernel};
use crate::error::{Error, Result};
use crate::raster::{Frame, Raster, Sequence};

/// Sampled isotropic Gaussian, renormalized to sum to exactly 1 on the grid.
pub fn gaussian_kernel(sigma1: f64, size: usize) -> Result<SpatialKernel> {
    if !(sigma1.is_finite() && sigma1 > 0.0) {
        return Err(Error::invalid(format!("sigma1 must be positive, got {sigma1}")));
    }
    if size % 2 == 0 {
        return Err(Error::invalid(format!("kernel size must be odd, got {size}")));
    }
    let s2 = sigma1 * sigma1;
    let mut k = SpatialKernel::from_fn(size, |x, y| {
        (-(x * x + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
    })?;
    let total = k.sum();
    let weights = k.weights().iter().map(|w| w / total).collect();
    k = SpatialKernel::new(size, weights)?;
    Ok(k)
}

/// The 1-D factor of [`gaussian_kernel`]: the 2-D kernel is its outer product.
pub(crate) fn gaussian_taps(sigma1: f64, size: usize) -> Vec<f64> {
    let h = (size / 2) as isize;
    let taps: Vec<f64> = (-h..=h).map(|x| (-((x * x) as f64) / (2.0 * sigma1 * sigma1)).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Smooths one frame with a retina kernel.
pub fn smooth(frame: &Frame, kernel: &SpatialKernel) -> Result<Raster> {
    check_fits(frame, kernel)?;
    Ok(conv::convolve(frame, kernel))
}

/// Fast path for the Gaussian retina: separable convolution with the same
/// result as [`smooth`] with [`gaussian_kernel`].
pub(crate) fn smooth_gaussian(frame: &Frame, taps: &[f64]) -> Raster {
    conv::convolve_separable(frame, taps, taps)
}

/// Applies the retina kernel to every frame; output frames keep the input size.
pub fn retina_layer(seq: &Sequence, kernel: &SpatialKernel) -> Result<Sequence> {
    let frames = seq
        .frames()
        .par_iter()
        .map(|f| smooth(f, kernel))
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(frames, seq.fps())
}

fn check_fits(frame: &Frame, kernel: &SpatialKernel) -> Result<()> {
    let (w, h) = frame.dims();
    if kernel.size() > w.min(h) {
        return Err(Error::KernelTooLarge { size: kernel.size(), width: w, height: h });
    }
    Ok(())
}
