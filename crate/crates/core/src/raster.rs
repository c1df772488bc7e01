//! Row-major real-valued rasters and frame sequences.

use crate::error::{Error, Result};

/// A `width × height` map of real values, stored row-major: the value at
/// `(x, y)` lives at `data[y * width + x]`.
///
/// Input frames hold luminance in `[0, 1]`; intermediate layer outputs use
/// the same type with unconstrained (finite) values.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// A luminance raster.
pub type Frame = Raster;

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("raster dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "raster data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {i}")));
        }
        Ok(Raster { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Raster { width, height, data: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        let mut r = Self::zeros(width, height);
        r.data.fill(value);
        r
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut r = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                r.data[y * width + x] = f(x, y);
            }
        }
        r
    }

    /// Builds a frame from 8-bit luminance, mapping `v → v / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    // Internal constructor for stage outputs whose values are finite by construction.
    pub(crate) fn from_vec_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Raster { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Value at signed coordinates with replicate-edge extension.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two equally sized rasters.
    pub fn zip_map(&self, other: &Raster, f: impl Fn(f64, f64) -> f64) -> Result<Raster> {
        self.check_same_dims(other)?;
        Ok(Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Location and value of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width, self.data[best])
    }

    pub(crate) fn check_same_dims(&self, other: &Raster) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), got: other.dims(), path: None });
        }
        Ok(())
    }
}

/// Ordered frames sharing one size, sampled at `fps` frames per second.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl Sequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                first.check_same_dims(f)?;
            }
        }
        Ok(Sequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Time of frame `k` in seconds.
    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 / self.fps
    }

    /// `(width, height)` of the frames, or `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Raster::dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn u8_normalization() {
        let r = Raster::from_u8(2, 1, &[255, 0]).unwrap();
        assert_eq!(r.get(0, 0), 1.0);
        assert_eq!(r.get(1, 0), 0.0);
    }

    #[test]
    fn sequence_rejects_mixed_dims() {
        let err = Sequence::new(vec![Raster::zeros(2, 2), Raster::zeros(3, 2)], 50.0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(Sequence::new(vec![], 0.0).is_err());
        let s = Sequence::new(vec![Raster::zeros(2, 2)], 25.0).unwrap();
        assert_eq!(s.time_of(5), 0.2);
    }

    proptest! {
        #[test]
        fn indexing_matches_2d_accessor(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let grid: Vec<Vec<f64>> = (0..h)
                .map(|y| (0..w).map(|x| ((seed ^ (x as u64 * 31 + y as u64 * 7)) % 1000) as f64).collect())
                .collect();
            let flat: Vec<f64> = grid.iter().flatten().copied().collect();
            let r = Raster::new(w, h, flat).unwrap();
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(r.get(x, y), grid[y][x]);
                }
            }
        }
    }
}
