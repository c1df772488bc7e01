//! SGC soma layer: scale-selective lateral inhibition and z-score background
//! suppression.

use rayon::prelude::*;

use crate::conv::{self, SpatialKernel};
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::stack::DirectionalStack;

/// Center-surround kernel `exp(−a r²) − μ exp(−r²)` on coordinates scaled so
/// the grid spans `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleKernel {
    pub a: f64,
    pub mu: f64,
    kernel: SpatialKernel,
}

impl ScaleKernel {
    pub fn new(a: f64, mu: f64, size: usize) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::invalid(format!("scale kernel needs a > 1, got {a}")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::invalid(format!("scale kernel needs 0 < mu < 1, got {mu}")));
        }
        if size % 2 == 0 || size < 3 {
            return Err(Error::invalid(format!("scale kernel size must be odd and >= 3, got {size}")));
        }
        let s = Self::coordinate_scale(size);
        let kernel = SpatialKernel::from_fn(size, |x, y| {
            let r2 = (x * s).powi(2) + (y * s).powi(2);
            (-a * r2).exp() - mu * (-r2).exp()
        })?;
        Ok(ScaleKernel { a, mu, kernel })
    }

    /// Multiplier mapping grid offsets to kernel coordinates.
    pub fn coordinate_scale(size: usize) -> f64 {
        2.0 / size as f64
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

    /// The center and surround terms as 1-D factors `(center, surround)`;
    /// the kernel equals `center ⊗ center − μ · surround ⊗ surround`.
    fn factors(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.kernel.half() as isize;
        let s = Self::coordinate_scale(self.size());
        let term = |k: f64| (-h..=h).map(|x| (-k * (x as f64 * s).powi(2)).exp()).collect();
        (term(self.a), term(1.0))
    }

    /// `map ∗ W_s` with replicate borders.
    pub fn convolve(&self, map: &Raster) -> Raster {
        let (center, surround) = self.factors();
        let c = conv::convolve_separable(map, &center, &center);
        let s = conv::convolve_separable(map, &surround, &surround);
        let mu = self.mu;
        c.zip_map(&s, |a, b| a - mu * b).expect("same dims")
    }
}

/// Rectified scale selection `S′ = [D ∗ W_s]⁺` of one map.
pub fn scale_select_map(map: &Raster, kernel: &ScaleKernel) -> Raster {
    kernel.convolve(map).map(|v| v.max(0.0))
}

pub fn scale_select(stack: &DirectionalStack, kernel: &ScaleKernel) -> Result<DirectionalStack> {
    if let Some(m) = stack.maps().first() {
        let (w, h) = m.dims();
        if kernel.size() > w.min(h) {
            return Err(Error::KernelTooLarge { size: kernel.size(), width: w, height: h });
        }
    }
    Ok(stack.map_each(|m| scale_select_map(m, kernel)))
}

/// Population z-score of every pixel; a constant map gives zeros.
pub fn zscore_map(map: &Raster) -> Raster {
    let (lo, hi) = map.min_max();
    if lo == hi {
        let (w, h) = map.dims();
        return Raster::zeros(w, h);
    }
    let n = map.data().len() as f64;
    let mean = map.data().iter().sum::<f64>() / n;
    let var = map.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        let (w, h) = map.dims();
        return Raster::zeros(w, h);
    }
    map.map(|v| (v - mean) / sd)
}

/// `S = S′ · [z − ε]⁺` for one map.
pub fn suppress_map(map: &Raster, epsilon: f64) -> Raster {
    let z = zscore_map(map);
    map.zip_map(&z, |s, z| s * (z - epsilon).max(0.0)).expect("same dims")
}

pub fn background_suppress(stack: &DirectionalStack, epsilon: f64) -> Result<DirectionalStack> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be non-negative, got {epsilon}")));
    }
    Ok(stack.map_each(|m| suppress_map(m, epsilon)))
}

/// Fraction of pixels left nonzero across all maps.
pub fn surviving_fraction(stack: &DirectionalStack) -> f64 {
    let (alive, total) = stack
        .maps()
        .par_iter()
        .map(|m| (m.data().iter().filter(|&&v| v != 0.0).count(), m.data().len()))
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    alive as f64 / total.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn origin_weight() {
        for (a, mu) in [(4.0, 0.5), (8.0, 0.2), (1.5, 0.9)] {
            let k = ScaleKernel::new(a, mu, 13).unwrap();
            assert_eq!(k.at(0, 0), 1.0 - mu);
        }
    }

    #[test]
    fn radial_symmetry() {
        let k = ScaleKernel::new(8.0, 0.2, 13).unwrap();
        for v in -6..=6 {
            for u in -6..=6 {
                assert_eq!(k.at(u, v), k.at(-u, -v));
                assert_eq!(k.at(u, v), k.at(v, u));
            }
        }
    }

    #[test]
    fn negative_surround_at_unit_radius() {
        // e^-4 - 0.5 e^-1
        const EXPECTED: f64 = -0.165_624_081_696_987;
        let s = ScaleKernel::coordinate_scale(13);
        let r = 1.0_f64 / s;
        let direct = (-4.0 * (r * s).powi(2)).exp() - 0.5 * (-(r * s).powi(2)).exp();
        assert!((direct - EXPECTED).abs() < 1e-12);
        let k = ScaleKernel::new(4.0, 0.5, 13).unwrap();
        assert!(k.kernel().weights().iter().any(|&w| w < 0.0));
    }

    #[test]
    fn rejects_domain_violations() {
        assert!(ScaleKernel::new(1.0, 0.5, 13).is_err());
        assert!(ScaleKernel::new(4.0, 0.0, 13).is_err());
        assert!(ScaleKernel::new(4.0, 1.0, 13).is_err());
        assert!(ScaleKernel::new(4.0, 0.5, 12).is_err());
    }

    #[test]
    fn separable_matches_direct() {
        let f = Raster::from_fn(31, 24, |x, y| ((x * 13 + y * 7) % 9) as f64 - 4.0);
        let k = ScaleKernel::new(8.0, 0.2, 13).unwrap();
        let direct = conv::convolve(&f, k.kernel());
        let fast = k.convolve(&f);
        for (a, b) in direct.data().iter().zip(fast.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rectification() {
        let k = ScaleKernel::new(8.0, 0.2, 13).unwrap();
        assert!(scale_select_map(&Raster::zeros(20, 20), &k).is_all_zero());
        // a kernel with positive total weight maps a negative field to zero
        let positive = ScaleKernel::new(8.0, 0.05, 13).unwrap();
        assert!(positive.kernel().sum() > 0.0);
        assert!(scale_select_map(&Raster::filled(20, 20, -1.0), &positive).is_all_zero());
        // the default surround outweighs the center, so a flat field of -c gives c·|Σw|
        let total = k.kernel().sum();
        assert!(total < 0.0);
        let flat = scale_select_map(&Raster::filled(20, 20, -1.0), &k);
        assert!(flat.data().iter().all(|v| (v + total).abs() < 1e-12));
        assert!(scale_select_map(&Raster::filled(20, 20, 1.0), &k).is_all_zero());
    }

    #[test]
    fn small_blob_beats_wide_region() {
        let k = ScaleKernel::new(8.0, 0.2, 13).unwrap();
        let disk = |r: f64| {
            Raster::from_fn(64, 64, |x, y| {
                let (dx, dy) = (x as f64 - 32.0, y as f64 - 32.0);
                if dx * dx + dy * dy <= r * r {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let small = scale_select_map(&disk(1.5), &k).min_max().1;
        let wide = scale_select_map(&disk(20.0), &k).min_max().1;
        assert!(small > wide, "small {small} wide {wide}");
    }

    #[test]
    fn zscore_oracles() {
        let z = zscore_map(&Raster::new(2, 1, vec![0.0, 10.0]).unwrap());
        assert_eq!(z.data(), &[-1.0, 1.0]);
        assert!(zscore_map(&Raster::filled(5, 4, 0.3)).is_all_zero());
    }

    #[test]
    fn suppression_examples() {
        // 99 pixels at 0 and one outlier: z_out = sqrt(99), so pick values giving z = ε + 2
        let mut m = Raster::zeros(10, 10);
        m.set(4, 7, 0.5);
        let z = zscore_map(&m).get(4, 7);
        let out = suppress_map(&m, z - 2.0);
        assert!((out.get(4, 7) - 1.0).abs() < 1e-12);
        assert_eq!(out.data().iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(suppress_map(&m, z + 0.1).is_all_zero());
    }

    #[test]
    fn single_positive_zscore_survives_at_zero_epsilon() {
        let mut m = Raster::filled(6, 6, 0.2);
        m.set(1, 2, 0.9);
        let out = suppress_map(&m, 0.0);
        assert!(out.get(1, 2) > 0.0);
        assert_eq!(out.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    fn map_strategy() -> impl Strategy<Value = Raster> {
        (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
            prop::collection::vec(-5.0f64..5.0, w * h).prop_map(move |d| Raster::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn zscore_identity(m in map_strategy()) {
            let (lo, hi) = m.min_max();
            prop_assume!(hi - lo > 1e-6);
            let z = zscore_map(&m);
            let n = z.data().len() as f64;
            let mean = z.data().iter().sum::<f64>() / n;
            let sd = (z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zscore_affine_invariant(m in map_strategy(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let (lo, hi) = m.min_max();
            prop_assume!(hi - lo > 1e-3);
            let z1 = zscore_map(&m);
            let z2 = zscore_map(&m.map(|v| a * v + b));
            for (p, q) in z1.data().iter().zip(z2.data()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn suppression_monotone_and_non_negative(m in map_strategy(), e1 in 0.0f64..3.0, de in 0.0f64..2.0) {
            let s = m.map(|v| v.max(0.0));
            let lo = suppress_map(&s, e1);
            let hi = suppress_map(&s, e1 + de);
            for (a, b) in lo.data().iter().zip(hi.data()) {
                prop_assert!(*b >= 0.0);
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn scale_select_non_negative(m in map_strategy()) {
            let k = ScaleKernel::new(8.0, 0.2, 3).unwrap();
            prop_assert!(scale_select_map(&m, &k).data().iter().all(|&v| v >= 0.0));
        }
    }
}
