//! The full retina → SGC → Rt detector, evaluated one output frame at a time.

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::dendrite::DendriteLayer;
use crate::error::{Error, Result};
use crate::raster::{Raster, Sequence};
use crate::retina;
use crate::rt::{self, Detection};
use crate::soma::{self, ScaleKernel};

/// Every intermediate layer for one output frame. Pairs hold the
/// `(φ = 0, φ = π/2)` maps of each direction.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub t: usize,
    /// Retina output at frame `t`.
    pub retina: Raster,
    pub dendrite: Vec<(Raster, Raster)>,
    /// Rectified scale-selection output `S′`.
    pub scale: Vec<(Raster, Raster)>,
    /// Background-suppressed `S`.
    pub soma: Vec<(Raster, Raster)>,
    /// Motion energy `E′` per direction.
    pub energy: Vec<Raster>,
    /// Flicker-normalized energy `E` per direction.
    pub normalized: Vec<Raster>,
    /// Combined output `O`.
    pub output: Raster,
}

/// One summary map per layer, for inspection.
#[derive(Debug, Clone)]
pub struct LayerMaps {
    pub retina: Raster,
    pub dendrite: Raster,
    pub soma: Raster,
    pub rt: Raster,
}

fn strongest_direction(pairs: &[(Raster, Raster)]) -> Raster {
    let (w, h) = pairs[0].0.dims();
    let mut out = vec![0.0f64; w * h];
    for (a, b) in pairs {
        for ((o, x), y) in out.iter_mut().zip(a.data()).zip(b.data()) {
            *o = o.max(x.hypot(*y));
        }
    }
    Raster::new(w, h, out).expect("finite energies")
}

/// Largest quadrature magnitude over directions at one pixel.
fn peak_energy_at(pairs: &[(Raster, Raster)], x: usize, y: usize) -> f64 {
    pairs.iter().map(|(a, b)| a.get(x, y).hypot(b.get(x, y))).fold(0.0, f64::max)
}

impl FrameTrace {
    pub fn layer_maps(&self) -> LayerMaps {
        LayerMaps {
            retina: self.retina.clone(),
            dendrite: strongest_direction(&self.dendrite),
            soma: strongest_direction(&self.soma),
            rt: self.output.clone(),
        }
    }

    /// Scale-selection response at a pixel: the strongest direction's
    /// quadrature magnitude of `S′`.
    pub fn scale_response_at(&self, x: usize, y: usize) -> f64 {
        peak_energy_at(&self.scale, x, y)
    }

    pub fn soma_response_at(&self, x: usize, y: usize) -> f64 {
        peak_energy_at(&self.soma, x, y)
    }
}

/// Precomputed kernels for one configuration and frame size.
pub struct Detector {
    config: PipelineConfig,
    width: usize,
    height: usize,
    retina_taps: Vec<f64>,
    dendrite: DendriteLayer,
    scale: ScaleKernel,
    alpha: Vec<f64>,
}

impl Detector {
    pub fn new(config: &PipelineConfig, width: usize, height: usize) -> Result<Self> {
        config.validate()?;
        let largest = config.retina_size.max(config.kernel_size);
        if largest > width.min(height) {
            return Err(Error::KernelTooLarge { size: largest, width, height });
        }
        Ok(Detector {
            config: config.clone(),
            width,
            height,
            retina_taps: retina::gaussian_taps(config.sigma1, config.retina_size),
            dendrite: DendriteLayer::new(config, width, height)?,
            scale: ScaleKernel::new(config.soma_a, config.soma_mu, config.kernel_size)?,
            alpha: config.direction_weights(),
        })
    }

    pub fn for_sequence(config: &PipelineConfig, seq: &Sequence) -> Result<Self> {
        let (w, h) = seq.dims().ok_or_else(|| Error::SequenceTooShort { needed: 3, got: 0 })?;
        Detector::new(config, w, h)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Frames with a full temporal window.
    pub fn output_times(&self, n_frames: usize) -> std::ops::Range<usize> {
        let half = self.dendrite.temporal().half();
        if n_frames < 2 * half + 1 {
            return 0..0;
        }
        half..n_frames - half
    }

    fn check(&self, seq: &Sequence, t: usize) -> Result<()> {
        let span = self.dendrite.temporal().taps().len();
        if seq.len() < span {
            return Err(Error::SequenceTooShort { needed: span, got: seq.len() });
        }
        if seq.dims() != Some((self.width, self.height)) {
            let (w, h) = seq.dims().unwrap_or((0, 0));
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                got: (w, h),
                path: None,
            });
        }
        if !self.output_times(seq.len()).contains(&t) {
            return Err(Error::FrameOutOfRange { frame: t });
        }
        Ok(())
    }

    fn smooth(&self, f: &Raster) -> Raster {
        retina::smooth_gaussian(f, &self.retina_taps)
    }

    fn dendrite_at(&self, seq: &Sequence, t: usize) -> Result<Vec<(Raster, Raster)>> {
        let half = self.dendrite.temporal().half();
        let (w, h) = (self.width, self.height);
        let zero = Raster::zeros(w, h);
        // only frames with a nonzero tap need smoothing
        let window: Vec<Raster> = self
            .dendrite
            .temporal()
            .taps()
            .iter()
            .enumerate()
            .map(|(k, &tap)| if tap == 0.0 { zero.clone() } else { self.smooth(&seq.frames()[t + k - half]) })
            .collect();
        let refs: Vec<&Raster> = window.iter().collect();
        self.dendrite.respond(&refs)
    }

    fn soma_pair(&self, pair: (Raster, Raster)) -> ((Raster, Raster), (Raster, Raster)) {
        let eps = self.config.zscore_epsilon;
        let a = soma::scale_select_map(&pair.0, &self.scale);
        let b = soma::scale_select_map(&pair.1, &self.scale);
        let sa = soma::suppress_map(&a, eps);
        let sb = soma::suppress_map(&b, eps);
        ((a, b), (sa, sb))
    }

    /// Score map `O` for output frame `t`.
    pub fn score_frame(&self, seq: &Sequence, t: usize) -> Result<Raster> {
        self.check(seq, t)?;
        let mut energy: Vec<Raster> = self
            .dendrite_at(seq, t)?
            .into_iter()
            .map(|pair| {
                let (_, (sa, sb)) = self.soma_pair(pair);
                rt::quadrature_energy(&sa, &sb)
            })
            .collect();
        rt::normalize_slice(&mut energy, self.config.flicker);
        rt::combine_slice(&energy, &self.alpha, self.config.pool_size)
    }

    /// All layers for output frame `t`.
    pub fn trace_frame(&self, seq: &Sequence, t: usize) -> Result<FrameTrace> {
        self.check(seq, t)?;
        let dendrite = self.dendrite_at(seq, t)?;
        let (scale, soma): (Vec<_>, Vec<_>) = dendrite.iter().cloned().map(|p| self.soma_pair(p)).unzip();
        let energy: Vec<Raster> = soma.iter().map(|(a, b)| rt::quadrature_energy(a, b)).collect();
        let mut normalized = energy.clone();
        rt::normalize_slice(&mut normalized, self.config.flicker);
        let output = rt::combine_slice(&normalized, &self.alpha, self.config.pool_size)?;
        Ok(FrameTrace {
            t,
            retina: self.smooth(&seq.frames()[t]),
            dendrite,
            scale,
            soma,
            energy,
            normalized,
            output,
        })
    }

    /// Score maps for every output frame, in time order.
    pub fn scores(&self, seq: &Sequence) -> Result<Vec<(usize, Raster)>> {
        self.check_len(seq)?;
        self.output_times(seq.len())
            .into_par_iter()
            .map(|t| Ok((t, self.score_frame(seq, t)?)))
            .collect()
    }

    /// Up to `k` regional maxima above zero per frame, best first. Scores
    /// are not retained, so memory stays bounded on long sequences.
    pub fn candidates(&self, seq: &Sequence, k: usize) -> Result<Vec<Detection>> {
        self.check_len(seq)?;
        let per_frame = self
            .output_times(seq.len())
            .into_par_iter()
            .map(|t| Ok(rt::detect_frame(&self.score_frame(seq, t)?, t, k, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_frame.into_iter().flatten().collect())
    }

    /// Detections with the configured `top_k` and `score_floor`.
    pub fn detect(&self, seq: &Sequence) -> Result<Vec<Detection>> {
        self.check_len(seq)?;
        let (k, floor) = (self.config.top_k, self.config.score_floor);
        let per_frame = self
            .output_times(seq.len())
            .into_par_iter()
            .map(|t| Ok(rt::detect_frame(&self.score_frame(seq, t)?, t, k, floor)))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_frame.into_iter().flatten().collect())
    }

    fn check_len(&self, seq: &Sequence) -> Result<()> {
        let span = self.dendrite.temporal().taps().len();
        if seq.len() < span {
            return Err(Error::SequenceTooShort { needed: span, got: seq.len() });
        }
        Ok(())
    }
}

/// Runs the detector with `config` over `seq`.
pub fn detect_sequence(seq: &Sequence, config: &PipelineConfig) -> Result<Vec<Detection>> {
    Detector::for_sequence(config, seq)?.detect(seq)
}
