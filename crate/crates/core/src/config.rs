//! Tunable constants of the detection pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How directional energy is normalized by flicker energy in the Rt layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FlickerNorm {
    /// Divide by the mean energy over every direction and every pixel of
    /// the frame. Preserves relative magnitudes across the frame.
    #[default]
    Global,
    /// Divide by the per-pixel mean over directions. Keeps only the
    /// direction distribution at each pixel.
    PerPixel,
}

/// Every free constant of the retina → SGC → Rt pipeline.
///
/// Loaded from JSON; missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Retina Gaussian standard deviation (pixels).
    pub sigma1: f64,
    /// Retina kernel side length (odd).
    pub retina_size: usize,
    /// Number of preferred directions sampled over `[0, π)`.
    pub n_directions: usize,
    pub gabor_gamma: f64,
    pub gabor_sigma: f64,
    pub gabor_lambda: f64,
    /// Side length of the Gabor and scale-selection kernels (odd, ≥ 3).
    pub kernel_size: usize,
    /// Center sharpness of the scale kernel (> 1).
    pub soma_a: f64,
    /// Surround inhibition strength of the scale kernel, in `(0, 1)`.
    pub soma_mu: f64,
    /// z-score threshold for background suppression.
    pub zscore_epsilon: f64,
    /// Max-pooling window (pixels).
    pub pool_size: usize,
    /// Per-direction weights; `None` means uniform `1 / n_directions`.
    pub alpha: Option<Vec<f64>>,
    pub flicker: FlickerNorm,
    /// Detections kept per frame.
    pub top_k: usize,
    /// Detections must score strictly above this value.
    pub score_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sigma1: 1.0,
            retina_size: 5,
            n_directions: 8,
            gabor_gamma: 0.5,
            gabor_sigma: 2.0,
            gabor_lambda: 6.0,
            kernel_size: 13,
            soma_a: 8.0,
            soma_mu: 0.2,
            zscore_epsilon: 1.5,
            pool_size: 3,
            alpha: None,
            flicker: FlickerNorm::Global,
            top_k: 1,
            score_floor: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("sigma1", self.sigma1),
            ("gabor_gamma", self.gabor_gamma),
            ("gabor_sigma", self.gabor_sigma),
            ("gabor_lambda", self.gabor_lambda),
            ("soma_a", self.soma_a),
            ("soma_mu", self.soma_mu),
            ("zscore_epsilon", self.zscore_epsilon),
            ("score_floor", self.score_floor),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite, got {v}")));
        }
        if self.sigma1 <= 0.0 {
            return Err(Error::invalid("sigma1 must be positive"));
        }
        if self.retina_size % 2 == 0 {
            return Err(Error::invalid("retina_size must be odd"));
        }
        if self.kernel_size % 2 == 0 || self.kernel_size < 3 {
            return Err(Error::invalid(format!("kernel_size must be odd and >= 3, got {}", self.kernel_size)));
        }
        if self.n_directions < 2 {
            return Err(Error::invalid("n_directions must be at least 2"));
        }
        if self.gabor_sigma <= 0.0 || self.gabor_lambda <= 0.0 || self.gabor_gamma <= 0.0 {
            return Err(Error::invalid("Gabor gamma, sigma and lambda must be positive"));
        }
        if self.soma_a <= 1.0 {
            return Err(Error::invalid("soma_a must exceed 1"));
        }
        if !(self.soma_mu > 0.0 && self.soma_mu < 1.0) {
            return Err(Error::invalid("soma_mu must lie in (0, 1)"));
        }
        if self.zscore_epsilon < 0.0 {
            return Err(Error::invalid("zscore_epsilon must be non-negative"));
        }
        if self.pool_size == 0 {
            return Err(Error::invalid("pool_size must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        if let Some(alpha) = &self.alpha {
            if alpha.len() != self.n_directions {
                return Err(Error::invalid(format!(
                    "alpha has {} weights for {} directions",
                    alpha.len(),
                    self.n_directions
                )));
            }
            if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::invalid("alpha weights must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Direction weights, expanding the uniform default.
    pub fn direction_weights(&self) -> Vec<f64> {
        self.alpha
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.n_directions as f64; self.n_directions])
    }

    /// Preferred directions `θ_k = k·π / n`.
    pub fn directions(&self) -> Vec<f64> {
        (0..self.n_directions)
            .map(|k| k as f64 * std::f64::consts::PI / self.n_directions as f64)
            .collect()
    }
}
