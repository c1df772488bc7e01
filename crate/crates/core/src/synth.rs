//! Synthetic overhead scenes: a scrolling background with one small moving
//! disk, plus ground truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv;
use crate::error::{Error, Result};
use crate::raster::{Raster, Sequence};

/// Motion and appearance of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub frame_size: usize,
    pub n_frames: usize,
    pub fps: f64,
    /// Object speed (px/s).
    pub v_a: f64,
    /// Background speed (px/s).
    pub v_b: f64,
    pub theta_obj: f64,
    pub theta_bg: f64,
    pub radius: f64,
    pub luminance: f64,
    pub start: [f64; 2],
    /// Reflect the object off a margin inside the frame instead of letting
    /// it leave.
    pub bounce: bool,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            frame_size: 512,
            n_frames: 200,
            fps: 50.0,
            v_a: 150.0,
            v_b: 150.0,
            theta_obj: 0.0,
            theta_bg: 0.0,
            radius: 3.0,
            luminance: 0.0,
            start: [256.0, 256.0],
            bounce: true,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let reals = [self.fps, self.v_a, self.v_b, self.theta_obj, self.theta_bg, self.radius, self.luminance];
        if reals.iter().chain(&self.start).any(|v| !v.is_finite()) {
            return Err(Error::invalid("scene parameters must be finite"));
        }
        if self.frame_size == 0 || self.n_frames == 0 {
            return Err(Error::invalid("frame_size and n_frames must be positive"));
        }
        if self.fps <= 0.0 {
            return Err(Error::invalid("fps must be positive"));
        }
        if self.v_a < 0.0 || self.v_b < 0.0 {
            return Err(Error::invalid("speeds must be non-negative"));
        }
        if self.radius < 1.0 {
            return Err(Error::invalid(format!("radius must be at least 1, got {}", self.radius)));
        }
        if !(0.0..=1.0).contains(&self.luminance) {
            return Err(Error::invalid("luminance must lie in [0, 1]"));
        }
        if self.bounce && 2.0 * self.margin() >= (self.frame_size - 1) as f64 {
            return Err(Error::invalid("object too large to bounce inside the frame"));
        }
        Ok(())
    }

    fn margin(&self) -> f64 {
        self.radius + 2.0
    }

    /// Per-frame background displacement.
    pub fn background_step(&self) -> (f64, f64) {
        let s = self.v_b / self.fps;
        (s * self.theta_bg.cos(), s * self.theta_bg.sin())
    }

    /// Smallest square background that fits the whole scroll.
    pub fn required_background(&self) -> usize {
        let (dx, dy) = self.background_step();
        let span = (self.n_frames - 1) as f64;
        self.frame_size + (dx.abs().max(dy.abs()) * span).ceil() as usize + 2
    }

    /// Object center at frame `k`, before rounding.
    pub fn object_center(&self, k: usize) -> [f64; 2] {
        let s = self.v_a / self.fps * k as f64;
        let raw = [self.start[0] + s * self.theta_obj.cos(), self.start[1] + s * self.theta_obj.sin()];
        if !self.bounce {
            return raw;
        }
        let lo = self.margin();
        let hi = (self.frame_size - 1) as f64 - lo;
        raw.map(|c| reflect(c, lo, hi))
    }
}

fn reflect(c: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let m = (c - lo).rem_euclid(2.0 * len);
    if m <= len {
        lo + m
    } else {
        hi - (m - len)
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub background: Arc<Raster>,
    pub scene: SceneParams,
}

/// Object centers per frame. Frames without an entry contain no object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_frames: usize,
    pub objects: BTreeMap<usize, Vec<[f64; 2]>>,
}

impl GroundTruth {
    pub fn new(n_frames: usize) -> Self {
        GroundTruth { n_frames, objects: BTreeMap::new() }
    }

    pub fn push(&mut self, frame: usize, x: f64, y: f64) -> Result<()> {
        if frame >= self.n_frames {
            return Err(Error::FrameOutOfRange { frame });
        }
        self.objects.entry(frame).or_default().push([x, y]);
        Ok(())
    }

    pub fn at(&self, frame: usize) -> &[[f64; 2]] {
        self.objects.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_objects(&self) -> usize {
        self.objects.values().map(Vec::len).sum()
    }

    /// Keeps only frames in `frames`, preserving indices.
    pub fn restrict(&self, frames: impl IntoIterator<Item = usize>) -> GroundTruth {
        let mut out = GroundTruth::new(self.n_frames);
        for f in frames {
            if let Some(v) = self.objects.get(&f) {
                out.objects.insert(f, v.clone());
            }
        }
        out
    }
}

/// Bilinear sample with the caller guaranteeing `0 ≤ x ≤ w−1`, `0 ≤ y ≤ h−1`.
fn bilinear(img: &Raster, x: f64, y: f64) -> f64 {
    let (w, h) = img.dims();
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = if fx == 0.0 { img.get(x0, y0) } else { img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx };
    if fy == 0.0 {
        return top;
    }
    let bottom = if fx == 0.0 { img.get(x0, y1) } else { img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx };
    top * (1.0 - fy) + bottom * fy
}

/// Composites an anti-aliased disk using 4×4 supersampled coverage.
pub fn draw_disk(frame: &mut Raster, cx: f64, cy: f64, radius: f64, luminance: f64) {
    const SS: usize = 4;
    let (w, h) = frame.dims();
    let x0 = (cx - radius - 2.0).floor().max(0.0) as usize;
    let y0 = (cy - radius - 2.0).floor().max(0.0) as usize;
    let x1 = ((cx + radius + 3.0).floor().max(0.0) as usize).min(w);
    let y1 = ((cy + radius + 3.0).floor().max(0.0) as usize).min(h);
    let r2 = radius * radius;
    for y in y0..y1 {
        for x in x0..x1 {
            let mut hits = 0;
            for j in 0..SS {
                for i in 0..SS {
                    let px = x as f64 + (i as f64 + 0.5) / SS as f64 - 0.5;
                    let py = y as f64 + (j as f64 + 0.5) / SS as f64 - 0.5;
                    if (px - cx).powi(2) + (py - cy).powi(2) <= r2 {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let c = hits as f64 / (SS * SS) as f64;
                let v = frame.get(x, y);
                frame.set(x, y, v * (1.0 - c) + luminance * c);
            }
        }
    }
}

/// Top-left crop origin of frame 0 such that the crop at frame `k` is at
/// `origin − k·step` and stays inside the background.
fn crop_origin(bg: usize, size: usize, step: f64, n: usize) -> Result<f64> {
    let travel = step.abs() * (n - 1) as f64;
    let slack = (bg - 1) as f64 - (size - 1) as f64 - travel;
    if slack < 0.0 {
        return Err(Error::invalid(format!(
            "background extent {bg} too small for a {size} px frame scrolling {travel:.1} px"
        )));
    }
    let base = (slack / 2.0).floor();
    Ok(if step > 0.0 { base + travel } else { base })
}

/// Renders frames and ground truth. Frame `k` shows the background cropped
/// at an offset moving by `−k·(v_b/fps)(cos θ_bg, sin θ_bg)`, so the scene
/// appears to translate along `θ_bg`.
pub fn generate(config: &SynthConfig) -> Result<(Sequence, GroundTruth)> {
    let p = &config.scene;
    p.validate()?;
    let bg = &config.background;
    let (bw, bh) = bg.dims();
    if bw < p.frame_size || bh < p.frame_size {
        return Err(Error::invalid("background smaller than the frame"));
    }
    let (dx, dy) = p.background_step();
    let ox = crop_origin(bw, p.frame_size, dx, p.n_frames)?;
    let oy = crop_origin(bh, p.frame_size, dy, p.n_frames)?;
    let size = p.frame_size;
    let frames: Vec<Raster> = (0..p.n_frames)
        .into_par_iter()
        .map(|k| {
            let sx = (ox - k as f64 * dx).clamp(0.0, (bw - size) as f64);
            let sy = (oy - k as f64 * dy).clamp(0.0, (bh - size) as f64);
            let mut f = Raster::from_fn(size, size, |x, y| bilinear(bg, sx + x as f64, sy + y as f64));
            let [cx, cy] = p.object_center(k);
            draw_disk(&mut f, cx, cy, p.radius, p.luminance);
            f
        })
        .collect();
    let mut gt = GroundTruth::new(p.n_frames);
    for k in 0..p.n_frames {
        let [cx, cy] = p.object_center(k);
        let (x, y) = (cx.round(), cy.round());
        if x >= 0.0 && y >= 0.0 && x < size as f64 && y < size as f64 {
            gt.push(k, x, y)?;
        }
    }
    Ok((Sequence::new(frames, p.fps)?, gt))
}

/// The five parameter sweeps. `theta_obj` and the start position are drawn
/// from `seed`; sweeps 1-4 move the background along the object's direction
/// and sweep 5 moves it the opposite way.
pub fn bevs_suite(base_background: Arc<Raster>, seed: u64) -> Vec<(SynthConfig, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = rng.random_range(0.0..2.0 * PI);
    let base = SceneParams {
        theta_obj: theta,
        theta_bg: theta,
        start: [rng.random_range(64.0..448.0), rng.random_range(64.0..448.0)],
        ..SceneParams::default()
    };
    let mut out = Vec::new();
    let mut add = |scene: SceneParams, label: String| {
        out.push((SynthConfig { background: base_background.clone(), scene }, label));
    };
    for v in (0..=8).map(|i| i as f64 * 50.0) {
        add(SceneParams { v_a: v, ..base.clone() }, format!("seq1-va-{v}"));
    }
    for r in 1..=20 {
        add(SceneParams { radius: r as f64, ..base.clone() }, format!("seq2-radius-{r}"));
    }
    for i in 0..=10 {
        let lm = i as f64 / 10.0;
        add(SceneParams { luminance: lm, ..base.clone() }, format!("seq3-lm-{lm}"));
    }
    for v in (0..=8).map(|i| i as f64 * 50.0) {
        add(SceneParams { v_b: v, ..base.clone() }, format!("seq4-vb-{v}"));
    }
    add(SceneParams { theta_bg: theta + PI, ..base.clone() }, "seq5-opposite".to_string());
    out
}

/// Scenes for the detector comparison: default parameters (radius 3,
/// `v_a = v_b = 150` px/s, 200 frames) with the object direction, background
/// direction, start and aerial background drawn per scene from `seed`.
pub fn comparison_scenes(n_scenes: usize, seed: u64, aerial: &AerialParams) -> Vec<SynthConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_scenes)
        .map(|_| {
            let bg_seed = rng.random::<u64>();
            let scene = SceneParams {
                theta_obj: rng.random_range(0.0..2.0 * PI),
                theta_bg: rng.random_range(0.0..2.0 * PI),
                start: [rng.random_range(64.0..448.0), rng.random_range(64.0..448.0)],
                ..SceneParams::default()
            };
            let size = scene.required_background();
            SynthConfig { background: Arc::new(aerial_background(size, size, bg_seed, aerial)), scene }
        })
        .collect()
}

/// Side length of a background large enough for every sweep scene.
pub fn bevs_background_size() -> usize {
    SceneParams { v_b: 400.0, ..SceneParams::default() }.required_background()
}

/// Knobs of the procedural aerial background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AerialParams {
    /// Pixels per building.
    pub building_density: f64,
    pub building_min: usize,
    pub building_max: usize,
    /// Half-range of building brightness around mid-gray.
    pub building_contrast: f64,
    pub texture: f64,
    /// Pixels of width + height per road.
    pub road_spacing: f64,
}

impl Default for AerialParams {
    fn default() -> Self {
        AerialParams {
            building_density: 3000.0,
            building_min: 10,
            building_max: 40,
            building_contrast: 0.35,
            texture: 0.8,
            road_spacing: 150.0,
        }
    }
}

/// Multi-octave value noise, standardized and mapped to `0.5 ± 0.12 z`.
pub fn value_noise(width: usize, height: usize, seed: u64, octaves: usize, base_cell: usize) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; width * height];
    let (mut amp, mut cell) = (1.0, base_cell.max(1));
    for _ in 0..octaves {
        let gw = width / cell + 2;
        let gh = height / cell + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        let g = Raster::from_vec_unchecked(gw, gh, grid);
        for y in 0..height {
            for x in 0..width {
                acc[y * width + x] += amp * bilinear(&g, x as f64 / cell as f64, y as f64 / cell as f64);
            }
        }
        amp *= 0.6;
        cell = (cell / 2).max(1);
    }
    let n = acc.len() as f64;
    let mean = acc.iter().sum::<f64>() / n;
    let sd = (acc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    let data = acc.into_iter().map(|v| (0.5 + 0.12 * (v - mean) / sd).clamp(0.0, 1.0)).collect();
    Raster::from_vec_unchecked(width, height, data)
}

/// Procedural overhead imagery: textured ground, field patches, buildings
/// with cast shadows, and roads, lightly blurred.
pub fn aerial_background(width: usize, height: usize, seed: u64, params: &AerialParams) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a371_a1);
    let noise = value_noise(width, height, seed, 7, 128);
    let mut img: Vec<f64> = noise.into_data().into_iter().map(|v| (v - 0.5) * params.texture + 0.5).collect();
    let (w, h) = (width as i64, height as i64);
    let fill = |img: &mut Vec<f64>, x0: i64, y0: i64, x1: i64, y1: i64, f: &dyn Fn(f64) -> f64| {
        for y in y0.max(0)..y1.min(h) {
            for x in x0.max(0)..x1.min(w) {
                let i = (y * w + x) as usize;
                img[i] = f(img[i]);
            }
        }
    };
    let patch = Normal::new(0.0, 0.08).expect("valid normal");
    for _ in 0..(width * height) / 4000 {
        let (cw, ch) = (rng.random_range(10..90), rng.random_range(10..90));
        let (x0, y0) = (rng.random_range(-20..w), rng.random_range(-20..h));
        let d = patch.sample(&mut rng);
        fill(&mut img, x0, y0, x0 + cw, y0 + ch, &|v| v + d);
    }
    let bmax = params.building_max as i64;
    let n_buildings = ((width * height) as f64 / params.building_density) as usize;
    if w > bmax + 4 && h > bmax + 4 && params.building_max > params.building_min {
        for _ in 0..n_buildings {
            let cw = rng.random_range(params.building_min as i64..bmax);
            let ch = rng.random_range(params.building_min as i64..bmax);
            let x0 = rng.random_range(0..w - bmax - 4);
            let y0 = rng.random_range(0..h - bmax - 4);
            let level = 0.5 + rng.random_range(-params.building_contrast..=params.building_contrast);
            fill(&mut img, x0, y0, x0 + cw, y0 + ch, &|_| level);
            fill(&mut img, x0 + 2, y0 + ch, x0 + cw + 2, y0 + ch + 3, &|v| v * 0.5);
        }
    }
    let road = Normal::new(0.0, 0.03).expect("valid normal");
    for _ in 0..((width + height) as f64 / params.road_spacing) as usize {
        let horizontal = rng.random::<f64>() < 0.5;
        let level = 0.7 + road.sample(&mut rng);
        let thick = rng.random_range(3..7);
        if horizontal {
            let y0 = rng.random_range(0..h);
            fill(&mut img, 0, y0, w, y0 + thick, &|_| level);
        } else {
            let x0 = rng.random_range(0..w);
            fill(&mut img, x0, 0, x0 + thick, h, &|_| level);
        }
    }
    let raster = Raster::from_vec_unchecked(width, height, img);
    let taps = crate::retina::gaussian_taps(0.7, 7);
    conv::convolve_separable(&raster, &taps, &taps).map(|v| v.clamp(0.0, 1.0))
}
