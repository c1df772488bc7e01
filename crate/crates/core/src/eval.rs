//! Detection metrics, ROC sweeps, the frame-difference baseline and the
//! tuning-curve experiments.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::pipeline::Detector;
use crate::raster::{Raster, Sequence};
use crate::retina;
use crate::rt::{self, Detection};
use crate::synth::{self, GroundTruth, SceneParams, SynthConfig};

/// Match radius in pixels.
pub const MATCH_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub actual_objects: usize,
    pub n_frames: usize,
}

impl MatchResult {
    pub fn merge(self, o: MatchResult) -> MatchResult {
        MatchResult {
            true_positives: self.true_positives + o.true_positives,
            false_positives: self.false_positives + o.false_positives,
            actual_objects: self.actual_objects + o.actual_objects,
            n_frames: self.n_frames + o.n_frames,
        }
    }
}

/// Greedy nearest-first matching within `frames`; ties go to the higher
/// scoring detection, then to input order.
pub fn match_detections_in(
    detections: &[Detection],
    gt: &GroundTruth,
    frames: Range<usize>,
    threshold: f64,
) -> Result<MatchResult> {
    if frames.end > gt.n_frames {
        return Err(Error::FrameOutOfRange { frame: frames.end.saturating_sub(1) });
    }
    let mut by_frame: BTreeMap<usize, Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        if !frames.contains(&d.t) {
            return Err(Error::FrameOutOfRange { frame: d.t });
        }
        by_frame.entry(d.t).or_default().push(d);
    }
    let mut result = MatchResult { n_frames: frames.len(), ..Default::default() };
    for f in frames {
        let objects = gt.at(f);
        result.actual_objects += objects.len();
        let dets = by_frame.get(&f).map(Vec::as_slice).unwrap_or(&[]);
        let mut pairs = Vec::new();
        for (i, d) in dets.iter().enumerate() {
            for (j, o) in objects.iter().enumerate() {
                let dist = (d.x as f64 - o[0]).hypot(d.y as f64 - o[1]);
                if dist <= threshold {
                    pairs.push((dist, -d.score, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
        let mut det_used = vec![false; dets.len()];
        let mut obj_used = vec![false; objects.len()];
        let mut tp = 0;
        for (_, _, i, j) in pairs {
            if !det_used[i] && !obj_used[j] {
                det_used[i] = true;
                obj_used[j] = true;
                tp += 1;
            }
        }
        result.true_positives += tp;
        result.false_positives += dets.len() - tp;
    }
    Ok(result)
}

pub fn match_detections(detections: &[Detection], gt: &GroundTruth, threshold: f64) -> Result<MatchResult> {
    match_detections_in(detections, gt, 0..gt.n_frames, threshold)
}

/// `(D_R, F_A)`.
pub fn metrics(result: &MatchResult) -> Result<(f64, f64)> {
    if result.actual_objects == 0 || result.n_frames == 0 {
        return Err(Error::invalid("metrics need at least one object and one frame"));
    }
    Ok((
        result.true_positives as f64 / result.actual_objects as f64,
        result.false_positives as f64 / result.n_frames as f64,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending.
    pub thresholds: Vec<f64>,
    /// `(F_A, D_R)` per threshold.
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Best `D_R` among points with `F_A ≤ fa`; 0 if none qualifies.
    pub fn detection_rate_at(&self, fa: f64) -> f64 {
        self.points.iter().filter(|p| p.0 <= fa).map(|p| p.1).fold(0.0, f64::max)
    }
}

fn sorted_desc(thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.is_empty() {
        return Err(Error::invalid("ROC needs at least one threshold"));
    }
    let mut t = thresholds.to_vec();
    t.sort_by(|a, b| b.total_cmp(a));
    Ok(t)
}

/// ROC over score maps: for each threshold, detect with that floor and
/// `top_k`, then match.
pub fn roc(
    score_maps: &[(usize, Raster)],
    gt: &GroundTruth,
    frames: Range<usize>,
    thresholds: &[f64],
    top_k: usize,
) -> Result<RocCurve> {
    let thresholds = sorted_desc(thresholds)?;
    let points = thresholds
        .iter()
        .map(|&thr| {
            let dets: Vec<Detection> =
                score_maps.iter().flat_map(|(t, m)| rt::detect_frame(m, *t, top_k, thr)).collect();
            metrics(&match_detections_in(&dets, gt, frames.clone(), MATCH_THRESHOLD)?)
                .map(|(dr, fa)| (fa, dr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve { thresholds, points })
}

/// Same curve as [`roc`] computed from per-frame candidates (regional maxima
/// above 0, best first, at least `top_k` per frame when available). Valid for
/// non-negative thresholds.
pub fn roc_from_candidates(
    candidates: &[Detection],
    gt: &GroundTruth,
    frames: Range<usize>,
    thresholds: &[f64],
    top_k: usize,
) -> Result<RocCurve> {
    let thresholds = sorted_desc(thresholds)?;
    let points = thresholds
        .iter()
        .map(|&thr| {
            let dets = filter_candidates(candidates, top_k, thr);
            metrics(&match_detections_in(&dets, gt, frames.clone(), MATCH_THRESHOLD)?)
                .map(|(dr, fa)| (fa, dr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve { thresholds, points })
}

/// The first `top_k` candidates per frame scoring above `floor`.
pub fn filter_candidates(candidates: &[Detection], top_k: usize, floor: f64) -> Vec<Detection> {
    let mut count: BTreeMap<usize, usize> = BTreeMap::new();
    candidates
        .iter()
        .filter(|d| d.score > floor)
        .filter(|d| {
            let c = count.entry(d.t).or_default();
            *c += 1;
            *c <= top_k
        })
        .copied()
        .collect()
}

/// Every distinct candidate score plus one value above the maximum, so the
/// curve runs from `(0, 0)` to the most permissive point.
pub fn candidate_thresholds(candidates: &[Detection]) -> Vec<f64> {
    let mut s: Vec<f64> = candidates.iter().map(|d| d.score).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    let top = s.first().copied().unwrap_or(0.0);
    let mut out = vec![top + 1.0];
    // the next float down is the highest floor that still admits a score
    out.extend(s.iter().map(|v| v.next_down()));
    out
}

/// ROC at every distinct candidate score, computed incrementally: candidates
/// are admitted in descending score order and only the frame that gains a
/// detection is re-matched. Equals [`roc_from_candidates`] over
/// [`candidate_thresholds`].
pub fn roc_sweep(candidates: &[Detection], gt: &GroundTruth, frames: Range<usize>, top_k: usize) -> Result<RocCurve> {
    let kept = filter_candidates(candidates, top_k, f64::NEG_INFINITY);
    if let Some(d) = kept.iter().find(|d| !frames.contains(&d.t)) {
        return Err(Error::FrameOutOfRange { frame: d.t });
    }
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| kept[b].score.total_cmp(&kept[a].score).then(a.cmp(&b)));
    let empty = match_detections_in(&[], gt, frames.clone(), MATCH_THRESHOLD)?;
    let actual = empty.actual_objects;
    if actual == 0 || frames.is_empty() {
        return Err(Error::invalid("metrics need at least one object and one frame"));
    }
    let n_frames = frames.len() as f64;
    let mut admitted: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    let mut tp_by_frame: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut tp, mut total) = (0usize, 0usize);
    let top = kept.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max);
    let mut thresholds = vec![if top.is_finite() { top + 1.0 } else { 1.0 }];
    let mut points = vec![(0.0, 0.0)];
    let mut i = 0;
    while i < order.len() {
        let score = kept[order[i]].score;
        while i < order.len() && kept[order[i]].score == score {
            let d = kept[order[i]];
            let dets = admitted.entry(d.t).or_default();
            dets.push(d);
            let m = match_detections_in(dets, &gt.restrict([d.t]), d.t..d.t + 1, MATCH_THRESHOLD)?;
            let old = tp_by_frame.insert(d.t, m.true_positives).unwrap_or(0);
            tp = tp + m.true_positives - old;
            total += 1;
            i += 1;
        }
        thresholds.push(score.next_down());
        points.push(((total - tp) as f64 / n_frames, tp as f64 / actual as f64));
    }
    Ok(RocCurve { thresholds, points })
}

/// Score maps `G ∗ |f_t − f_{t−1}|` for `t = 1..n`.
pub fn frame_difference_scores(seq: &Sequence, sigma1: f64, retina_size: usize) -> Result<Vec<(usize, Raster)>> {
    if seq.len() < 2 {
        return Err(Error::SequenceTooShort { needed: 2, got: seq.len() });
    }
    let (w, h) = seq.dims().expect("non-empty");
    if retina_size > w.min(h) {
        return Err(Error::KernelTooLarge { size: retina_size, width: w, height: h });
    }
    let taps = retina::gaussian_taps(sigma1, retina_size);
    Ok((1..seq.len())
        .into_par_iter()
        .map(|t| {
            let f = seq.frames();
            let diff = f[t].zip_map(&f[t - 1], |a, b| (a - b).abs()).expect("same dims");
            (t, retina::smooth_gaussian(&diff, &taps))
        })
        .collect())
}

pub fn frame_difference_baseline(seq: &Sequence, config: &PipelineConfig, top_k: usize) -> Result<Vec<Detection>> {
    let maps = frame_difference_scores(seq, config.sigma1, config.retina_size)?;
    let floor = config.score_floor;
    Ok(maps.iter().flat_map(|(t, m)| rt::detect_frame(m, *t, top_k, floor)).collect())
}

/// Candidates kept per frame when sweeping an ROC over a sequence.
pub const ROC_CANDIDATES: usize = 50;

/// Ranked candidates of the detector and of the frame-difference baseline
/// over the same evaluated frames.
#[derive(Debug, Clone)]
pub struct ScoredScene {
    pub frames: Range<usize>,
    pub gt: GroundTruth,
    pub tsom: Vec<Detection>,
    pub baseline: Vec<Detection>,
}

impl ScoredScene {
    /// ROC curves `(tsom, baseline)`.
    pub fn curves(&self) -> Result<(RocCurve, RocCurve)> {
        Ok((
            roc_sweep(&self.tsom, &self.gt, self.frames.clone(), ROC_CANDIDATES)?,
            roc_sweep(&self.baseline, &self.gt, self.frames.clone(), ROC_CANDIDATES)?,
        ))
    }
}

/// Scores one sequence with both detectors, keeping up to
/// [`ROC_CANDIDATES`] maxima per frame. `frames` defaults to the detector's
/// output frames.
pub fn score_scene(
    seq: &Sequence,
    gt: &GroundTruth,
    config: &PipelineConfig,
    frames: Option<Range<usize>>,
) -> Result<ScoredScene> {
    let det = Detector::for_sequence(config, seq)?;
    let out = det.output_times(seq.len());
    let frames = frames.unwrap_or(out.clone());
    if frames.start < out.start || frames.end > out.end {
        return Err(Error::invalid(format!("frames {frames:?} outside the detector output range {out:?}")));
    }
    let tsom = det.candidates(seq, ROC_CANDIDATES)?.into_iter().filter(|d| frames.contains(&d.t)).collect();
    let baseline = frame_difference_scores(seq, config.sigma1, config.retina_size)?
        .iter()
        .filter(|(t, _)| frames.contains(t))
        .flat_map(|(t, m)| rt::detect_frame(m, *t, ROC_CANDIDATES, 0.0))
        .collect();
    Ok(ScoredScene { frames: frames.clone(), gt: gt.restrict(frames), tsom, baseline })
}

/// Concatenates scenes into one, renumbering the evaluated frames of each
/// scene contiguously so that false-alarm rates are per evaluated frame.
pub fn pool_scenes(scenes: &[ScoredScene]) -> Result<ScoredScene> {
    let total: usize = scenes.iter().map(|s| s.frames.len()).sum();
    let mut gt = GroundTruth::new(total);
    let (mut tsom, mut baseline) = (Vec::new(), Vec::new());
    let mut offset = 0;
    for s in scenes {
        let shift = |d: &Detection| Detection { t: d.t - s.frames.start + offset, ..*d };
        tsom.extend(s.tsom.iter().filter(|d| s.frames.contains(&d.t)).map(shift));
        baseline.extend(s.baseline.iter().filter(|d| s.frames.contains(&d.t)).map(shift));
        for t in s.frames.clone() {
            for p in s.gt.at(t) {
                gt.push(t - s.frames.start + offset, p[0], p[1])?;
            }
        }
        offset += s.frames.len();
    }
    Ok(ScoredScene { frames: 0..total, gt, tsom, baseline })
}

/// Scene parameter varied by a tuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Radius,
    VA,
    Luminance,
    VB,
    ThetaBg,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Radius => "radius",
            SweepParam::VA => "v_a",
            SweepParam::Luminance => "luminance",
            SweepParam::VB => "v_b",
            SweepParam::ThetaBg => "theta_bg",
        }
    }

    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "radius" => Some(SweepParam::Radius),
            "v_a" | "va" | "velocity" => Some(SweepParam::VA),
            "luminance" | "lm" => Some(SweepParam::Luminance),
            "v_b" | "vb" => Some(SweepParam::VB),
            "theta_bg" | "direction" => Some(SweepParam::ThetaBg),
            _ => None,
        }
    }

    pub fn apply(self, scene: &SceneParams, value: f64) -> SceneParams {
        let mut s = scene.clone();
        match self {
            SweepParam::Radius => s.radius = value,
            SweepParam::VA => s.v_a = value,
            SweepParam::Luminance => s.luminance = value,
            SweepParam::VB => s.v_b = value,
            SweepParam::ThetaBg => s.theta_bg = value,
        }
        s
    }

    /// The sweep values used by the command-line experiments.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::Radius => (1..=20).map(f64::from).collect(),
            SweepParam::VA => vec![10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0, 250.0, 300.0, 350.0, 400.0],
            SweepParam::Luminance => (0..=10).map(|i| i as f64 / 10.0).collect(),
            SweepParam::VB => (0..=8).map(|i| i as f64 * 50.0).collect(),
            SweepParam::ThetaBg => (0..8).map(|i| i as f64 * std::f64::consts::PI / 4.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub value: f64,
    /// Mean scale-selection response at the object over the response frames.
    pub response: f64,
    /// Fraction of frames whose top detection lies within the match radius.
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub param: SweepParam,
    pub points: Vec<TuningPoint>,
}

impl TuningCurve {
    pub fn peak(&self) -> Option<TuningPoint> {
        self.points.iter().copied().max_by(|a, b| a.response.total_cmp(&b.response))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    /// Frames rendered for the response measurement (≥ 3).
    pub response_frames: usize,
    /// Also run top-1 localization over the full scene length.
    pub precision: bool,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { response_frames: 5, precision: false }
    }
}

/// Mean scale-selection response at ground truth over the output frames of
/// `seq`.
pub fn response_at_truth(det: &Detector, seq: &Sequence, gt: &GroundTruth) -> Result<f64> {
    let times: Vec<usize> = det.output_times(seq.len()).collect();
    let values = times
        .par_iter()
        .map(|&t| {
            let trace = det.trace_frame(seq, t)?;
            Ok(gt.at(t).iter().map(|p| trace.scale_response_at(p[0].round() as usize, p[1].round() as usize)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / times.len().max(1) as f64)
}

/// Fraction of output frames whose best detection is within the match
/// radius of an object.
pub fn localization_precision(det: &Detector, seq: &Sequence, gt: &GroundTruth) -> Result<f64> {
    let frames = det.output_times(seq.len());
    let dets = filter_candidates(&det.candidates(seq, 1)?, 1, 0.0);
    let m = match_detections_in(&dets, gt, frames.clone(), MATCH_THRESHOLD)?;
    Ok(m.true_positives as f64 / frames.len().max(1) as f64)
}

pub fn tuning_sweep(
    param: SweepParam,
    values: &[f64],
    base: &SynthConfig,
    config: &PipelineConfig,
    options: TuneOptions,
) -> Result<TuningCurve> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    if options.response_frames < 3 {
        return Err(Error::invalid("response_frames must be at least 3"));
    }
    let size = base.scene.frame_size;
    let det = Detector::new(config, size, size)?;
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let scene = param.apply(&base.scene, v);
        let short = SynthConfig {
            background: base.background.clone(),
            scene: SceneParams { n_frames: options.response_frames, ..scene.clone() },
        };
        let (seq, gt) = synth::generate(&short)?;
        let response = response_at_truth(&det, &seq, &gt)?;
        let precision = if options.precision {
            let (seq, gt) = synth::generate(&SynthConfig { background: base.background.clone(), scene })?;
            Some(localization_precision(&det, &seq, &gt)?)
        } else {
            None
        };
        points.push(TuningPoint { value: v, response, precision });
    }
    Ok(TuningCurve { param, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn det(x: usize, y: usize, t: usize, score: f64) -> Detection {
        Detection { x, y, t, score }
    }

    fn gt_line(n: usize) -> GroundTruth {
        let mut gt = GroundTruth::new(n);
        for k in 0..n {
            gt.push(k, 10.0, 10.0).unwrap();
        }
        gt
    }

    #[test]
    fn inclusive_threshold() {
        let gt = gt_line(1);
        let m = match_detections(&[det(13, 14, 0, 1.0)], &gt, 5.0).unwrap();
        assert_eq!((m.true_positives, m.false_positives), (1, 0));
        // 4√2 ≈ 5.66
        let m = match_detections(&[det(14, 14, 0, 1.0)], &gt, 5.0).unwrap();
        assert_eq!((m.true_positives, m.false_positives), (0, 1));
    }

    #[test]
    fn eq27_arithmetic() {
        let m = MatchResult { true_positives: 140, false_positives: 30, actual_objects: 200, n_frames: 200 };
        assert_eq!(metrics(&m).unwrap(), (0.7, 0.15));
        let m = MatchResult { true_positives: 894, false_positives: 0, actual_objects: 1000, n_frames: 1000 };
        assert_eq!(metrics(&m).unwrap(), (0.894, 0.0));
        assert!(metrics(&MatchResult::default()).is_err());
    }

    #[test]
    fn greedy_does_not_double_count() {
        let mut gt = GroundTruth::new(1);
        gt.push(0, 10.0, 10.0).unwrap();
        gt.push(0, 14.0, 10.0).unwrap();
        let dets = [det(12, 10, 0, 1.0), det(11, 10, 0, 0.5), det(40, 40, 0, 2.0)];
        let m = match_detections(&dets, &gt, 5.0).unwrap();
        assert_eq!(m.true_positives, 2);
        assert_eq!(m.false_positives, 1);
        assert!(match_detections(&[det(1, 1, 3, 1.0)], &gt, 5.0).is_err());
    }

    #[test]
    fn metrics_are_scale_free() {
        let gt = gt_line(4);
        let dets = vec![det(10, 10, 0, 1.0), det(30, 30, 1, 1.0), det(11, 9, 2, 1.0), det(0, 0, 2, 0.5)];
        let a = metrics(&match_detections(&dets, &gt, 5.0).unwrap()).unwrap();
        let gt2 = gt_line(8);
        let mut dets2 = dets.clone();
        dets2.extend(dets.iter().map(|d| Detection { t: d.t + 4, ..*d }));
        let b = metrics(&match_detections(&dets2, &gt2, 5.0).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn roc_examples() {
        let gt = gt_line(3);
        let maps: Vec<(usize, Raster)> = (0..3)
            .map(|t| {
                let mut m = Raster::zeros(20, 20);
                m.set(10, 10, 2.0);
                m.set(2, 17, 1.0);
                (t, m)
            })
            .collect();
        let curve = roc(&maps, &gt, 0..3, &[0.0, 5.0, 1.5], 5).unwrap();
        assert_eq!(curve.thresholds, vec![5.0, 1.5, 0.0]);
        assert_eq!(curve.points[0], (0.0, 0.0));
        assert_eq!(curve.points[1], (0.0, 1.0));
        assert_eq!(curve.points[2], (1.0, 1.0));
        assert_eq!(curve.detection_rate_at(0.5), 1.0);

        let candidates: Vec<Detection> =
            maps.iter().flat_map(|(t, m)| rt::detect_frame(m, *t, 5, 0.0)).collect();
        let from_candidates = roc_from_candidates(&candidates, &gt, 0..3, &[0.0, 5.0, 1.5], 5).unwrap();
        assert_eq!(from_candidates, curve);
    }

    #[test]
    fn incremental_sweep_matches_direct_roc() {
        let mut gt = GroundTruth::new(6);
        for k in 0..6 {
            gt.push(k, 10.0 + k as f64, 12.0).unwrap();
        }
        gt.push(3, 30.0, 30.0).unwrap();
        let mut c = Vec::new();
        for k in 1..5 {
            c.push(det(40, 40, k, 3.0 - 0.1 * k as f64));
            c.push(det(10 + k, 13, k, 1.0 + 0.3 * k as f64));
            c.push(det(29, 31, k, 0.5));
            c.push(det(0, 0, k, 0.2));
        }
        for k in [1, 4] {
            c.push(det(11 + k, 12, k, 0.9));
        }
        // per-frame candidates must be best first
        c.sort_by(|a, b| a.t.cmp(&b.t).then(b.score.total_cmp(&a.score)));
        for top_k in [1, 2, 5] {
            let fast = roc_sweep(&c, &gt, 1..5, top_k).unwrap();
            let slow = roc_from_candidates(&c, &gt, 1..5, &fast.thresholds, top_k).unwrap();
            assert_eq!(fast, slow, "top_k {top_k}");
        }
    }

    #[test]
    fn candidate_thresholds_admit_each_score() {
        let c = vec![det(0, 0, 0, 2.0), det(5, 5, 0, 1.0), det(1, 1, 1, 1.0)];
        let t = candidate_thresholds(&c);
        assert_eq!(t.len(), 3);
        assert_eq!(filter_candidates(&c, 5, t[0]).len(), 0);
        assert_eq!(filter_candidates(&c, 5, t[1]).len(), 1);
        assert_eq!(filter_candidates(&c, 5, t[2]).len(), 3);
    }

    #[test]
    fn frame_difference_examples() {
        let still = Sequence::new(vec![Raster::filled(16, 16, 0.4); 4], 50.0).unwrap();
        let cfg = PipelineConfig { score_floor: 1e-9, ..Default::default() };
        assert!(frame_difference_baseline(&still, &cfg, 3).unwrap().is_empty());

        let disk = |cx: f64| {
            let mut f = Raster::zeros(64, 64);
            synth::draw_disk(&mut f, cx, 30.0, 3.0, 1.0);
            f
        };
        let seq = Sequence::new((0..6).map(|k| disk(15.0 + 3.0 * k as f64)).collect(), 50.0).unwrap();
        let dets = frame_difference_baseline(&seq, &PipelineConfig::default(), 1).unwrap();
        assert_eq!(dets.len(), 5);
        for d in dets {
            let cx = 15.0 + 3.0 * d.t as f64;
            assert!((d.x as f64 - cx).hypot(d.y as f64 - 30.0) <= 5.0);
        }

        let repeat = Sequence::new(vec![disk(10.0), disk(13.0), disk(13.0)], 50.0).unwrap();
        let maps = frame_difference_scores(&repeat, 1.0, 5).unwrap();
        assert!(maps[1].1.is_all_zero());
    }

    #[test]
    fn small_radius_sweep_prefers_small_objects() {
        let bg = Arc::new(synth::value_noise(200, 200, 4, 5, 32));
        let base = SynthConfig {
            background: bg,
            scene: SceneParams { frame_size: 96, v_b: 0.0, start: [40.0, 48.0], ..SceneParams::default() },
        };
        let curve =
            tuning_sweep(SweepParam::Radius, &[3.0, 17.0], &base, &PipelineConfig::default(), TuneOptions::default())
                .unwrap();
        assert!(curve.points[0].response > 2.0 * curve.points[1].response, "{curve:?}");
        assert_eq!(curve.peak().unwrap().value, 3.0);
    }
}
