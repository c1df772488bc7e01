//! End-to-end acceptance checks, one test per criterion. Each test prints a
//! single `criterion N: PASS|FAIL ...` line with the measured values.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsom::circuit;
use tsom::cli::BackgroundSpec;
use tsom::dendrite::{dendrite_response, gabor_bank, temporal_kernel, GaborKernel};
use tsom::eval::{self, SweepParam, TuneOptions};
use tsom::rt::quadrature_energy;
use tsom::soma::zscore_map;
use tsom::synth::{self, AerialParams, SceneParams, SynthConfig};
use tsom::{Detector, PipelineConfig, Raster, Sequence};

const PROPOSITION_TRIALS: u64 = 100_000;
const PROPOSITION_BUDGET: Duration = Duration::from_secs(10);
const SCALE_PEAK: (f64, f64) = (2.0, 5.0);
const SCALE_R17_RATIO: f64 = 0.5;
const SCALE_BUDGET: Duration = Duration::from_secs(300);
const VELOCITY_PEAK: (f64, f64) = (80.0, 220.0);
/// Allowed rise away from the peak, as a fraction of the peak response.
const VELOCITY_JITTER: f64 = 0.05;
const DIRECTION_WIN_RATE: f64 = 0.9;
const COMPARISON_SCENES: usize = 4;
const COMPARISON_FA: [f64; 3] = [0.5, 1.0, 2.0];
const COMPARISON_MARGIN: f64 = 0.15;
const COMPARISON_LEVEL: f64 = 0.7;
const TRACE_RADIUS: f64 = 5.0;
const CONV_TOL: f64 = 1e-9;
const ZSCORE_TOL: f64 = 1e-9;
const PMF_TOL: f64 = 1e-10;
const SEED: u64 = 1;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn aerial(size: usize, seed: u64) -> Arc<Raster> {
    Arc::new(synth::aerial_background(size, size, seed, &AerialParams::default()))
}

fn tuning_base(luminance: f64) -> SynthConfig {
    let scene = SceneParams { start: [200.0, 256.0], luminance, ..SceneParams::default() };
    SynthConfig { background: aerial(1200, SEED), scene }
}

#[test]
fn criterion_1_two_stage_accumulation_never_wins() {
    let start = Instant::now();
    let report_ = circuit::verify_proposition(PROPOSITION_TRIALS, 1..=20, circuit::DEFAULT_SEED).unwrap();
    let elapsed = start.elapsed();
    report(
        1,
        report_.passed() && report_.grid_instances > 0 && elapsed < PROPOSITION_BUDGET,
        format!(
            "{} random + {} grid instances, {} violations, max E1-E2 {:e}, {:.2?}",
            report_.trials, report_.grid_instances, report_.violations, report_.max_e1_minus_e2, elapsed
        ),
    );
}

#[test]
fn criterion_2_static_scenes_give_exact_zeros() {
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let noise = Raster::from_fn(64, 48, |_, _| rng.random());
    let scenes = [
        synth::aerial_background(96, 96, 7, &AerialParams::default()),
        noise,
        Raster::filled(40, 40, 0.3),
        Raster::zeros(32, 32),
    ];
    let mut failures = Vec::new();
    for (i, frame) in scenes.into_iter().enumerate() {
        let seq = Sequence::new(vec![frame; 6], 50.0).unwrap();
        let stack = dendrite_response(&seq, &cfg).unwrap();
        let det = Detector::for_sequence(&cfg, &seq).unwrap();
        let scores = det.scores(&seq).unwrap();
        let detections: Vec<_> = [f64::MIN_POSITIVE, 1e-12, 1.0]
            .iter()
            .flat_map(|&floor| {
                scores.iter().flat_map(move |(t, m)| tsom::rt::detect_frame(m, *t, usize::MAX, floor))
            })
            .collect();
        if !stack.maps().iter().all(Raster::is_all_zero) {
            failures.push(format!("scene {i}: dendrite"));
        }
        if !scores.iter().all(|(_, m)| m.is_all_zero()) {
            failures.push(format!("scene {i}: rt"));
        }
        if !detections.is_empty() || !det.detect(&seq).unwrap().is_empty() {
            failures.push(format!("scene {i}: detections"));
        }
    }
    report(2, failures.is_empty(), format!("4 static scenes, non-zero outputs: {failures:?}"));
}

#[test]
fn criterion_3_scale_tuning_peaks_small() {
    let start = Instant::now();
    let p = SweepParam::Radius;
    let curve =
        eval::tuning_sweep(p, &p.default_values(), &tuning_base(0.0), &PipelineConfig::default(), TuneOptions::default())
            .unwrap();
    let elapsed = start.elapsed();
    let peak = curve.peak().unwrap();
    let r17 = curve.points.iter().find(|q| q.value == 17.0).unwrap().response;
    let ratio = r17 / peak.response;
    report(
        3,
        (SCALE_PEAK.0..=SCALE_PEAK.1).contains(&peak.value) && ratio < SCALE_R17_RATIO && elapsed < SCALE_BUDGET,
        format!("peak at radius {} (response {:.3}), r17/peak {:.3}, {:.1?}", peak.value, peak.response, ratio, elapsed),
    );
}

fn unimodal(values: &[f64], peak_idx: usize, tolerance: f64) -> bool {
    let rising = values[..=peak_idx].windows(2).all(|w| w[1] >= w[0] - tolerance);
    let falling = values[peak_idx..].windows(2).all(|w| w[1] <= w[0] + tolerance);
    rising && falling
}

#[test]
fn criterion_4_velocity_tuning() {
    let p = SweepParam::VA;
    let values = p.default_values();
    let curve = eval::tuning_sweep(p, &values, &tuning_base(0.0), &PipelineConfig::default(), TuneOptions::default())
        .unwrap();
    let responses: Vec<f64> = curve.points.iter().map(|q| q.response).collect();
    let peak = curve.peak().unwrap();
    let peak_idx = curve.points.iter().position(|q| q.value == peak.value).unwrap();
    let positive = responses.iter().all(|&r| r > 0.0);
    let shape = unimodal(&responses, peak_idx, VELOCITY_JITTER * peak.response);
    let min = responses.iter().copied().fold(f64::INFINITY, f64::min);
    report(
        4,
        positive && (VELOCITY_PEAK.0..=VELOCITY_PEAK.1).contains(&peak.value) && shape,
        format!("peak at {} px/s, min response {:.3}, unimodal {shape}", peak.value, min),
    );
}

#[test]
fn criterion_5_direction_selectivity() {
    let cfg = PipelineConfig::default();
    let scene = SceneParams {
        n_frames: 40,
        v_b: 0.0,
        luminance: 1.0,
        start: [30.0, 256.0],
        bounce: false,
        ..SceneParams::default()
    };
    let (seq, gt) = synth::generate(&SynthConfig { background: aerial(scene.required_background(), SEED), scene }).unwrap();
    let det = Detector::for_sequence(&cfg, &seq).unwrap();
    let times: Vec<usize> = det.output_times(seq.len()).collect();
    let wins = times
        .iter()
        .filter(|&&t| {
            let trace = det.trace_frame(&seq, t).unwrap();
            let [x, y] = gt.at(t)[0];
            let e: Vec<f64> = trace.energy.iter().map(|m| m.get(x.round() as usize, y.round() as usize)).collect();
            e[1..].iter().all(|&other| e[0] > other)
        })
        .count();
    let rate = wins as f64 / times.len() as f64;
    report(
        5,
        rate >= DIRECTION_WIN_RATE,
        format!("theta=0 strictly strongest on {wins}/{} interior frames ({:.3})", times.len(), rate),
    );
}

#[test]
fn criterion_6_detection_beats_frame_difference() {
    let cfg = PipelineConfig::default();
    let scenes: Vec<_> = synth::comparison_scenes(COMPARISON_SCENES, SEED, &AerialParams::default())
        .iter()
        .map(|c| {
            let (seq, gt) = synth::generate(c).unwrap();
            eval::score_scene(&seq, &gt, &cfg, None).unwrap()
        })
        .collect();
    let (tsom, baseline) = eval::pool_scenes(&scenes).unwrap().curves().unwrap();
    let rows: Vec<(f64, f64, f64)> =
        COMPARISON_FA.iter().map(|&fa| (fa, tsom.detection_rate_at(fa), baseline.detection_rate_at(fa))).collect();
    let margin = rows.iter().all(|&(_, t, b)| t - b >= COMPARISON_MARGIN);
    let level = tsom.detection_rate_at(1.0) >= COMPARISON_LEVEL;
    let detail: Vec<String> = rows.iter().map(|(fa, t, b)| format!("F_A<={fa}: tsom {t:.3} fd {b:.3}")).collect();
    report(
        6,
        margin && level,
        format!("{} scenes x 200 frames, {}; margin {margin}, level {level}", COMPARISON_SCENES, detail.join(", ")),
    );
}

#[test]
fn criterion_7_validation_scene_trace() {
    let scene = SceneParams { n_frames: 20, start: [282.0, 102.0], theta_bg: PI / 2.0, ..SceneParams::default() };
    let bg = BackgroundSpec::default().render(scene.required_background(), SEED).unwrap();
    let (seq, gt) = synth::generate(&SynthConfig { background: Arc::new(bg), scene }).unwrap();
    let det = Detector::for_sequence(&PipelineConfig::default(), &seq).unwrap();
    let (x, y, _) = det.trace_frame(&seq, 2).unwrap().output.argmax();
    let [gx, gy] = gt.at(2)[0];
    let dist = (x as f64 - gx).hypot(y as f64 - gy);

    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    tsom::io::save_sequence(&seq, &frames).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_tsom"))
        .arg("detect")
        .arg(&frames)
        .args(["--trace", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    let layers: Vec<bool> = ["retina", "dendrite", "soma", "rt"]
        .iter()
        .map(|l| out.join(format!("layers/frame_0002_{l}.png")).is_file())
        .collect();
    report(
        7,
        dist <= TRACE_RADIUS && status.status.success() && layers.iter().all(|&b| b),
        format!("frame-2 argmax ({x},{y}), truth ({gx},{gy}), distance {dist:.2}; layer maps written {layers:?}"),
    );
}

fn brute_force_3d(seq: &Sequence, g: &GaborKernel, taps: &[f64], t: usize) -> Raster {
    let h = g.size() as isize / 2;
    let half = taps.len() as isize / 2;
    let f = seq.frames();
    Raster::from_fn(f[0].width(), f[0].height(), |x, y| {
        let mut s = 0.0;
        for k in -half..=half {
            let frame = &f[(t as isize + k) as usize];
            for v in -h..=h {
                for u in -h..=h {
                    s += taps[(k + half) as usize] * g.at(u, v) * frame.get_clamped(x as isize - u, y as isize - v);
                }
            }
        }
        s
    })
}

#[test]
fn criterion_8_numerical_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let frames: Vec<Raster> = (0..5).map(|_| Raster::from_fn(9, 9, |_, _| rng.random())).collect();
    let seq = Sequence::new(frames, 50.0).unwrap();
    let cfg = PipelineConfig { kernel_size: 7, ..PipelineConfig::default() };
    let stack = dendrite_response(&seq, &cfg).unwrap();
    let bank = gabor_bank(&cfg).unwrap();
    let taps = temporal_kernel().taps().to_vec();
    let mut conv_err: f64 = 0.0;
    for (ti, &t) in stack.times().iter().enumerate() {
        for d in 0..cfg.n_directions {
            for p in 0..2 {
                let reference = brute_force_3d(&seq, &bank[2 * d + p], &taps, t);
                for (a, b) in stack.get(ti, d, p).data().iter().zip(reference.data()) {
                    conv_err = conv_err.max((a - b).abs());
                }
            }
        }
    }

    let mut z_err: f64 = 0.0;
    for _ in 0..5 {
        let map = Raster::from_fn(31, 17, |_, _| rng.random_range(-3.0..7.0));
        let z = zscore_map(&map);
        let n = z.data().len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let sd = (z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        z_err = z_err.max(mean.abs()).max((sd - 1.0).abs());
    }

    let mut pmf_err: f64 = 0.0;
    for lambda in [0.0, 0.1, 1.0, 7.5, 30.0] {
        let total: f64 = (0..400).map(|n| circuit::activation_pmf(lambda, n).unwrap()).sum();
        pmf_err = pmf_err.max((total - 1.0).abs());
    }

    let one = |v: f64| Raster::filled(1, 1, v);
    let pythagorean = [(3.0, 4.0, 5.0), (5.0, 12.0, 13.0), (0.0, 0.0, 0.0), (-8.0, 15.0, 17.0)]
        .iter()
        .all(|&(a, b, c)| quadrature_energy(&one(a), &one(b)).data() == [c]);

    report(
        8,
        conv_err <= CONV_TOL && z_err <= ZSCORE_TOL && pmf_err <= PMF_TOL && pythagorean,
        format!("3-D conv {conv_err:.1e}, z-score {z_err:.1e}, pmf {pmf_err:.1e}, pythagorean {pythagorean}"),
    );
}

fn tsom(args: &[&str], out: &Path) -> std::process::Output {
    let o = Command::new(env!("CARGO_BIN_EXE_tsom")).args(args).arg("--out").arg(out).output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn criterion_9_outputs_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("scene.json");
    std::fs::write(&spec, r#"{"scene": {"frame_size": 160, "n_frames": 24, "start": [40, 80], "theta_bg": 1.0}}"#)
        .unwrap();
    let spec_s = spec.to_str().unwrap();
    tsom(&["synth", "--config", spec_s, "--seed", "5"], &d.join("syn"));
    let frames = d.join("syn/frames");
    let frames_s = frames.to_str().unwrap();

    let mut identical = Vec::new();
    let runs: Vec<Vec<(String, Vec<u8>)>> = [1, 2, 4]
        .iter()
        .map(|threads| {
            let t = threads.to_string();
            let base = d.join(format!("t{threads}"));
            tsom(&["detect", frames_s, "--top-k", "3", "--threads", &t], &base.join("detect"));
            tsom(&["eval", "--sequence", frames_s, "--threads", &t], &base.join("eval"));
            tsom(&["tune", "radius", "--values", "2,3,6", "--scene", spec_s, "--seed", "5", "--threads", &t], &base.join("tune"));
            tsom(&["circuit-verify", "--trials", "5000", "--seed", "9", "--threads", &t], &base.join("circuit"));
            tsom(&["synth", "--config", spec_s, "--seed", "5", "--threads", &t], &base.join("syn"));
            [
                "detect/detections.csv",
                "eval/roc_tsom.csv",
                "eval/roc_frame_difference.csv",
                "tune/tune_radius.csv",
                "circuit/circuit_report.json",
                "syn/ground_truth.csv",
                "syn/frames/frame_0023.png",
            ]
            .iter()
            .map(|f| (f.to_string(), std::fs::read(base.join(f)).unwrap()))
            .collect()
        })
        .collect();
    for (i, (name, bytes)) in runs[0].iter().enumerate() {
        identical.push((name.clone(), runs[1..].iter().all(|r| &r[i].1 == bytes)));
    }
    let pass = identical.iter().all(|(_, same)| *same);
    report(9, pass, format!("threads 1/2/4 byte-identical: {identical:?}"));
}
