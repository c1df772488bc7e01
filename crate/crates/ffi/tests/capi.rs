use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use tsom_ffi::*;

const W: usize = 48;
const H: usize = 48;

fn moving_square(k: usize) -> Vec<f64> {
    let mut f = vec![1.0; W * H];
    let (cx, cy) = (10 + 3 * k, 24);
    for y in cy - 2..=cy + 2 {
        for x in cx - 2..=cx + 2 {
            f[y * W + x] = 0.0;
        }
    }
    f
}

fn last_error() -> String {
    let p = tsom_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn detect_round_trip_matches_library() {
    unsafe {
        let mut det = ptr::null_mut();
        assert_eq!(tsom_detector_new(ptr::null(), W, H, &mut det), TsomStatus::Ok);
        let mut seq = ptr::null_mut();
        assert_eq!(tsom_sequence_new(W, H, 50.0, &mut seq), TsomStatus::Ok);
        let frames: Vec<Vec<f64>> = (0..6).map(moving_square).collect();
        for f in &frames {
            assert_eq!(tsom_sequence_push_frame(seq, f.as_ptr(), f.len()), TsomStatus::Ok);
        }
        assert_eq!(tsom_sequence_len(seq), 6);

        let mut dets = ptr::null_mut();
        assert_eq!(tsom_detect(det, seq, &mut dets), TsomStatus::Ok);
        let got: Vec<TsomDetection> = (0..tsom_detections_len(dets))
            .map(|i| {
                let mut d = TsomDetection { x: 0, y: 0, frame: 0, score: 0.0 };
                assert_eq!(tsom_detections_get(dets, i, &mut d), TsomStatus::Ok);
                d
            })
            .collect();

        let rasters = frames.into_iter().map(|f| tsom::Raster::new(W, H, f).unwrap()).collect();
        let expected = tsom::detect_sequence(&tsom::Sequence::new(rasters, 50.0).unwrap(), &Default::default()).unwrap();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!((g.x, g.y, g.frame, g.score), (e.x, e.y, e.t, e.score));
        }

        let mut d = TsomDetection { x: 0, y: 0, frame: 0, score: 0.0 };
        assert_eq!(tsom_detections_get(dets, got.len(), &mut d), TsomStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        tsom_detections_free(dets);
        tsom_sequence_free(seq);
        tsom_detector_free(det);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut det = ptr::null_mut();
        assert_eq!(tsom_detector_new(ptr::null(), W, H, ptr::null_mut()), TsomStatus::NullPointer);
        let bad = CString::new(r#"{"soma_mu": 2.0}"#).unwrap();
        assert_eq!(tsom_detector_new(bad.as_ptr(), W, H, &mut det), TsomStatus::Validation);
        assert!(last_error().contains("soma_mu"));
        assert!(det.is_null());

        let unknown = CString::new(r#"{"no_such_field": 1}"#).unwrap();
        assert_eq!(tsom_detector_new(unknown.as_ptr(), W, H, &mut det), TsomStatus::Validation);

        let mut seq = ptr::null_mut();
        assert_eq!(tsom_sequence_new(0, H, 50.0, &mut seq), TsomStatus::InvalidArgument);
        let missing = CString::new("/nonexistent/tsom/frames").unwrap();
        assert_eq!(tsom_sequence_load(missing.as_ptr(), 50.0, &mut seq), TsomStatus::Io);

        assert_eq!(tsom_sequence_new(W, H, 50.0, &mut seq), TsomStatus::Ok);
        let short = vec![0u8; 10];
        assert_eq!(tsom_sequence_push_frame_u8(seq, short.as_ptr(), short.len()), TsomStatus::InvalidArgument);
        let nan = vec![f64::NAN; W * H];
        assert_eq!(tsom_sequence_push_frame(seq, nan.as_ptr(), nan.len()), TsomStatus::Validation);

        assert_eq!(tsom_detector_new(ptr::null(), W, H, &mut det), TsomStatus::Ok);
        let mut dets = ptr::null_mut();
        assert_ne!(tsom_detect(det, seq, &mut dets), TsomStatus::Ok);
        assert!(dets.is_null());

        assert_eq!(tsom_detections_len(ptr::null()), 0);
        tsom_sequence_free(seq);
        tsom_detector_free(det);
        tsom_sequence_free(ptr::null_mut());
        tsom_detections_free(ptr::null_mut());
        tsom_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(tsom_sequence_new(0, 1, 50.0, &mut seq), TsomStatus::InvalidArgument);
        assert!(!tsom_last_error().is_null());
        assert_eq!(tsom_sequence_new(1, 1, 50.0, &mut seq), TsomStatus::Ok);
        assert!(tsom_last_error().is_null());
        tsom_sequence_free(seq);
    }
}

#[test]
fn u8_frames_scale_to_unit_range() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(tsom_sequence_new(2, 1, 50.0, &mut seq), TsomStatus::Ok);
        let bytes = [0u8, 255];
        assert_eq!(tsom_sequence_push_frame_u8(seq, bytes.as_ptr(), 2), TsomStatus::Ok);
        assert_eq!(tsom_sequence_len(seq), 1);
        tsom_sequence_free(seq);
    }
}

#[test]
fn default_config_is_valid_json() {
    let s = tsom_default_config_json();
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { tsom_string_free(s) };
    let cfg = tsom::PipelineConfig::from_json(&text).unwrap();
    assert_eq!(cfg, tsom::PipelineConfig::default());
    let v = unsafe { CStr::from_ptr(tsom_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn circuit_verify_reports_no_violations() {
    let mut violations = u64::MAX;
    let status = unsafe { tsom_circuit_verify(2_000, 1, 20, 7, &mut violations) };
    assert_eq!(status, TsomStatus::Ok);
    assert_eq!(violations, 0);
    assert_eq!(unsafe { tsom_circuit_verify(0, 1, 20, 7, ptr::null_mut()) }, TsomStatus::Validation);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tsom.h")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "tsom_last_error",
        "tsom_version",
        "tsom_default_config_json",
        "tsom_string_free",
        "tsom_detector_new",
        "tsom_detector_free",
        "tsom_sequence_new",
        "tsom_sequence_load",
        "tsom_sequence_push_frame",
        "tsom_sequence_push_frame_u8",
        "tsom_sequence_len",
        "tsom_sequence_free",
        "tsom_detect",
        "tsom_detections_len",
        "tsom_detections_get",
        "tsom_detections_free",
        "tsom_circuit_verify",
    ] {
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(h.contains("typedef struct TsomDetector TsomDetector;"));
    assert!(h.contains("TSOM_STATUS_PROPERTY_VIOLATION = 5"));
}

#[test]
fn header_compiles_as_c_and_cxx() {
    if !have_cc() {
        eprintln!("no C compiler, skipping");
        return;
    }
    for (compiler, std) in [("cc", "-std=c99"), ("c++", "-std=c++11")] {
        let out = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", std, "-x"])
            .arg(if compiler == "cc" { "c" } else { "c++" })
            .arg(header())
            .output()
            .unwrap();
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libtsom_ffi.a");
    lib.is_file().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib().filter(|_| have_cc()) else {
        eprintln!("static library or C compiler unavailable, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c");
    let build = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert_eq!(String::from_utf8_lossy(&run.stdout).lines().count(), 4);
}
