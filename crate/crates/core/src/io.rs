//! Image and CSV input/output.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::PngDecoder;
use image::{AnimationDecoder, DynamicImage, GrayImage, ImageReader, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Frame, Raster, Sequence};
use crate::rt::Detection;
use crate::synth::GroundTruth;

pub const DEFAULT_FPS: f64 = 50.0;

/// Marker radius drawn by [`overlay_detections`].
pub const MARKER_RADIUS: f64 = 5.0;

fn rec601(r: u8, g: u8, b: u8) -> f64 {
    if r == g && g == b {
        return r as f64 / 255.0;
    }
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Luminance of a decoded image: gray inputs map `v → v/255` exactly, color
/// inputs use Rec. 601 weights. Alpha is ignored.
pub fn luminance(img: &DynamicImage) -> Result<Frame> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Raster::from_u8(w, h, g.as_raw()),
        DynamicImage::ImageLumaA8(g) => {
            let bytes: Vec<u8> = g.pixels().map(|p| p.0[0]).collect();
            Raster::from_u8(w, h, &bytes)
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma16();
            Raster::new(w, h, g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        _ => Ok(rgba_luminance(&img.to_rgba8())),
    }
}

fn rgba_luminance(img: &RgbaImage) -> Frame {
    let (w, h) = (img.width() as usize, img.height() as usize);
    Raster::from_vec_unchecked(w, h, img.pixels().map(|p| rec601(p.0[0], p.0[1], p.0[2])).collect())
}

fn decode_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image { path: path.to_path_buf(), message: e.to_string() }
}

/// Frames of one PNG file; an animated PNG yields every frame.
pub fn load_frames(path: &Path) -> Result<Vec<Frame>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = PngDecoder::new(BufReader::new(file)).map_err(|e| decode_error(path, e))?;
    if decoder.is_apng().map_err(|e| decode_error(path, e))? {
        let frames = decoder.apng().map_err(|e| decode_error(path, e))?.into_frames();
        return frames
            .map(|f| f.map(|f| rgba_luminance(f.buffer())).map_err(|e| decode_error(path, e)))
            .collect();
    }
    let img = DynamicImage::from_decoder(decoder).map_err(|e| decode_error(path, e))?;
    Ok(vec![luminance(&img)?])
}

fn is_png(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// PNG files of a directory in natural order (`frame2` before `frame10`).
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && is_png(p))
        .collect();
    files.sort_by(|a, b| {
        let name = |p: &PathBuf| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        natord::compare(&name(a), &name(b))
    });
    Ok(files)
}

/// Loads a directory of numbered PNG frames or a single (animated) PNG.
pub fn load_sequence(path: &Path, fps: f64) -> Result<Sequence> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    if meta.is_dir() {
        let files = frame_files(path)?;
        for f in &files {
            for frame in load_frames(f)? {
                if let Some(first) = frames.first() {
                    check_dims(first, &frame, f)?;
                }
                frames.push(frame);
            }
        }
    } else {
        frames = load_frames(path)?;
    }
    if frames.is_empty() {
        return Err(Error::EmptySequence(path.to_path_buf()));
    }
    Sequence::new(frames, fps)
}

fn check_dims(first: &Frame, frame: &Frame, path: &Path) -> Result<()> {
    if first.dims() != frame.dims() {
        return Err(Error::DimensionMismatch { expected: first.dims(), got: frame.dims(), path: Some(path.to_path_buf()) });
    }
    Ok(())
}

fn to_gray8(frame: &Frame) -> GrayImage {
    let bytes = frame.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    GrayImage::from_raw(frame.width() as u32, frame.height() as u32, bytes).expect("buffer matches dims")
}

fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => decode_error(path, other),
    })
}

/// Writes an 8-bit gray PNG of a `[0, 1]` frame.
pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    save_gray(&to_gray8(frame), path)
}

/// Min-max normalization to `[0, 1]`; a constant map gives zeros.
pub fn normalize_map(map: &Raster) -> Raster {
    let (lo, hi) = map.min_max();
    if hi <= lo {
        let (w, h) = map.dims();
        return Raster::zeros(w, h);
    }
    map.map(|v| (v - lo) / (hi - lo))
}

/// Writes a PNG of `map` after min-max normalization to `[0, 255]`.
pub fn save_map(map: &Raster, path: &Path) -> Result<()> {
    save_frame(&normalize_map(map), path)
}

/// Writes `frame_0000.png`, `frame_0001.png`, … into `dir`.
pub fn save_sequence(seq: &Sequence, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = seq.len().saturating_sub(1).to_string().len().max(4);
    seq.frames()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let p = dir.join(format!("frame_{k:0width$}.png"));
            save_frame(f, &p).map(|_| p)
        })
        .collect()
}

/// Draws a one-pixel ring of radius 5 around each detection, contrasting
/// with the underlying pixel.
pub fn overlay_detections(frame: &Frame, detections: &[Detection]) -> Frame {
    let mut out = frame.clone();
    let (w, h) = frame.dims();
    let r = MARKER_RADIUS as isize;
    for d in detections {
        for dy in -r..=r {
            for dx in -r..=r {
                let dist = ((dx * dx + dy * dy) as f64).sqrt();
                if !(MARKER_RADIUS - 0.5..=MARKER_RADIUS).contains(&dist) {
                    continue;
                }
                let (x, y) = (d.x as isize + dx, d.y as isize + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let v = frame.get(x as usize, y as usize);
                out.set(x as usize, y as usize, if v < 0.5 { 1.0 } else { 0.0 });
            }
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GtRow {
    frame: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    frame: usize,
    x: usize,
    y: usize,
    score: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!()
    }
    Error::Parse { path: path.to_path_buf(), message: e.to_string() }
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes `frame,x,y`.
pub fn write_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (&frame, objects) in &gt.objects {
        for o in objects {
            w.serialize(GtRow { frame, x: o[0], y: o[1] }).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `frame,x,y` rows; `n_frames` is the sequence length they refer to.
pub fn read_ground_truth(path: &Path, n_frames: usize) -> Result<GroundTruth> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut gt = GroundTruth::new(n_frames);
    for row in r.deserialize::<GtRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        gt.push(row.frame, row.x, row.y)?;
    }
    Ok(gt)
}

/// Writes `frame,x,y,score`.
pub fn write_detections(detections: &[Detection], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for d in detections {
        w.serialize(DetectionRow { frame: d.t, x: d.x, y: d.y, score: d.score }).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize::<DetectionRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_error(path, e))?;
            Ok(Detection { x: row.x, y: row.y, t: row.frame, score: row.score })
        })
        .collect()
}

/// Writes a header line then one line per row, fields joined by commas.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// A benchmark sequence: frames under `frames/` (or the directory itself)
/// and `ground_truth.csv` (or `gt.csv`) in the synth format.
pub fn load_rist(dir: &Path, fps: f64) -> Result<(Sequence, GroundTruth)> {
    let frames_dir = if dir.join("frames").is_dir() { dir.join("frames") } else { dir.to_path_buf() };
    let seq = load_sequence(&frames_dir, fps)?;
    let gt_path = ["ground_truth.csv", "gt.csv"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::io(dir.join("ground_truth.csv"), std::io::ErrorKind::NotFound.into()))?;
    let gt = read_ground_truth(&gt_path, seq.len())?;
    Ok((seq, gt))
}

/// Decodes one image file into a frame (first frame of an animation).
pub fn load_image(path: &Path) -> Result<Frame> {
    if is_png(path) {
        return load_frames(path)?.into_iter().next().ok_or_else(|| Error::EmptySequence(path.to_path_buf()));
    }
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_error(path, e))?;
    luminance(&img)
}
