//! Frame sequences: ingestion, spatial normalization, persistence and the
//! shifted snapshot matrices consumed by DMD.
//!
//! Intensities are held as `f64` in `[0, 1]`, frame-major and row-major
//! within a frame. The on-disk `raw_tensor` layout is little-endian:
//!
//! ```text
//! "MSQ1" | u32 n_r | u32 n_c | u32 n_f | f32 fps | n_r*n_c*n_f f32 values
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"MSQ1";
const RAW_HEADER_LEN: usize = 20;
const META_FILE: &str = "meta.json";

/// Luma weights applied to color input.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFormat {
    RawTensor,
    ImageDir,
}

impl SequenceFormat {
    /// Directories are image sequences, everything else a raw tensor.
    pub fn infer(path: &Path) -> Self {
        if path.is_dir() {
            SequenceFormat::ImageDir
        } else {
            SequenceFormat::RawTensor
        }
    }
}

/// An ordered stack of equally sized grayscale frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    rows: usize,
    cols: usize,
    n_frames: usize,
    fps: f64,
    data: Vec<f64>,
    source_id: String,
}

impl FrameSequence {
    /// Builds a sequence from frame-major, row-major intensities.
    pub fn new(
        rows: usize,
        cols: usize,
        fps: f64,
        data: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("frames must have at least one pixel"));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let frame_len = rows * cols;
        if !data.len().is_multiple_of(frame_len) {
            return Err(Error::LengthMismatch {
                expected: frame_len * (data.len() / frame_len + 1),
                found: data.len(),
            });
        }
        let n_frames = data.len() / frame_len;
        if n_frames < 2 {
            return Err(Error::TooFewFrames {
                required: 2,
                found: n_frames,
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidIntensity { index, value });
        }
        Ok(Self {
            rows,
            cols,
            n_frames,
            fps,
            data,
            source_id: source_id.into(),
        })
    }

    /// Builds a sequence from a list of frames, clamping every value into
    /// `[0, 1]`. Used when exporting reconstructions.
    pub fn from_frames_clamped(
        rows: usize,
        cols: usize,
        fps: f64,
        frames: impl IntoIterator<Item = Vec<f64>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let mut data = Vec::new();
        for frame in frames {
            if frame.len() != rows * cols {
                return Err(Error::LengthMismatch {
                    expected: rows * cols,
                    found: frame.len(),
                });
            }
            data.extend(frame.into_iter().map(clamp_unit));
        }
        Self::new(rows, cols, fps, data, source_id)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.rows * self.cols
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let len = self.pixels_per_frame();
        &self.data[t * len..(t + 1) * len]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.pixels_per_frame())
    }

    #[inline]
    pub fn at(&self, t: usize, row: usize, col: usize) -> f64 {
        self.data[(t * self.rows + row) * self.cols + col]
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Keeps the listed frames in the given order and rescales the frame
    /// rate so that the clip duration is unchanged.
    pub fn select_frames(&self, indices: &[usize]) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::TooShort {
                retained: indices.len(),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * self.pixels_per_frame());
        for &t in indices {
            if t >= self.n_frames {
                return Err(Error::invalid(format!(
                    "frame index {t} out of range for {} frames",
                    self.n_frames
                )));
            }
            data.extend_from_slice(self.frame(t));
        }
        let fps = self.fps * indices.len() as f64 / self.n_frames as f64;
        Self::new(self.rows, self.cols, fps, data, self.source_id.clone())
    }
}

/// Shifted snapshot matrices: column `j` of `psi0` is frame `j`, column `j`
/// of `psi1` is frame `j + 1`.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub psi0: Mat<f64>,
    pub psi1: Mat<f64>,
    pub fps: f64,
    pub rows: usize,
    pub cols: usize,
}

impl SnapshotPair {
    /// Pixel count `M`.
    pub fn n_pixels(&self) -> usize {
        self.psi0.nrows()
    }

    /// Snapshot count `N`, one less than the frame count.
    pub fn n_snapshots(&self) -> usize {
        self.psi0.ncols()
    }

    /// Snapshot pair of a sequence given directly as columns. Mostly for
    /// synthetic systems that do not live in `[0, 1]`.
    pub fn from_columns(stack: &Mat<f64>, fps: f64) -> Result<Self> {
        let n = stack.ncols();
        if n < 2 {
            return Err(Error::TooFewFrames {
                required: 2,
                found: n,
            });
        }
        let m = stack.nrows();
        Ok(Self {
            psi0: stack.subcols(0, n - 1).to_owned(),
            psi1: stack.subcols(1, n - 1).to_owned(),
            fps,
            rows: m,
            cols: 1,
        })
    }
}

/// Vectorizes a sequence into snapshot pairs (row-major pixel order).
pub fn to_snapshots(seq: &FrameSequence) -> Result<SnapshotPair> {
    let n_f = seq.n_frames();
    if n_f < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            found: n_f,
        });
    }
    let m = seq.pixels_per_frame();
    let n = n_f - 1;
    let psi0 = Mat::from_fn(m, n, |i, j| seq.frame(j)[i]);
    let psi1 = Mat::from_fn(m, n, |i, j| seq.frame(j + 1)[i]);
    Ok(SnapshotPair {
        psi0,
        psi1,
        fps: seq.fps(),
        rows: seq.rows(),
        cols: seq.cols(),
    })
}

/// Bilinear resampling of every frame with edge clamping.
///
/// Output pixel centers are mapped back with `src = (dst + 0.5) * scale - 0.5`,
/// so resizing to the current size is the identity.
pub fn resize(seq: &FrameSequence, rows: usize, cols: usize) -> Result<FrameSequence> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("target size must be at least 1x1"));
    }
    if rows == seq.rows() && cols == seq.cols() {
        return Ok(seq.clone());
    }
    let row_taps = bilinear_taps(seq.rows(), rows);
    let col_taps = bilinear_taps(seq.cols(), cols);
    let mut data = Vec::with_capacity(rows * cols * seq.n_frames());
    for frame in seq.frames() {
        for &(r0, r1, wr) in &row_taps {
            let top = &frame[r0 * seq.cols()..(r0 + 1) * seq.cols()];
            let bottom = &frame[r1 * seq.cols()..(r1 + 1) * seq.cols()];
            for &(c0, c1, wc) in &col_taps {
                let a = top[c0] + wc * (top[c1] - top[c0]);
                let b = bottom[c0] + wc * (bottom[c1] - bottom[c0]);
                data.push(clamp_unit(a + wr * (b - a)));
            }
        }
    }
    FrameSequence::new(rows, cols, seq.fps(), data, seq.source_id())
}

fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// A raw `MSQ1` tensor without the `[0, 1]` intensity invariant. Mode
/// magnitude images are exported through this type.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub rows: u32,
    pub cols: u32,
    pub frames: u32,
    pub fps: f32,
    pub values: Vec<f32>,
}

impl RawTensor {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < RAW_HEADER_LEN {
            return Err(Error::MalformedHeader(format!(
                "{} bytes is shorter than the {RAW_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != RAW_MAGIC {
            return Err(Error::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let (rows, cols, frames) = (word(4), word(8), word(12));
        let fps = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::MalformedHeader(format!("fps {fps} is not positive")));
        }
        let count = (rows as usize)
            .checked_mul(cols as usize)
            .and_then(|v| v.checked_mul(frames as usize))
            .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
        let payload = &bytes[RAW_HEADER_LEN..];
        if payload.len() != count * 4 {
            return Err(Error::MalformedHeader(format!(
                "header announces {count} values but payload holds {} bytes",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            rows,
            cols,
            frames,
            fps,
            values,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RAW_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(RAW_MAGIC);
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.cols.to_le_bytes());
        out.extend_from_slice(&self.frames.to_le_bytes());
        out.extend_from_slice(&self.fps.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn from_sequence(seq: &FrameSequence) -> Self {
        Self {
            rows: seq.rows() as u32,
            cols: seq.cols() as u32,
            frames: seq.n_frames() as u32,
            fps: seq.fps() as f32,
            values: seq.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn into_sequence(self, source_id: impl Into<String>) -> Result<FrameSequence> {
        FrameSequence::new(
            self.rows as usize,
            self.cols as usize,
            self.fps as f64,
            self.values.into_iter().map(f64::from).collect(),
            source_id,
        )
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn load_sequence(path: &Path, format: SequenceFormat) -> Result<FrameSequence> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        SequenceFormat::RawTensor => RawTensor::read(path)?.into_sequence(id),
        SequenceFormat::ImageDir => load_image_dir(path, id),
    }
}

pub fn write_sequence(seq: &FrameSequence, path: &Path, format: SequenceFormat) -> Result<()> {
    match format {
        SequenceFormat::RawTensor => RawTensor::from_sequence(seq).write(path),
        SequenceFormat::ImageDir => write_image_dir(seq, path),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageDirMeta {
    fps: f64,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
                .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn load_image_dir(dir: &Path, id: String) -> Result<FrameSequence> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ImageDirMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", meta_path.display())))?;

    let files = image_files(dir)?;
    if files.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            found: files.len(),
        });
    }
    let mut dims: Option<(usize, usize)> = None;
    let mut data = Vec::new();
    for path in &files {
        let img = image::open(path).map_err(|e| Error::ImageDecode {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let found = (img.height() as usize, img.width() as usize);
        match dims {
            None => dims = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::DimensionMismatch { expected, found })
            }
            _ => {}
        }
        append_gray(&img, &mut data);
    }
    let (rows, cols) = dims.unwrap();
    FrameSequence::new(rows, cols, meta.fps, data, id)
}

fn append_gray(img: &image::DynamicImage, out: &mut Vec<f64>) {
    use image::DynamicImage;
    match img {
        DynamicImage::ImageLuma8(buf) => out.extend(buf.as_raw().iter().map(|&v| v as f64 / 255.0)),
        DynamicImage::ImageLuma16(buf) => {
            out.extend(buf.as_raw().iter().map(|&v| v as f64 / 65535.0))
        }
        other => {
            let rgb = other.to_rgb8();
            out.extend(rgb.pixels().map(|p| {
                let y = LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64;
                (y / 255.0).min(1.0)
            }))
        }
    }
}

fn write_image_dir(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = seq.n_frames().to_string().len().max(4);
    for (t, frame) in seq.frames().enumerate() {
        let bytes: Vec<u8> = frame.iter().map(|&v| (v * 255.0).round() as u8).collect();
        let img = image::GrayImage::from_raw(seq.cols() as u32, seq.rows() as u32, bytes)
            .expect("buffer matches frame size");
        let path = dir.join(format!("frame_{t:0width$}.png"));
        img.save(&path).map_err(|e| Error::ImageDecode {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    let meta = serde_json::to_string(&ImageDirMeta { fps: seq.fps() })?;
    write_file(&dir.join(META_FILE), meta.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize, n_f: usize, fps: f64) -> FrameSequence {
        let total = rows * cols * n_f;
        let data = (0..total).map(|i| i as f64 / total as f64).collect();
        FrameSequence::new(rows, cols, fps, data, "ramp").unwrap()
    }

    #[test]
    fn raw_tensor_header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.msq");
        let seq = ramp(4, 4, 8, 200.0);
        write_sequence(&seq, &path, SequenceFormat::RawTensor).unwrap();
        let back = load_sequence(&path, SequenceFormat::RawTensor).unwrap();
        assert_eq!((back.rows(), back.cols(), back.n_frames()), (4, 4, 8));
        assert_eq!(back.fps(), 200.0);
    }

    #[test]
    fn raw_tensor_rejects_bad_headers() {
        assert!(matches!(
            RawTensor::from_bytes(b"MSQ"),
            Err(Error::MalformedHeader(_))
        ));
        let mut bytes = RawTensor::from_sequence(&ramp(2, 2, 2, 10.0)).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            RawTensor::from_bytes(&bytes),
            Err(Error::MalformedHeader(_))
        ));
        let mut bytes = RawTensor::from_sequence(&ramp(2, 2, 2, 10.0)).to_bytes();
        bytes.pop();
        assert!(matches!(
            RawTensor::from_bytes(&bytes),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn single_frame_is_too_few() {
        let t = RawTensor {
            rows: 2,
            cols: 2,
            frames: 1,
            fps: 30.0,
            values: vec![0.0; 4],
        };
        assert!(matches!(
            t.into_sequence("x"),
            Err(Error::TooFewFrames { found: 1, .. })
        ));
    }

    #[test]
    fn image_dir_rejects_mixed_sizes() {
        let dir = tempfile::tempdir().unwrap();
        for (i, (w, h)) in [(4u32, 4u32), (4, 4), (5, 4)].iter().enumerate() {
            image::GrayImage::new(*w, *h)
                .save(dir.path().join(format!("f{i}.png")))
                .unwrap();
        }
        fs::write(dir.path().join(META_FILE), r#"{"fps": 100}"#).unwrap();
        let err = load_sequence(dir.path(), SequenceFormat::ImageDir).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
    }

    #[test]
    fn image_dir_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let seq = ramp(3, 5, 4, 60.0);
        write_sequence(&seq, dir.path(), SequenceFormat::ImageDir).unwrap();
        let back = load_sequence(dir.path(), SequenceFormat::ImageDir).unwrap();
        assert_eq!(back.fps(), 60.0);
        for (a, b) in seq.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn color_images_use_luma_weights() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..2 {
            let img = image::RgbImage::from_pixel(2, 2, image::Rgb([255, 0, 0]));
            img.save(dir.path().join(format!("c{i}.png"))).unwrap();
        }
        fs::write(dir.path().join(META_FILE), r#"{"fps": 25}"#).unwrap();
        let seq = load_sequence(dir.path(), SequenceFormat::ImageDir).unwrap();
        assert!((seq.at(0, 0, 0) - 0.299).abs() < 1e-12);
    }

    #[test]
    fn resize_identity_and_constant_field() {
        let seq = ramp(6, 5, 3, 200.0);
        assert_eq!(resize(&seq, 6, 5).unwrap(), seq);

        let flat = FrameSequence::new(7, 3, 100.0, vec![0.5; 7 * 3 * 4], "c").unwrap();
        let out = resize(&flat, 11, 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn resize_to_casme_target_keeps_time_axis() {
        let seq = ramp(20, 16, 5, 200.0);
        let out = resize(&seq, 340, 280).unwrap();
        assert_eq!((out.rows(), out.cols()), (340, 280));
        assert_eq!(out.n_frames(), 5);
        assert_eq!(out.fps(), 200.0);
    }

    #[test]
    fn snapshots_shift_by_one() {
        let seq = ramp(3, 2, 8, 50.0);
        let snap = to_snapshots(&seq).unwrap();
        assert_eq!(snap.n_snapshots(), 7);
        assert_eq!(snap.psi1.ncols(), 7);
        for i in 0..snap.n_pixels() {
            assert_eq!(snap.psi1[(i, 3)], seq.frame(4)[i]);
            for j in 0..6 {
                assert_eq!(snap.psi1[(i, j)], snap.psi0[(i, j + 1)]);
            }
        }
    }

    #[test]
    fn twenty_four_frames_give_twenty_three_columns() {
        let seq = ramp(2, 2, 24, 200.0);
        let snap = to_snapshots(&seq).unwrap();
        // direct enumeration of (previous, next) frame pairs
        let pairs = (0..seq.n_frames()).zip(1..seq.n_frames()).count();
        assert_eq!(snap.psi0.ncols(), pairs);
        assert_eq!(pairs, 23);
    }

    #[test]
    fn select_frames_rescales_fps() {
        let seq = ramp(2, 2, 10, 200.0);
        let out = seq.select_frames(&[0, 4, 9]).unwrap();
        assert_eq!(out.n_frames(), 3);
        assert!((out.fps() - 60.0).abs() < 1e-12);
        assert_eq!(out.frame(1), seq.frame(4));
    }
}
