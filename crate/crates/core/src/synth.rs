//! Procedural data: planted linear systems, oscillations, burst signals and
//! a small labelled face-like video corpus. Used by the test suites and
//! handy for smoke-testing the CLI without licensed corpora.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use faer::{c64, Mat};
use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::eval::{CorpusManifest, ManifestEntry};
use crate::seqio::{write_sequence, FrameSequence, SequenceFormat};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn normal(rng: &mut Xoshiro256PlusPlus) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform random `m × n_frames` stack with entries in `[0, 1)`.
pub fn random_stack(m: usize, n_frames: usize, seed: u64) -> Mat<f64> {
    let mut g = rng(seed);
    Mat::from_fn(m, n_frames, |_, _| g.random::<f64>())
}

/// `ψ_t = λᵗ v` for a real eigenvalue and random positive `v`.
pub fn single_mode(m: usize, n_frames: usize, lambda: c64, seed: u64) -> Mat<f64> {
    assert!(lambda.im == 0.0, "single real mode");
    let mut g = rng(seed);
    let v: Vec<f64> = (0..m).map(|_| 0.2 + g.random::<f64>()).collect();
    Mat::from_fn(m, n_frames, |i, t| lambda.re.powi(t as i32) * v[i])
}

/// Data generated by a known linear map with a few modes.
#[derive(Debug, Clone)]
pub struct PlantedSystem {
    /// `M × (N+1)` snapshot stack.
    pub stack: Mat<f64>,
    pub eigenvalues: Vec<c64>,
    /// Complex mode shapes, `M × k`, matching `eigenvalues`.
    pub modes: Mat<c64>,
}

/// Three modes: one real eigenvalue and one conjugate pair, real data.
///
/// `ψ_t = a λ₁ᵗ v₁ + 2 Re(b λ₂ᵗ w)` with random real `v₁` and complex `w`,
/// plus optional i.i.d. Gaussian noise of standard deviation `noise`.
pub fn planted_three_mode(m: usize, n_snapshots: usize, noise: f64, seed: u64) -> PlantedSystem {
    let mut g = rng(seed);
    let lam_real = c64::new(0.92, 0.0);
    let lam_osc = c64::from_polar(0.98, 2.0 * PI * 0.11);
    let v1: Vec<f64> = (0..m).map(|_| normal(&mut g)).collect();
    let w: Vec<c64> = (0..m)
        .map(|_| c64::new(normal(&mut g), normal(&mut g)))
        .collect();
    let (a, b) = (3.0, c64::new(1.5, -0.7));
    let n_frames = n_snapshots + 1;
    let stack = Mat::from_fn(m, n_frames, |i, t| {
        let osc = b * lam_osc.powi(t as i32) * w[i];
        a * lam_real.re.powi(t as i32) * v1[i] + 2.0 * osc.re + noise * normal(&mut g)
    });
    let modes = Mat::from_fn(m, 3, |i, k| match k {
        0 => c64::new(v1[i], 0.0),
        1 => w[i],
        _ => w[i].conj(),
    });
    PlantedSystem {
        stack,
        eigenvalues: vec![lam_real, lam_osc, lam_osc.conj()],
        modes,
    }
}

/// Mean-free travelling oscillation at `freq_hz` sampled at `fps`, with
/// additive Gaussian noise. Columns are snapshots.
pub fn oscillation_stack(
    m: usize,
    n_frames: usize,
    fps: f64,
    freq_hz: f64,
    noise: f64,
    seed: u64,
) -> Mat<f64> {
    let mut g = rng(seed);
    let phase: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let amp: Vec<f64> = (0..m).map(|_| 0.5 + 0.5 * g.random::<f64>()).collect();
    let omega = 2.0 * PI * freq_hz / fps;
    Mat::from_fn(m, n_frames, |i, t| {
        amp[i] * (omega * t as f64 + phase[i]).cos() + noise * normal(&mut g)
    })
}

/// A `[0, 1]` grayscale sequence that is flat except for two short bursts
/// of a localized pattern, the rest being near-neutral frames.
pub fn burst_sequence(rows: usize, cols: usize, n_frames: usize, fps: f64, seed: u64) -> FrameSequence {
    let mut g = rng(seed);
    let bursts = [(n_frames / 4, n_frames / 10 + 1), (2 * n_frames / 3, n_frames / 10 + 1)];
    let (cy, cx) = (rows as f64 / 2.0, cols as f64 / 2.0);
    let mut data = Vec::with_capacity(rows * cols * n_frames);
    for t in 0..n_frames {
        let mut gain = 0.0;
        for &(start, len) in &bursts {
            if t >= start && t < start + len {
                let u = (t - start) as f64 / len as f64;
                gain += (PI * (u + 0.5 / len as f64)).sin();
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let d2 = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)) / (0.1 * (rows * cols) as f64);
                let v = 0.3 + 0.5 * gain * (-d2).exp() + 0.002 * normal(&mut g);
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    FrameSequence::new(rows, cols, fps, data, format!("burst-{seed}")).unwrap()
}

/// Parameters of the procedural face-like corpus.
#[derive(Debug, Clone)]
pub struct FaceCorpusSpec {
    pub n_subjects: usize,
    pub clips_per_subject: usize,
    pub rows: usize,
    pub cols: usize,
    pub fps: f64,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Fraction of each clip that is neutral padding, drawn uniformly.
    pub padding: (f64, f64),
    pub noise: f64,
    /// Peak blob contrast over the background.
    pub blob_gain: f64,
    /// Standard deviation of the per-clip blob locus offset, as a fraction
    /// of the frame.
    pub locus_jitter: f64,
    pub seed: u64,
}

impl Default for FaceCorpusSpec {
    fn default() -> Self {
        Self {
            n_subjects: 6,
            clips_per_subject: 10,
            rows: 40,
            cols: 40,
            fps: 200.0,
            min_frames: 40,
            max_frames: 60,
            padding: (0.6, 0.8),
            noise: 0.01,
            blob_gain: 0.35,
            locus_jitter: 0.03,
            seed: 2017,
        }
    }
}

/// Class label, blob locus (row, col as fractions of the frame) and blob
/// motion frequency in Hz.
pub const FACE_CLASSES: [(&str, (f64, f64), f64); 3] = [
    ("negative", (0.30, 0.30), 12.0),
    ("positive", (0.72, 0.62), 30.0),
    ("surprise", (0.22, 0.68), 55.0),
];

/// One clip: static face-like background for the subject, a Gaussian blob
/// near the class locus that oscillates at the class frequency during a
/// short active window, and neutral frames elsewhere.
pub fn face_clip(spec: &FaceCorpusSpec, subject: usize, class: usize, clip_seed: u64) -> FrameSequence {
    let mut sg = rng(spec.seed ^ (0x5bd1_e995 * (subject as u64 + 1)));
    let face_gain = 0.5 + 0.1 * sg.random::<f64>();
    let eye_dx = 0.17 + 0.04 * sg.random::<f64>();
    let face_h = 0.40 + 0.05 * sg.random::<f64>();

    let mut g = rng(clip_seed);
    let n_f = spec.min_frames + (g.random::<f64>() * (spec.max_frames - spec.min_frames + 1) as f64) as usize;
    let n_f = n_f.min(spec.max_frames);
    let pad = spec.padding.0 + (spec.padding.1 - spec.padding.0) * g.random::<f64>();
    let active = ((1.0 - pad) * n_f as f64).round().max(3.0) as usize;
    let start = (g.random::<f64>() * (n_f - active + 1) as f64) as usize;
    let start = start.min(n_f - active);

    let (_, (ly, lx), freq) = FACE_CLASSES[class];
    let jitter = (spec.locus_jitter * normal(&mut g), spec.locus_jitter * normal(&mut g));
    let (rows, cols) = (spec.rows as f64, spec.cols as f64);
    let blob_sigma = 0.07 * rows;
    let swing = 0.06 * rows;

    let mut data = Vec::with_capacity(spec.rows * spec.cols * n_f);
    for t in 0..n_f {
        let envelope = if t >= start && t < start + active {
            let u = (t - start) as f64 + 0.5;
            (PI * u / active as f64).sin()
        } else {
            0.0
        };
        let phase = 2.0 * PI * freq * t as f64 / spec.fps;
        let by = (ly + jitter.0) * rows + swing * phase.sin();
        let bx = (lx + jitter.1) * cols + swing * phase.cos();
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let (y, x) = (r as f64 / rows, c as f64 / cols);
                let face = ((x - 0.5) / 0.32).powi(2) + ((y - 0.5) / face_h).powi(2) <= 1.0;
                let mut v = if face { face_gain } else { 0.15 };
                for ex in [0.5 - eye_dx, 0.5 + eye_dx] {
                    if ((x - ex) / 0.07).powi(2) + ((y - 0.38) / 0.04).powi(2) <= 1.0 {
                        v = 0.2;
                    }
                }
                if ((x - 0.5) / 0.14).powi(2) + ((y - 0.7) / 0.03).powi(2) <= 1.0 {
                    v = 0.3;
                }
                let d2 = (r as f64 - by).powi(2) + (c as f64 - bx).powi(2);
                v += spec.blob_gain * envelope * (-d2 / (2.0 * blob_sigma * blob_sigma)).exp();
                v += spec.noise * normal(&mut g);
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    FrameSequence::new(spec.rows, spec.cols, spec.fps, data, format!("s{subject:02}_c{clip_seed}"))
        .expect("generated frames are valid")
}

/// Writes every clip as a raw tensor under `dir` together with
/// `manifest.csv`, and returns the manifest.
pub fn write_face_corpus(spec: &FaceCorpusSpec, dir: &Path) -> Result<CorpusManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for subject in 0..spec.n_subjects {
        for clip in 0..spec.clips_per_subject {
            let class = clip % FACE_CLASSES.len();
            let clip_seed = spec.seed.wrapping_mul(1_000_003) + (subject * 1000 + clip) as u64;
            let seq = face_clip(spec, subject, class, clip_seed);
            let sample_id = format!("s{subject:02}_{clip:02}");
            let file = PathBuf::from(format!("{sample_id}.msq"));
            write_sequence(&seq, &dir.join(&file), SequenceFormat::RawTensor)?;
            entries.push(ManifestEntry {
                sample_id,
                subject_id: format!("sub{subject:02}"),
                label: FACE_CLASSES[class].0.to_string(),
                path: file,
            });
        }
    }
    let manifest = CorpusManifest::new(entries, Some(dir.to_path_buf()))?;
    manifest.write_csv(&dir.join("manifest.csv"))?;
    Ok(manifest)
}
