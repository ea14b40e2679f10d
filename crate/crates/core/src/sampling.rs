//! Frame-selection strategies: sparse (DMD amplitude sparsity), uniform and
//! fixed-length (temporal interpolation), random subset, and pass-through.

use std::path::Path;

use faer::Mat;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::dmd::{decompose, DEFAULT_RANK_TOL};
use crate::dmdsp::{
    gamma_sweep, log_spaced_grid, select_percentage, SweepParams, DEFAULT_GAMMA_COUNT,
    DEFAULT_GAMMA_MAX, DEFAULT_GAMMA_MIN,
};
use crate::error::{Error, Result};
use crate::seqio::{clamp_unit, to_snapshots, FrameSequence};
use crate::tim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Sparse sampling through DMD amplitude sparsity.
    Ss,
    /// Uniform TIM resampling to a percentage of the frames.
    Us,
    /// TIM resampling to a fixed frame count.
    UsStar,
    /// Random sorted subset of the original frames.
    Ra,
    /// Pass-through.
    Bl,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ss => "ss",
            Strategy::Us => "us",
            Strategy::UsStar => "us-star",
            Strategy::Ra => "ra",
            Strategy::Bl => "bl",
        }
    }
}

/// Log-spaced `γ` grid expressed in the intensity units of
/// `intensity_scale` (255 for 8-bit video). Sequences hold intensities in
/// `[0, 1]`, and amplitudes scale linearly with intensity, so the grid is
/// divided by `intensity_scale` before use; a scale of 1 applies it as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GammaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub intensity_scale: f64,
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self {
            min: DEFAULT_GAMMA_MIN,
            max: DEFAULT_GAMMA_MAX,
            count: DEFAULT_GAMMA_COUNT,
            intensity_scale: 255.0,
        }
    }
}

impl GammaGrid {
    /// Grid in the units of `[0, 1]` data.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.intensity_scale > 0.0 && self.intensity_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "intensity scale must be positive, got {}",
                self.intensity_scale
            )));
        }
        Ok(log_spaced_grid(self.min, self.max, self.count)?
            .into_iter()
            .map(|g| g / self.intensity_scale)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    /// Percent of frames preserved, in `(0, 100]` (SS, US, RA).
    pub percent: f64,
    /// Output frame count for US*.
    pub fixed_length: usize,
    /// RA generator seed.
    pub seed: u64,
    pub gamma_grid: GammaGrid,
    pub sweep: SweepParams,
    /// SS keeps original frames at the highest-energy positions of the
    /// sparse reconstruction instead of synthesizing new ones.
    pub keep_original_frames: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Bl,
            percent: 45.0,
            fixed_length: 150,
            seed: 0,
            gamma_grid: GammaGrid::default(),
            sweep: SweepParams::default(),
            keep_original_frames: false,
        }
    }
}

/// Sidecar record written next to every sampled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub strategy: Strategy,
    pub percent: Option<f64>,
    pub fixed_length: Option<usize>,
    pub seed: Option<u64>,
    pub keep_original_frames: bool,
    pub n_in: usize,
    pub n_out: usize,
    pub fps_in: f64,
    pub fps_out: f64,
    pub selected_gamma: Option<f64>,
    pub nnz: Option<usize>,
    pub rank: Option<usize>,
    pub percent_preserved: Option<f64>,
    pub loss: Option<f64>,
    pub performance_loss_pct: Option<f64>,
    /// 0-based source indices, for strategies that keep original frames.
    pub retained_indices: Option<Vec<usize>>,
}

impl SamplingReport {
    fn new(strategy: Strategy, input: &FrameSequence, output: &FrameSequence) -> Self {
        Self {
            strategy,
            percent: None,
            fixed_length: None,
            seed: None,
            keep_original_frames: false,
            n_in: input.n_frames(),
            n_out: output.n_frames(),
            fps_in: input.fps(),
            fps_out: output.fps(),
            selected_gamma: None,
            nnz: None,
            rank: None,
            percent_preserved: None,
            loss: None,
            performance_loss_pct: None,
            retained_indices: None,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::seqio::write_file(path, text.as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub sequence: FrameSequence,
    pub report: SamplingReport,
}

pub fn apply(seq: &FrameSequence, cfg: &SamplingConfig) -> Result<SamplingOutcome> {
    match cfg.strategy {
        Strategy::Ss => sparse_sample(seq, cfg.percent, &cfg.gamma_grid.values()?, &cfg.sweep, cfg.keep_original_frames),
        Strategy::Us => uniform_sample(seq, cfg.percent),
        Strategy::UsStar => fixed_length_sample(seq, cfg.fixed_length),
        Strategy::Ra => random_sample(seq, cfg.percent, cfg.seed),
        Strategy::Bl => Ok(baseline(seq)),
    }
}

fn check_percent(percent: f64) -> Result<()> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::invalid(format!("percent must be in (0, 100], got {percent}")));
    }
    Ok(())
}

fn percent_count(n: usize, percent: f64) -> usize {
    (percent * n as f64 / 100.0).round() as usize
}

/// DMD, `γ` sweep, record closest to `percent`, and reconstruction from the
/// retained modes with their polished amplitudes.
///
/// By default `nnz` frames are synthesized at equispaced (fractional) time
/// steps spanning the whole clip, and the frame rate is scaled by
/// `nnz/n_f`. With `keep_original_frames`, the sparse reconstruction is
/// evaluated at every source step and the `nnz` source frames where it
/// carries the most energy about its mean are kept in temporal order.
pub fn sparse_sample(
    seq: &FrameSequence,
    percent: f64,
    gamma_grid: &[f64],
    params: &SweepParams,
    keep_original_frames: bool,
) -> Result<SamplingOutcome> {
    check_percent(percent)?;
    let d = decompose(&to_snapshots(seq)?, DEFAULT_RANK_TOL)?;
    let records = gamma_sweep(&d, gamma_grid, params)?;
    let rec = select_percentage(&records, percent)?;
    if rec.nnz < 2 {
        return Err(Error::TooShort { retained: rec.nnz });
    }
    let n_f = seq.n_frames();
    let mask = rec.retained_mask();

    let (sequence, retained) = if keep_original_frames {
        let times: Vec<f64> = (0..n_f).map(|t| t as f64).collect();
        let recon = d.reconstruct_at(&rec.alpha_polished, &mask, &times)?;
        let idx = top_energy_frames(&recon, rec.nnz);
        (seq.select_frames(&idx)?, Some(idx))
    } else {
        let n_out = rec.nnz;
        let span = (n_f - 1) as f64;
        let times: Vec<f64> = (0..n_out).map(|k| k as f64 * span / (n_out - 1) as f64).collect();
        let recon = d.reconstruct_at(&rec.alpha_polished, &mask, &times)?;
        let m = recon.nrows();
        let mut data = Vec::with_capacity(m * n_out);
        for k in 0..n_out {
            data.extend((0..m).map(|p| clamp_unit(recon[(p, k)])));
        }
        let fps = seq.fps() * n_out as f64 / n_f as f64;
        let out = FrameSequence::new(seq.rows(), seq.cols(), fps, data, seq.source_id())?;
        (out, None)
    };

    let mut report = SamplingReport::new(Strategy::Ss, seq, &sequence);
    report.percent = Some(percent);
    report.keep_original_frames = keep_original_frames;
    report.selected_gamma = Some(rec.gamma);
    report.nnz = Some(rec.nnz);
    report.rank = Some(d.rank());
    report.percent_preserved = Some(rec.percent_preserved);
    report.loss = Some(rec.loss);
    report.performance_loss_pct = Some(rec.performance_loss_pct);
    report.retained_indices = retained;
    Ok(SamplingOutcome { sequence, report })
}

/// Indices of the `count` columns with the largest `‖x_k − x̄‖²`, ascending;
/// equal energies prefer the earlier frame.
fn top_energy_frames(recon: &Mat<f64>, count: usize) -> Vec<usize> {
    let (m, n) = (recon.nrows(), recon.ncols());
    let mean: Vec<f64> = (0..m)
        .map(|p| (0..n).map(|k| recon[(p, k)]).sum::<f64>() / n as f64)
        .collect();
    let energy: Vec<f64> = (0..n)
        .map(|k| (0..m).map(|p| (recon[(p, k)] - mean[p]).powi(2)).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(count.min(n)).collect();
    keep.sort_unstable();
    keep
}

/// TIM resampling to `round(percent·n_f/100)` frames (at least 2).
pub fn uniform_sample(seq: &FrameSequence, percent: f64) -> Result<SamplingOutcome> {
    check_percent(percent)?;
    let n_out = percent_count(seq.n_frames(), percent).max(2);
    let sequence = tim::synthesize(&tim::fit(seq)?, n_out)?.with_source_id(seq.source_id());
    let mut report = SamplingReport::new(Strategy::Us, seq, &sequence);
    report.percent = Some(percent);
    Ok(SamplingOutcome { sequence, report })
}

/// TIM resampling to exactly `n_out` frames; longer than the source is
/// allowed.
pub fn fixed_length_sample(seq: &FrameSequence, n_out: usize) -> Result<SamplingOutcome> {
    let sequence = tim::synthesize(&tim::fit(seq)?, n_out)?.with_source_id(seq.source_id());
    let mut report = SamplingReport::new(Strategy::UsStar, seq, &sequence);
    report.fixed_length = Some(n_out);
    Ok(SamplingOutcome { sequence, report })
}

/// Sorted, duplicate-free source indices drawn with a seeded SplitMix64.
pub fn random_indices(n_f: usize, percent: f64, seed: u64) -> Result<Vec<usize>> {
    check_percent(percent)?;
    let keep = percent_count(n_f, percent).min(n_f);
    if keep < 2 {
        return Err(Error::TooShort { retained: keep });
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n_f, keep).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub fn random_sample(seq: &FrameSequence, percent: f64, seed: u64) -> Result<SamplingOutcome> {
    let idx = random_indices(seq.n_frames(), percent, seed)?;
    let sequence = seq.select_frames(&idx)?;
    let mut report = SamplingReport::new(Strategy::Ra, seq, &sequence);
    report.percent = Some(percent);
    report.seed = Some(seed);
    report.retained_indices = Some(idx);
    Ok(SamplingOutcome { sequence, report })
}

pub fn baseline(seq: &FrameSequence) -> SamplingOutcome {
    SamplingOutcome {
        sequence: seq.clone(),
        report: SamplingReport::new(Strategy::Bl, seq, seq),
    }
}
