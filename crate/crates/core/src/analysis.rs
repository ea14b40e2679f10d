//! Temporal and spectral data products of a decomposition: mode
//! frequencies, amplitude histograms over frequency, amplitude profiles
//! against frame index, and the `γ` to percentage curve.

use std::f64::consts::PI;
use std::io::Write;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::dmd::DmdDecomposition;
use crate::dmdsp::SparsityRecord;
use crate::error::{Error, Result};
use crate::tim::grid_positions;

/// Relative slack that lets a frequency sitting on a bin edge up to
/// rounding error land in the upper bin.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeFrequency {
    /// `|Im ln μ| / 2π · f_s`, in `[0, f_s/2]`.
    pub frequency_hz: f64,
    /// `Re ln μ · f_s`; `-inf` for `μ = 0`.
    pub growth_rate: f64,
    /// `μ = 0`; the frequency is reported as `f_s/2`.
    pub zero_eigenvalue: bool,
}

pub fn eigenvalue_frequency(mu: c64, fs: f64) -> ModeFrequency {
    if mu.norm() == 0.0 {
        return ModeFrequency {
            frequency_hz: fs / 2.0,
            growth_rate: f64::NEG_INFINITY,
            zero_eigenvalue: true,
        };
    }
    let l = mu.ln();
    ModeFrequency {
        frequency_hz: (l.im.abs() / (2.0 * PI) * fs).min(fs / 2.0),
        growth_rate: l.re * fs,
        zero_eigenvalue: false,
    }
}

pub fn mode_frequencies(d: &DmdDecomposition) -> Vec<ModeFrequency> {
    d.eigenvalues()
        .iter()
        .map(|&mu| eigenvalue_frequency(mu, d.fps()))
        .collect()
}

/// Sum of `|α|` per frequency bin over `[0, f_s/2]`; bins are `[lo, hi)`
/// except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralHistogram {
    pub fps: f64,
    pub bin_width: f64,
    /// `n_bins + 1` edges; the last equals `f_s/2`.
    pub bin_edges: Vec<f64>,
    pub energy: Vec<f64>,
    pub n_sequences: usize,
}

impl SpectralHistogram {
    pub fn new(fps: f64, bin_width: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
        }
        let nyquist = fps / 2.0;
        let n_bins = ((nyquist / bin_width) * (1.0 - EDGE_SLACK)).ceil().max(1.0) as usize;
        let mut bin_edges: Vec<f64> = (0..n_bins).map(|i| i as f64 * bin_width).collect();
        bin_edges.push(nyquist);
        Ok(Self {
            fps,
            bin_width,
            bin_edges,
            energy: vec![0.0; n_bins],
            n_sequences: 0,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.energy.len()
    }

    pub fn bin_of(&self, frequency_hz: f64) -> usize {
        let pos = frequency_hz / self.bin_width;
        let idx = (pos + EDGE_SLACK * pos.abs().max(1.0)).floor().max(0.0) as usize;
        idx.min(self.n_bins() - 1)
    }

    /// Adds `|α_i|` of every mode of `d`.
    pub fn add(&mut self, d: &DmdDecomposition) -> Result<()> {
        self.add_amplitudes(d, d.amplitudes())
    }

    /// Adds caller-supplied amplitudes (for example polished sparse ones)
    /// at the frequencies of `d`.
    pub fn add_amplitudes(&mut self, d: &DmdDecomposition, alpha: &[c64]) -> Result<()> {
        if d.fps() != self.fps {
            return Err(Error::MixedFps {
                expected: self.fps,
                found: d.fps(),
            });
        }
        if alpha.len() != d.rank() {
            return Err(Error::LengthMismatch {
                expected: d.rank(),
                found: alpha.len(),
            });
        }
        for (mu, a) in d.eigenvalues().iter().zip(alpha) {
            let f = eigenvalue_frequency(*mu, self.fps);
            let b = self.bin_of(f.frequency_hz);
            self.energy[b] += a.norm();
        }
        self.n_sequences += 1;
        Ok(())
    }

    /// Exact associative combination of two partial histograms.
    pub fn merge(&mut self, other: &SpectralHistogram) -> Result<()> {
        if other.fps != self.fps {
            return Err(Error::MixedFps {
                expected: self.fps,
                found: other.fps,
            });
        }
        if other.bin_width != self.bin_width {
            return Err(Error::invalid("cannot merge histograms with different bin widths"));
        }
        for (a, b) in self.energy.iter_mut().zip(&other.energy) {
            *a += b;
        }
        self.n_sequences += other.n_sequences;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.energy.iter().enumerate() {
            if e > self.energy[best] {
                best = i;
            }
        }
        best
    }

    /// `(lo, hi)` of bin `i`.
    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        (self.bin_edges[i], self.bin_edges[i + 1])
    }

    /// CSV `bin_lo_hz,bin_hi_hz,energy`, preceded by a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# energy is the raw sum of |alpha| over {} sequence(s), not weighted by sequence length",
            self.n_sequences
        )
        .map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo_hz", "bin_hi_hz", "energy"])?;
        for i in 0..self.n_bins() {
            let (lo, hi) = self.bin_range(i);
            w.write_record([lo.to_string(), hi.to_string(), self.energy[i].to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Histogram over a corpus; every decomposition must share one frame rate.
pub fn spectral_histogram(decomps: &[DmdDecomposition], bin_width: f64) -> Result<SpectralHistogram> {
    let first = decomps
        .first()
        .ok_or_else(|| Error::invalid("no decompositions to histogram"))?;
    let mut h = SpectralHistogram::new(first.fps(), bin_width)?;
    for d in decomps {
        h.add(d)?;
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileMapping {
    /// Mode `i` sits at frame `i + 1`; zeroed where the structure is true.
    SparseMask(Vec<bool>),
    /// The decomposition came from an `n_out`-frame resampling; amplitude
    /// `j` sits at the `j`-th grid position over the original frames.
    UniformGrid,
}

impl ProfileMapping {
    pub fn tag(&self) -> &'static str {
        match self {
            ProfileMapping::SparseMask(_) => "sparse_mask",
            ProfileMapping::UniformGrid => "uniform_grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    /// 1-based, `1..=original_n`.
    pub frame_index: Vec<usize>,
    pub magnitude: Vec<f64>,
    pub strategy: String,
}

impl TemporalProfile {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_index", "magnitude"])?;
        for (i, m) in self.frame_index.iter().zip(&self.magnitude) {
            w.write_record([i.to_string(), m.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Amplitude magnitudes of `d` laid over the original frame axis.
pub fn temporal_profile(d: &DmdDecomposition, original_n: usize, mapping: &ProfileMapping) -> Result<TemporalProfile> {
    profile_from_amplitudes(d.amplitudes(), d.n_snapshots() + 1, original_n, mapping)
}

/// As [`temporal_profile`] for arbitrary amplitudes of a decomposition of an
/// `n_source`-frame sequence.
///
/// A decomposition of `n_source` frames has at most `n_source − 1`
/// amplitudes, so under `UniformGrid` the last grid position stays empty.
pub fn profile_from_amplitudes(
    alpha: &[c64],
    n_source: usize,
    original_n: usize,
    mapping: &ProfileMapping,
) -> Result<TemporalProfile> {
    let r = alpha.len();
    let mut magnitude = vec![0.0; original_n];
    match mapping {
        ProfileMapping::SparseMask(structure) => {
            if structure.len() != r {
                return Err(Error::LengthMismatch {
                    expected: r,
                    found: structure.len(),
                });
            }
            if r > original_n {
                return Err(Error::LengthMismatch {
                    expected: original_n,
                    found: r,
                });
            }
            for i in 0..r {
                if !structure[i] {
                    magnitude[i] = alpha[i].norm();
                }
            }
        }
        ProfileMapping::UniformGrid => {
            if n_source > original_n || r >= n_source.max(1) {
                return Err(Error::LengthMismatch {
                    expected: original_n,
                    found: n_source,
                });
            }
            let grid = grid_positions(original_n, n_source);
            for (j, a) in alpha.iter().enumerate() {
                magnitude[grid[j] - 1] += a.norm();
            }
        }
    }
    Ok(TemporalProfile {
        frame_index: (1..=original_n).collect(),
        magnitude,
        strategy: mapping.tag().to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub percent: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub points: Vec<GammaPoint>,
    /// Indices `i` where `percent[i] > percent[i − 1]`.
    pub monotonicity_violations: Vec<usize>,
}

impl GammaCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gamma", "percent", "loss"])?;
        for p in &self.points {
            w.write_record([p.gamma.to_string(), p.percent.to_string(), p.loss.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// `(γ, percent preserved, loss)` per record; increases in the percentage
/// are reported, not corrected.
pub fn gamma_percentage_curve(records: &[SparsityRecord]) -> Result<GammaCurve> {
    if records.windows(2).any(|w| !(w[0].gamma < w[1].gamma)) {
        return Err(Error::invalid("records must be sorted by strictly increasing gamma"));
    }
    let points: Vec<GammaPoint> = records
        .iter()
        .map(|r| GammaPoint {
            gamma: r.gamma,
            percent: r.percent_preserved,
            loss: r.loss,
        })
        .collect();
    let monotonicity_violations = (1..points.len())
        .filter(|&i| points[i].percent > points[i - 1].percent)
        .collect();
    Ok(GammaCurve {
        points,
        monotonicity_violations,
    })
}
