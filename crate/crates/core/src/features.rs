//! Uniform LBP-TOP with four neighbours per plane.
//!
//! The clip is cut into `n_b × n_b` non-overlapping spatial blocks spanning
//! all frames. Within a block each plane slice (XY at every `t`, XT at every
//! `y`, YT at every `x`) is encoded independently; sites whose neighbourhood
//! leaves the block's slice are skipped. Neighbour `i` of a site sits at
//! angle `90°·i` in the plane, bit `i` is set when neighbour ≥ centre:
//!
//! | plane | 0°        | 90°       | 180°      | 270°      |
//! |-------|-----------|-----------|-----------|-----------|
//! | XY    | `x + R_x` | `y − R_y` | `x − R_x` | `y + R_y` |
//! | XT    | `x + R_x` | `t + R_t` | `x − R_x` | `t − R_t` |
//! | YT    | `y + R_y` | `t + R_t` | `y − R_y` | `t − R_t` |
//!
//! The feature is block-major (row-major blocks), then plane (XY, XT, YT),
//! then uniform-pattern bin.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::FrameSequence;

pub const PLANES: usize = 3;

/// Bin of every `p`-bit code: uniform codes (at most two circular bit
/// transitions) get bins `0..p(p−1)+2` in code order, all others the last.
pub fn uniform_pattern_table(p: usize) -> Result<Vec<usize>> {
    if p != 4 && p != 8 {
        return Err(Error::invalid(format!("neighbour count must be 4 or 8, got {p}")));
    }
    let catch_all = p * (p - 1) + 2;
    let mut next = 0;
    Ok((0..1usize << p)
        .map(|code| {
            let rotated = ((code >> 1) | ((code & 1) << (p - 1))) & ((1 << p) - 1);
            if (code ^ rotated).count_ones() <= 2 {
                next += 1;
                next - 1
            } else {
                catch_all
            }
        })
        .collect())
}

/// Bins per plane histogram: `p(p−1) + 3`.
pub fn bins_per_plane(p: usize) -> usize {
    p * (p - 1) + 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbptopConfig {
    /// Blocks per spatial side.
    pub blocks: usize,
    /// `(R_x, R_y, R_t)`.
    pub radii: (usize, usize, usize),
    /// Neighbours per plane; only 4 is implemented.
    pub neighbors: usize,
    /// L1-normalize each block's concatenated plane histograms.
    pub normalize: bool,
}

impl Default for LbptopConfig {
    fn default() -> Self {
        Self {
            blocks: 5,
            radii: (1, 1, 3),
            neighbors: 4,
            normalize: false,
        }
    }
}

impl LbptopConfig {
    pub fn dimension(&self) -> usize {
        self.blocks * self.blocks * bins_per_plane(self.neighbors) * PLANES
    }

    pub fn min_frames(&self) -> usize {
        2 * self.radii.2 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbptopFeature {
    pub vector: Vec<f64>,
    pub config: LbptopConfig,
}

fn block_bounds(len: usize, n_b: usize, b: usize) -> (usize, usize) {
    (b * len / n_b, (b + 1) * len / n_b)
}

pub fn lbptop(seq: &FrameSequence, config: &LbptopConfig) -> Result<LbptopFeature> {
    if config.neighbors != 4 {
        return Err(Error::invalid(format!(
            "only 4 neighbours per plane are supported, got {}",
            config.neighbors
        )));
    }
    if config.blocks == 0 {
        return Err(Error::invalid("block grid must be at least 1x1"));
    }
    let (rx, ry, rt) = config.radii;
    if rx == 0 || ry == 0 || rt == 0 {
        return Err(Error::invalid("radii must be positive"));
    }
    let n_f = seq.n_frames();
    if n_f < config.min_frames() {
        return Err(Error::SequenceTooShort {
            required: config.min_frames(),
            found: n_f,
        });
    }
    let (rows, cols) = (seq.rows(), seq.cols());
    let side = 2 * rx.max(ry) + 1;
    if rows < side || cols < side {
        return Err(Error::FrameTooSmall {
            rows,
            cols,
            reason: format!("needs at least {side} pixels per side for radii {:?}", config.radii),
        });
    }
    if rows < config.blocks || cols < config.blocks {
        return Err(Error::FrameTooSmall {
            rows,
            cols,
            reason: format!("fewer pixels than the {} blocks per side", config.blocks),
        });
    }

    let table = uniform_pattern_table(4)?;
    let bins = bins_per_plane(4);
    let at = |t: usize, y: usize, x: usize| seq.at(t, y, x);
    let code = |c: f64, n: [f64; 4]| -> usize {
        n.iter()
            .enumerate()
            .map(|(i, &v)| usize::from(v >= c) << i)
            .sum()
    };

    let n_b = config.blocks;
    let mut vector = vec![0.0; config.dimension()];
    for by in 0..n_b {
        let (y0, y1) = block_bounds(rows, n_b, by);
        for bx in 0..n_b {
            let (x0, x1) = block_bounds(cols, n_b, bx);
            let base = (by * n_b + bx) * bins * PLANES;
            let block = &mut vector[base..base + bins * PLANES];

            // XY
            if y1 - y0 > 2 * ry && x1 - x0 > 2 * rx {
                for t in 0..n_f {
                    for y in y0 + ry..y1 - ry {
                        for x in x0 + rx..x1 - rx {
                            let c = code(
                                at(t, y, x),
                                [at(t, y, x + rx), at(t, y - ry, x), at(t, y, x - rx), at(t, y + ry, x)],
                            );
                            block[table[c]] += 1.0;
                        }
                    }
                }
            }
            // XT
            if x1 - x0 > 2 * rx {
                for y in y0..y1 {
                    for t in rt..n_f - rt {
                        for x in x0 + rx..x1 - rx {
                            let c = code(
                                at(t, y, x),
                                [at(t, y, x + rx), at(t + rt, y, x), at(t, y, x - rx), at(t - rt, y, x)],
                            );
                            block[bins + table[c]] += 1.0;
                        }
                    }
                }
            }
            // YT
            if y1 - y0 > 2 * ry {
                for x in x0..x1 {
                    for t in rt..n_f - rt {
                        for y in y0 + ry..y1 - ry {
                            let c = code(
                                at(t, y, x),
                                [at(t, y + ry, x), at(t + rt, y, x), at(t, y - ry, x), at(t - rt, y, x)],
                            );
                            block[2 * bins + table[c]] += 1.0;
                        }
                    }
                }
            }
            if config.normalize {
                let total: f64 = block.iter().sum();
                if total > 0.0 {
                    block.iter_mut().for_each(|v| *v /= total);
                }
            }
        }
    }
    Ok(LbptopFeature {
        vector,
        config: *config,
    })
}

/// One labelled feature vector for export.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub label: String,
    pub subject_id: String,
    pub values: Vec<f64>,
}

/// CSV `sample_id,label,subject_id,f0..f{D−1}`.
pub fn write_feature_csv<W: Write>(rows: &[FeatureRow], out: W) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.values.len());
    if let Some(bad) = rows.iter().find(|r| r.values.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            found: bad.values.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample_id".to_string(), "label".to_string(), "subject_id".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.sample_id.clone(), r.label.clone(), r.subject_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub const MATRIX_MAGIC: &[u8; 4] = b"MSF1";

/// Little-endian `MSF1`, `u32` rows, `u32` cols, then row-major `f32`.
pub fn write_feature_matrix(rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut bytes = Vec::with_capacity(12 + rows.len() * dim * 4);
    bytes.extend_from_slice(MATRIX_MAGIC);
    bytes.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in rows {
        if r.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        for &v in r {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    crate::seqio::write_file(path, &bytes)
}

pub fn read_feature_matrix(path: &Path) -> Result<Vec<Vec<f32>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::MalformedHeader("not a feature matrix".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + n * d * 4 {
        return Err(Error::MalformedHeader(format!(
            "feature matrix payload is {} bytes, expected {}",
            bytes.len() - 12,
            n * d * 4
        )));
    }
    Ok(bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>()
        .chunks(d.max(1))
        .take(n)
        .map(<[f32]>::to_vec)
        .collect())
}
