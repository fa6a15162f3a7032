//! Weak-expert training kernels.
//!
//! Pure functions for the sample-weighting and distillation machinery
//! that specializes two experts from a shared encoder. The networks
//! themselves live elsewhere; this module owns the math that must be
//! reproducible:
//!
//! - [`expert_weights`]: per-sample softmax weights biased toward high
//!   PDIR (expert 1) and low PDIR (expert 2).
//! - [`expert_distill_loss`]: weighted cosine distillation between
//!   feature-map lists (teacher/student).
//! - [`semantic_distill_loss`]: cosine distillation of a projected
//!   teacher against the first K student channels.
//! - [`replacement_mask`]: seeded per-(sample, camera) coin flips that
//!   decide where expert features replace encoder features.
//!
//! Cosines are taken per spatial location across the channel axis and
//! averaged, which preserves spatial structure; a whole-map flatten is
//! available through [`CosineMode`] for ablations. Zero-norm locations
//! (all-zero padding, ghost views) contribute cosine 0 and are tallied
//! instead of erroring, so padded batches cannot poison a loss.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

const ZERO_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("empty input")]
    EmptyInput,
    #[error("sample '{sample_id}': pdir {value} is not a finite non-negative number")]
    NonFinitePdir { sample_id: String, value: f64 },
    #[error("all pdir values are zero; weights undefined")]
    ZeroMax,
    #[error("shape mismatch: {message}")]
    ShapeMismatch { message: String },
    #[error("invalid channel mask k={k}: student has {channels} channels")]
    BadK { k: usize, channels: usize },
    #[error("weight {value} at index {index} is not a finite non-negative number")]
    InvalidWeight { index: usize, value: f64 },
    #[error("probability {p} outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("feature data length {got} does not match {channels}x{height}x{width}")]
    BadDataLength {
        got: usize,
        channels: usize,
        height: usize,
        width: usize,
    },
    #[error("non-finite feature value at flat index {index}")]
    NonFiniteFeature { index: usize },
    #[error("feature file {path}: {message}")]
    BadFeatureFile { path: String, message: String },
    #[error("feature file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-sample distillation weights for the two experts.
///
/// `w1` softmaxes `pdir / pdir_max` (leans toward long-focal/steep
/// scenes); `w2` softmaxes `(pdir_max - pdir) / pdir_max` (the mirror).
/// Both rows sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertWeights {
    pub sample_ids: Vec<String>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// Normalizer used: the maximum PDIR over the supplied batch.
    pub pdir_max: f64,
}

/// Softmax sample weights from `(sample_id, pdir)` pairs.
pub fn expert_weights(pdirs: &[(String, f64)]) -> Result<ExpertWeights, ExpertError> {
    if pdirs.is_empty() {
        return Err(ExpertError::EmptyInput);
    }
    for (id, v) in pdirs {
        if !v.is_finite() || *v < 0.0 {
            return Err(ExpertError::NonFinitePdir {
                sample_id: id.clone(),
                value: *v,
            });
        }
    }
    let pdir_max = pdirs.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    if pdir_max == 0.0 {
        return Err(ExpertError::ZeroMax);
    }

    let softmax = |score: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let exps: Vec<f64> = pdirs.iter().map(|(_, v)| score(*v).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.iter().map(|e| e / total).collect()
    };
    let w1 = softmax(&|p| p / pdir_max);
    let w2 = softmax(&|p| (pdir_max - p) / pdir_max);

    Ok(ExpertWeights {
        sample_ids: pdirs.iter().map(|(id, _)| id.clone()).collect(),
        w1,
        w2,
        pdir_max,
    })
}

/// Dense C x H x W feature tensor with finite entries.
///
/// Values live in f64 so loss algebra is exact to double precision; the
/// on-disk format quantizes to 32-bit floats (see [`write_feature_maps`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<Self, ExpertError> {
        if data.len() != channels * height * width {
            return Err(ExpertError::BadDataLength {
                got: data.len(),
                channels,
                height,
                width,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(ExpertError::NonFiniteFeature { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Same map with every entry multiplied by `k` (must keep entries finite).
    pub fn scaled(&self, k: f64) -> Result<Self, ExpertError> {
        Self::new(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| v * k).collect(),
        )
    }
}

/// How the cosine between two feature maps is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineMode {
    /// Channel-vector cosine at each spatial location, averaged over H*W.
    PerLocation,
    /// One cosine over the flattened map (ablation variant).
    Flatten,
}

/// A loss value plus the count of zero-norm locations that contributed
/// cosine 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillLoss {
    pub loss: f64,
    pub zero_norm_locations: usize,
}

/// Mean (1 - cosine) between `a` and the first `a.channels` channels of `b`.
///
/// `a` and `b` must share spatial shape and `b` must have at least as many
/// channels; callers check that. Accumulation is sequential in f64, so the
/// result is independent of thread count by construction.
fn cosine_dissimilarity(a: &FeatureMap, b: &FeatureMap, mode: CosineMode) -> (f64, usize) {
    let k = a.channels;
    match mode {
        CosineMode::PerLocation => {
            let mut acc = 0.0;
            let mut zeros = 0usize;
            for y in 0..a.height {
                for x in 0..a.width {
                    let mut dot = 0.0f64;
                    let mut na = 0.0f64;
                    let mut nb = 0.0f64;
                    for c in 0..k {
                        let va = a.get(c, y, x);
                        let vb = b.get(c, y, x);
                        dot += va * vb;
                        na += va * va;
                        nb += vb * vb;
                    }
                    let (na, nb) = (na.sqrt(), nb.sqrt());
                    let cos = if na < ZERO_NORM_TOL || nb < ZERO_NORM_TOL {
                        zeros += 1;
                        0.0
                    } else {
                        // rounding can push |cos| past 1; keep the loss in [0, 2]
                        (dot / (na * nb)).clamp(-1.0, 1.0)
                    };
                    acc += 1.0 - cos;
                }
            }
            (acc / (a.height * a.width) as f64, zeros)
        }
        CosineMode::Flatten => {
            let mut dot = 0.0f64;
            let mut na = 0.0f64;
            let mut nb = 0.0f64;
            for c in 0..k {
                for y in 0..a.height {
                    for x in 0..a.width {
                        let va = a.get(c, y, x);
                        let vb = b.get(c, y, x);
                        dot += va * vb;
                        na += va * va;
                        nb += vb * vb;
                    }
                }
            }
            let (na, nb) = (na.sqrt(), nb.sqrt());
            if na < ZERO_NORM_TOL || nb < ZERO_NORM_TOL {
                (1.0, 1)
            } else {
                (1.0 - (dot / (na * nb)).clamp(-1.0, 1.0), 0)
            }
        }
    }
}

fn check_same_shape(
    what: &str,
    index: usize,
    a: (usize, usize, usize),
    b: (usize, usize, usize),
) -> Result<(), ExpertError> {
    if a != b {
        return Err(ExpertError::ShapeMismatch {
            message: format!("{what} at index {index}: {a:?} vs {b:?}"),
        });
    }
    Ok(())
}

/// Weighted distillation loss between student and teacher feature lists:
/// `sum_i w_i * (1 - cos(student_i, teacher_i))`.
pub fn expert_distill_loss(
    student: &[FeatureMap],
    teacher: &[FeatureMap],
    weights: &[f64],
) -> Result<DistillLoss, ExpertError> {
    expert_distill_loss_with_mode(student, teacher, weights, CosineMode::PerLocation)
}

pub fn expert_distill_loss_with_mode(
    student: &[FeatureMap],
    teacher: &[FeatureMap],
    weights: &[f64],
    mode: CosineMode,
) -> Result<DistillLoss, ExpertError> {
    if student.len() != teacher.len() || student.len() != weights.len() {
        return Err(ExpertError::ShapeMismatch {
            message: format!(
                "list lengths differ: student {}, teacher {}, weights {}",
                student.len(),
                teacher.len(),
                weights.len()
            ),
        });
    }
    for (index, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w < 0.0 {
            return Err(ExpertError::InvalidWeight { index, value: *w });
        }
    }
    let mut loss = 0.0;
    let mut zeros = 0usize;
    for (i, ((s, t), w)) in student.iter().zip(teacher).zip(weights).enumerate() {
        check_same_shape("feature maps", i, s.shape(), t.shape())?;
        let (dis, z) = cosine_dissimilarity(s, t, mode);
        loss += w * dis;
        zeros += z;
    }
    Ok(DistillLoss {
        loss,
        zero_norm_locations: zeros,
    })
}

/// Semantic distillation of a projected teacher against the first
/// `k_channels` student channels: `sum_i (1 - cos(teacher_i, M(student_i)))`.
pub fn semantic_distill_loss(
    teacher_projected: &[FeatureMap],
    student: &[FeatureMap],
    k_channels: usize,
) -> Result<DistillLoss, ExpertError> {
    semantic_distill_loss_with_mode(
        teacher_projected,
        student,
        k_channels,
        CosineMode::PerLocation,
    )
}

pub fn semantic_distill_loss_with_mode(
    teacher_projected: &[FeatureMap],
    student: &[FeatureMap],
    k_channels: usize,
    mode: CosineMode,
) -> Result<DistillLoss, ExpertError> {
    if teacher_projected.len() != student.len() {
        return Err(ExpertError::ShapeMismatch {
            message: format!(
                "list lengths differ: teacher {}, student {}",
                teacher_projected.len(),
                student.len()
            ),
        });
    }
    let mut loss = 0.0;
    let mut zeros = 0usize;
    for (i, (t, s)) in teacher_projected.iter().zip(student).enumerate() {
        if k_channels == 0 || k_channels > s.channels() {
            return Err(ExpertError::BadK {
                k: k_channels,
                channels: s.channels(),
            });
        }
        if t.channels() != k_channels {
            return Err(ExpertError::ShapeMismatch {
                message: format!(
                    "teacher at index {i} has {} channels, expected k={k_channels}",
                    t.channels()
                ),
            });
        }
        check_same_shape(
            "spatial dims",
            i,
            (k_channels, t.height(), t.width()),
            (k_channels, s.height(), s.width()),
        )?;
        let (dis, z) = cosine_dissimilarity(t, s, mode);
        loss += dis;
        zeros += z;
    }
    Ok(DistillLoss {
        loss,
        zero_norm_locations: zeros,
    })
}

/// Probability and seed for stochastic feature replacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplacementSchedule {
    pub probability: f64,
    pub seed: u64,
}

impl ReplacementSchedule {
    pub fn new(probability: f64, seed: u64) -> Result<Self, ExpertError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(ExpertError::InvalidProbability { p: probability });
        }
        Ok(Self { probability, seed })
    }
}

/// Boolean replacement decisions, one per (sample, camera).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementMask {
    pub sample_ids: Vec<String>,
    pub n_cameras: usize,
    bits: Vec<bool>,
}

impl ReplacementMask {
    /// True when camera `camera` of sample index `sample` takes expert features.
    pub fn replace(&self, sample: usize, camera: usize) -> bool {
        self.bits[sample * self.n_cameras + camera]
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Draw the per-(sample, camera) replacement mask.
///
/// Entry `(i, j)` is an independent Bernoulli(p) draw keyed by
/// `(seed, i, j)`: bit-identical across runs and thread counts, and
/// stable under appending more samples or cameras.
pub fn replacement_mask(
    schedule: &ReplacementSchedule,
    sample_ids: &[String],
    n_cameras: usize,
) -> ReplacementMask {
    let mut bits = Vec::with_capacity(sample_ids.len() * n_cameras);
    for i in 0..sample_ids.len() {
        for j in 0..n_cameras {
            bits.push(rng::uniform_at(schedule.seed, &[i as u64, j as u64]) < schedule.probability);
        }
    }
    ReplacementMask {
        sample_ids: sample_ids.to_vec(),
        n_cameras,
        bits,
    }
}

// ---------------------------------------------------------------------------
// Feature-map file format
// ---------------------------------------------------------------------------

/// Write feature maps: a 16-byte header of four little-endian u32 values
/// (C, H, W, count) followed by `count` images of C*H*W little-endian
/// f32 values, channel-major row-major.
///
/// Values are quantized to f32 on the way out; anything outside f32
/// range is rejected.
pub fn write_feature_maps(path: &Path, maps: &[FeatureMap]) -> Result<(), ExpertError> {
    let io_err = |e: std::io::Error| ExpertError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let first = maps.first().ok_or(ExpertError::EmptyInput)?;
    let (c, h, w) = first.shape();
    for (i, m) in maps.iter().enumerate() {
        check_same_shape("feature maps in file", i, m.shape(), (c, h, w))?;
    }
    let mut buf = Vec::with_capacity(16 + maps.len() * c * h * w * 4);
    for dim in [c, h, w, maps.len()] {
        let dim = u32::try_from(dim).map_err(|_| ExpertError::BadFeatureFile {
            path: path.display().to_string(),
            message: format!("dimension {dim} exceeds u32"),
        })?;
        buf.write_all(&dim.to_le_bytes()).map_err(io_err)?;
    }
    for m in maps {
        for (index, v) in m.data().iter().enumerate() {
            let q = *v as f32;
            if !q.is_finite() {
                return Err(ExpertError::NonFiniteFeature { index });
            }
            buf.write_all(&q.to_le_bytes()).map_err(io_err)?;
        }
    }
    crate::record::write_atomic(path, &buf).map_err(|e| match e {
        crate::record::RecordError::Io { path, source } => ExpertError::Io { path, source },
        other => ExpertError::BadFeatureFile {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

/// Read a feature-map file written by [`write_feature_maps`].
pub fn read_feature_maps(path: &Path) -> Result<Vec<FeatureMap>, ExpertError> {
    let io_err = |e: std::io::Error| ExpertError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let bad = |message: String| ExpertError::BadFeatureFile {
        path: path.display().to_string(),
        message,
    };
    let mut file = std::fs::File::open(path).map_err(io_err)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|_| bad("truncated header".into()))?;
    let dims: Vec<usize> = header
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    let (c, h, w, count) = (dims[0], dims[1], dims[2], dims[3]);
    let per_map = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| bad("header dimensions overflow".into()))?;
    let expected = per_map
        .checked_mul(count)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| bad("header dimensions overflow".into()))?;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(io_err)?;
    if payload.len() != expected {
        return Err(bad(format!(
            "expected {expected} payload bytes, found {}",
            payload.len()
        )));
    }

    let mut maps = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * per_map * 4;
        let data: Vec<f64> = payload[start..start + per_map * 4]
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        maps.push(FeatureMap::new(c, h, w, data)?);
    }
    Ok(maps)
}
