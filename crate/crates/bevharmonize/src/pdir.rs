//! Pavement Depth Increasing Rate.
//!
//! For one sample, the front camera's view of the ground is summarized by
//! a single scalar: project every annotated box's bottom-face corners
//! into homogeneous image coordinates `(ud, vd, d)` (principal-point
//! centered), fit the ground plane `A*ud + B*vd + C*d + D = 0` by total
//! least squares, and measure how many pixel rows the pavement sweeps
//! between depth `d_min` and `d_min + delta_d` at the image's center
//! column:
//!
//! ```text
//! v(d) = (-D - C*d) / (B*d)
//! pdir = |v(d_min) - v(d_min + delta_d)|
//! ```
//!
//! On flat ground with a level camera this reduces to
//! `f_y * h * (1/d_min - 1/(d_min + delta_d))`, so the value grows
//! linearly with focal length and responds to mounting height, pitch,
//! and road grade, which is the per-sample geometry signal used to carve
//! a merged training pool into expert subsets.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetManifest;
use crate::dataset::Sample;
use crate::geometry::{box_ground_corners, project_point, GeometryError};
use crate::rng;

const COLLINEARITY_TOL: f64 = 1e-9;
const VERTICAL_PLANE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdirError {
    #[error("degenerate geometry: {message}")]
    DegenerateGeometry { message: String },
    #[error("plane is vertical in image space (|B| = {b:e} < {VERTICAL_PLANE_TOL:e})")]
    VerticalPlane { b: f64 },
    #[error("depth must be positive, got {d}")]
    NonPositiveDepth { d: f64 },
    #[error("front camera '{name}' {reason}")]
    NoFrontCamera { name: String, reason: &'static str },
    #[error("only {found} projectable ground corners, need at least 3")]
    InsufficientGroundPoints { found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("cannot split an empty manifest")]
    EmptyManifest,
    #[error("need at least one subset, got 0")]
    ZeroSubsets,
    #[error("dataset-wise split needs >= 2 distinct dataset ids, found {found}")]
    NotEnoughDatasets { found: usize },
}

/// Plane `A*ud + B*vd + C*d + D = 0` in homogeneous image space, stored
/// with `||(A, B, C)|| = 1` and sign canonicalized so `B >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_coef: f64,
}

impl GroundPlane {
    /// Signed orthogonal distance of a point from the plane.
    pub fn residual(&self, point: &[f64; 3]) -> f64 {
        self.a * point[0] + self.b * point[1] + self.c * point[2] + self.d_coef
    }

    fn canonicalize(normal: Vector3<f64>, d_coef: f64) -> Self {
        let norm = normal.norm();
        let (mut n, mut d) = (normal / norm, d_coef / norm);
        let flip = if n.y != 0.0 {
            n.y < 0.0
        } else if n.z != 0.0 {
            n.z < 0.0
        } else {
            n.x < 0.0
        };
        if flip {
            n = -n;
            d = -d;
        }
        GroundPlane {
            a: n.x,
            b: n.y,
            c: n.z,
            d_coef: d,
        }
    }
}

/// Fit a plane to `(ud, vd, d)` triples by total least squares.
///
/// The normal is the eigenvector of the smallest eigenvalue of the
/// centered scatter matrix, which minimizes the sum of squared orthogonal
/// residuals. Points whose two smallest singular values are both below
/// tolerance (collinear or fewer than 3 points) are rejected.
pub fn fit_ground_plane(points: &[[f64; 3]]) -> Result<GroundPlane, PdirError> {
    if points.len() < 3 {
        return Err(PdirError::DegenerateGeometry {
            message: format!("{} points, need at least 3", points.len()),
        });
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| {
        acc + Vector3::new(p[0], p[1], p[2])
    }) / n;

    let mut scatter = Matrix3::zeros();
    for p in points {
        let q = Vector3::new(p[0], p[1], p[2]) - centroid;
        scatter += q * q.transpose();
    }

    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // singular values of the centered point matrix
    let sv: Vec<f64> = lambda.iter().map(|&l| l.max(0.0).sqrt()).collect();

    // Exactly-degenerate input leaves lambda[1] at pure rounding noise
    // (observed ~0.3*eps*lambda[0]), whose sqrt can exceed the singular
    // value tolerance; the eigenvalue-scale floor catches that case.
    let noise_floor = 64.0 * f64::EPSILON * lambda[0].max(f64::MIN_POSITIVE);
    if sv[1] <= COLLINEARITY_TOL * sv[0].max(1.0) || lambda[1] <= noise_floor {
        return Err(PdirError::DegenerateGeometry {
            message: format!(
                "points are collinear: singular values {:.3e}, {:.3e}, {:.3e}",
                sv[0], sv[1], sv[2]
            ),
        });
    }

    let normal: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
    let d_coef = -normal.dot(&centroid);
    Ok(GroundPlane::canonicalize(normal, d_coef))
}

/// Image row of the pavement at depth `d` on the principal column.
pub fn pavement_row(plane: &GroundPlane, d: f64) -> Result<f64, PdirError> {
    if plane.b.abs() < VERTICAL_PLANE_TOL {
        return Err(PdirError::VerticalPlane { b: plane.b });
    }
    if d <= 0.0 {
        return Err(PdirError::NonPositiveDepth { d });
    }
    Ok((-plane.d_coef - plane.c * d) / (plane.b * d))
}

/// How the near end of the measured depth interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DMinPolicy {
    /// Fixed depth in meters.
    Fixed(f64),
    /// Depth of the nearest projected ground corner.
    MinObjectDepth,
}

/// Parameters for [`compute_pdir`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdirConfig {
    /// Name of the forward-facing camera in each rig.
    pub front_camera: String,
    /// Width of the measured depth interval, meters.
    pub delta_d: f64,
    pub d_min_policy: DMinPolicy,
}

impl Default for PdirConfig {
    fn default() -> Self {
        Self {
            front_camera: "front".into(),
            delta_d: 10.0,
            d_min_policy: DMinPolicy::Fixed(5.0),
        }
    }
}

/// Per-sample PDIR measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdirResult {
    pub sample_id: String,
    /// Pixel rows spanned by the `[d_min, d_min + delta_d]` ground interval.
    pub pdir: f64,
    pub d_min: f64,
    pub delta_d: f64,
    pub n_ground_points: usize,
}

/// Compute PDIR for one sample's front camera.
pub fn compute_pdir(sample: &Sample, config: &PdirConfig) -> Result<PdirResult, PdirError> {
    let cam = sample
        .rig
        .camera(&config.front_camera)
        .ok_or_else(|| PdirError::NoFrontCamera {
            name: config.front_camera.clone(),
            reason: "not present in rig",
        })?;
    if cam.intrinsics.is_ghost() {
        return Err(PdirError::NoFrontCamera {
            name: config.front_camera.clone(),
            reason: "is a ghost camera",
        });
    }

    // principal-point-centered pixel coordinates: u_hat = u - cx
    let centered = cam.intrinsics.centered();
    let mut points = Vec::with_capacity(sample.boxes.len() * 4);
    for b in &sample.boxes {
        for corner in box_ground_corners(b) {
            match project_point(&corner, &centered, &cam.extrinsics) {
                Ok(p) => points.push([p.ud, p.vd, p.d]),
                Err(GeometryError::BehindCamera { .. }) => {}
                Err(e) => unreachable!("non-ghost camera projection cannot fail with {e}"),
            }
        }
    }
    if points.len() < 3 {
        return Err(PdirError::InsufficientGroundPoints {
            found: points.len(),
        });
    }

    let plane = fit_ground_plane(&points)?;
    let d_min = match config.d_min_policy {
        DMinPolicy::Fixed(d) => d,
        DMinPolicy::MinObjectDepth => points.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min),
    };
    let v_near = pavement_row(&plane, d_min)?;
    let v_far = pavement_row(&plane, d_min + config.delta_d)?;
    Ok(PdirResult {
        sample_id: sample.sample_id.clone(),
        pdir: (v_near - v_far).abs(),
        d_min,
        delta_d: config.delta_d,
        n_ground_points: points.len(),
    })
}

/// PDIR for every sample of a manifest, in manifest order.
///
/// Samples fan out across `threads` workers (the ambient rayon pool when
/// `None`); each result depends only on its own sample, so output is
/// bit-identical for any thread count.
pub fn compute_pdir_batch(
    manifest: &DatasetManifest,
    config: &PdirConfig,
    threads: Option<usize>,
) -> Vec<(String, Result<PdirResult, PdirError>)> {
    let work = || {
        manifest
            .samples
            .par_iter()
            .map(|s| (s.sample_id.clone(), compute_pdir(s, config)))
            .collect()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

/// Training-pool partitioning strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitStrategy {
    /// Sort by PDIR and cut into `n_subsets` contiguous quantile bins.
    Pdir {
        n_subsets: usize,
        config: PdirConfig,
    },
    /// One subset per provenance dataset id (lexicographic order).
    ByDataset,
    /// Seeded uniform partition into `n_subsets` near-equal bins.
    Random { n_subsets: usize, seed: u64 },
}

/// One sample's subset assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub sample_id: String,
    pub subset: usize,
    /// Present for the PDIR strategy when the value was computable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdir: Option<f64>,
    /// True when PDIR failed for this sample and it was placed in the
    /// median bin instead of being dropped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub n_subsets: usize,
    /// Assignments in manifest sample order.
    pub assignments: Vec<SplitAssignment>,
}

/// Partition a manifest's samples into training subsets.
///
/// Every sample lands in exactly one subset. For the PDIR strategy,
/// samples whose PDIR cannot be computed are assigned to the median bin
/// and flagged rather than dropped.
pub fn split_dataset(
    manifest: &DatasetManifest,
    strategy: &SplitStrategy,
) -> Result<SplitReport, SplitError> {
    if manifest.samples.is_empty() {
        return Err(SplitError::EmptyManifest);
    }
    match strategy {
        SplitStrategy::ByDataset => {
            let mut ids: Vec<&str> = manifest
                .samples
                .iter()
                .map(|s| s.dataset_id.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() < 2 {
                return Err(SplitError::NotEnoughDatasets { found: ids.len() });
            }
            let assignments = manifest
                .samples
                .iter()
                .map(|s| SplitAssignment {
                    sample_id: s.sample_id.clone(),
                    subset: ids
                        .binary_search(&s.dataset_id.as_str())
                        .expect("id present"),
                    pdir: None,
                    flagged: false,
                })
                .collect();
            Ok(SplitReport {
                n_subsets: ids.len(),
                assignments,
            })
        }
        SplitStrategy::Random { n_subsets, seed } => {
            if *n_subsets == 0 {
                return Err(SplitError::ZeroSubsets);
            }
            let n = manifest.samples.len();
            // rank samples by a keyed hash: a seeded uniform shuffle
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (rng::hash_words(*seed, &[i as u64]), i));
            let mut subset_of = vec![0usize; n];
            for (rank, &i) in order.iter().enumerate() {
                subset_of[i] = rank * n_subsets / n;
            }
            let assignments = manifest
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| SplitAssignment {
                    sample_id: s.sample_id.clone(),
                    subset: subset_of[i],
                    pdir: None,
                    flagged: false,
                })
                .collect();
            Ok(SplitReport {
                n_subsets: *n_subsets,
                assignments,
            })
        }
        SplitStrategy::Pdir { n_subsets, config } => {
            if *n_subsets == 0 {
                return Err(SplitError::ZeroSubsets);
            }
            let results = compute_pdir_batch(manifest, config, None);
            // quantile-cut the computable samples by (pdir, sample_id)
            let mut ok: Vec<(f64, usize)> = results
                .iter()
                .enumerate()
                .filter_map(|(i, (_, r))| r.as_ref().ok().map(|p| (p.pdir, i)))
                .collect();
            ok.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("pdir is finite")
                    .then_with(|| results[a.1].0.cmp(&results[b.1].0))
            });
            let n_ok = ok.len();
            let median_bin = (*n_subsets - 1) / 2;
            let mut subset_of = vec![median_bin; results.len()];
            for (rank, &(_, i)) in ok.iter().enumerate() {
                subset_of[i] = rank * n_subsets / n_ok.max(1);
            }
            let assignments = results
                .iter()
                .enumerate()
                .map(|(i, (sample_id, r))| SplitAssignment {
                    sample_id: sample_id.clone(),
                    subset: subset_of[i],
                    pdir: r.as_ref().ok().map(|p| p.pdir),
                    flagged: r.is_err(),
                })
                .collect();
            Ok(SplitReport {
                n_subsets: *n_subsets,
                assignments,
            })
        }
    }
}
