//! Toolkit for training and evaluating multi-camera 3D object detectors
//! across heterogeneous datasets.
//!
//! Datasets recorded by different vehicles disagree on almost everything
//! that matters to a surround-view detector: camera count, intrinsics,
//! image resolution, and label taxonomy. This crate provides the
//! harmonization and measurement layer that makes joint training and fair
//! evaluation possible:
//!
//! - [`geometry`]: pinhole cameras, rigid ego-to-camera transforms, 3D
//!   boxes, and homogeneous 2.5D projection.
//! - [`dataset`]: manifest files, category harmonization, ghost-camera
//!   padding, and multi-dataset merging with intrinsic rescaling.
//! - [`pdir`]: the pavement depth increasing rate: a per-sample scalar
//!   describing how fast ground depth sweeps across image rows, used to
//!   split training pools by camera/scene geometry.
//! - [`experts`]: sample weighting, feature-distillation loss kernels,
//!   and the seeded feature-replacement schedule for weak-expert training.
//! - [`metrics`]: BEV detection evaluation: distance-threshold AP,
//!   translation/scale/orientation errors, and the combined score.
//! - [`synth`]: deterministic synthetic scenes used as ground truth for
//!   tests and demos.
//!
//! Each capability has a runnable example under `examples/`; the `bevharmonize`
//! binary exposes the same pipelines as subcommands for shell use.

pub mod category;
pub mod cli;
pub mod dataset;
pub mod experts;
pub mod geometry;
pub mod metrics;
pub mod pdir;
pub mod record;
pub mod rng;
pub mod synth;

pub use category::{Category, CategoryMap, MappedCategory};
pub use dataset::{
    add_ghost_cameras, load_manifest, merge_datasets, write_manifest, DatasetError,
    DatasetManifest, Sample,
};
pub use experts::{
    expert_distill_loss, expert_weights, replacement_mask, semantic_distill_loss, CosineMode,
    DistillLoss, ExpertError, ExpertWeights, FeatureMap, ReplacementMask, ReplacementSchedule,
};
pub use geometry::{
    box_ground_corners, project_point, rescale_intrinsics, Box3D, CameraExtrinsics,
    CameraIntrinsics, CameraRig, GeometryError, Point25D, RigCamera,
};
pub use metrics::{
    average_precision, evaluate, filter_range, match_detections, nds_plus, tp_errors, Detection,
    EvalConfig, EvalReport, MatchResult, MetricsError, TpErrors,
};
pub use pdir::{
    compute_pdir, compute_pdir_batch, fit_ground_plane, pavement_row, split_dataset, DMinPolicy,
    GroundPlane, PdirConfig, PdirError, PdirResult, SplitStrategy,
};
pub use synth::{generate, GroundModel, NoiseModel, SceneSpec, ScoreModel, SynthCamera};
