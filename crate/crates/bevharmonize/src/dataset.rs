//! Dataset manifests: loading, harmonization, ghost-camera padding, and
//! merging heterogeneous datasets into one training pool.
//!
//! A manifest is a record file (see [`crate::record`]) with one sample per
//! line: sample id, dataset id, the camera rig (intrinsics + ego-to-camera
//! pose per view), and the annotated boxes with raw category labels.
//! Loading applies a [`CategoryMap`] so every in-memory box carries a
//! harmonized [`Category`]; boxes mapped to `ignore` are dropped.
//!
//! Merging equalizes two things across datasets: the camera count, by
//! padding short rigs with ghost cameras (zero focal length, excluded
//! from all geometry), and the pixel grid, by rescaling every real
//! camera's intrinsics to a common target resolution.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::{Category, CategoryMap};
use crate::geometry::{
    rescale_intrinsics, Box3D, CameraExtrinsics, CameraIntrinsics, CameraRig, GeometryError,
    RigCamera,
};
use crate::record::{self, RecordError};

/// Dataset id given to the output of [`merge_datasets`].
pub const MERGED_DATASET_ID: &str = "merged";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}:{line}: sample '{sample_id}': unknown category '{label}' for dataset '{dataset_id}' (no map entry)")]
    UnknownCategory {
        path: String,
        line: usize,
        sample_id: String,
        dataset_id: String,
        label: String,
    },
    #[error("{path}:{line}: sample '{sample_id}': invalid rig: {source}")]
    InvalidRig {
        path: String,
        line: usize,
        sample_id: String,
        #[source]
        source: GeometryError,
    },
    #[error("{path}:{line}: sample '{sample_id}': malformed record: {message}")]
    InvalidRecord {
        path: String,
        line: usize,
        sample_id: String,
        message: String,
    },
    #[error("sample '{sample_id}' has {count} cameras, exceeding target count {target}")]
    TargetTooSmall {
        sample_id: String,
        count: usize,
        target: usize,
    },
    #[error("sample '{sample_id}', camera '{camera}': {source}")]
    Rescale {
        sample_id: String,
        camera: String,
        #[source]
        source: GeometryError,
    },
    #[error("merge requires at least one manifest")]
    NoManifests,
    #[error("duplicate sample id '{sample_id}' across merged manifests")]
    DuplicateSampleId { sample_id: String },
}

/// One annotated multi-view sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    /// Provenance: the dataset this sample originally came from. Survives
    /// merging, which is what dataset-wise splitting keys on.
    pub dataset_id: String,
    pub rig: CameraRig,
    pub boxes: Vec<Box3D>,
    /// One entry per camera when present; `None` entries mark ghost
    /// cameras, which have no backing image.
    pub image_refs: Option<Vec<Option<String>>>,
}

/// An ordered collection of samples plus the rig size they share.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Container id: the common per-sample dataset id, or
    /// [`MERGED_DATASET_ID`] when samples mix provenances.
    pub dataset_id: String,
    pub samples: Vec<Sample>,
    pub canonical_camera_count: usize,
}

impl DatasetManifest {
    /// Build a manifest around `samples`, deriving the container id and
    /// camera count.
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.dataset_id.as_str()).collect();
        let dataset_id = match ids.len() {
            1 => ids.iter().next().unwrap().to_string(),
            _ => MERGED_DATASET_ID.to_string(),
        };
        let canonical_camera_count = samples
            .iter()
            .map(|s| s.rig.len())
            .max()
            .unwrap_or(1)
            .max(1);
        Self {
            dataset_id,
            samples,
            canonical_camera_count,
        }
    }
}

// ---------------------------------------------------------------------------
// Wire records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub name: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major 3x3 ego-to-camera rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRecord {
    pub center: [f64; 3],
    /// (length, width, height) in meters.
    pub size: [f64; 3],
    pub yaw: f64,
    pub raw_category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub dataset_id: String,
    pub cameras: Vec<CameraRecord>,
    pub boxes: Vec<BoxRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_refs: Option<Vec<Option<String>>>,
}

impl CameraRecord {
    pub fn from_camera(cam: &RigCamera) -> Self {
        let r = cam.extrinsics.rotation();
        let t = cam.extrinsics.translation();
        Self {
            name: cam.name.clone(),
            fx: cam.intrinsics.fx,
            fy: cam.intrinsics.fy,
            cx: cam.intrinsics.cx,
            cy: cam.intrinsics.cy,
            width: cam.intrinsics.width,
            height: cam.intrinsics.height,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn to_camera(&self) -> Result<RigCamera, GeometryError> {
        let intrinsics =
            CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        let rotation = Matrix3::from_row_slice(&self.rotation);
        let translation = Vector3::from_column_slice(&self.translation);
        let extrinsics = CameraExtrinsics::new(rotation, translation)?;
        Ok(RigCamera {
            name: self.name.clone(),
            intrinsics,
            extrinsics,
        })
    }
}

impl BoxRecord {
    pub fn from_box(b: &Box3D) -> Self {
        Self {
            center: [b.center.x, b.center.y, b.center.z],
            size: [b.size.x, b.size.y, b.size.z],
            yaw: b.yaw,
            raw_category: b.category.as_str().to_string(),
            velocity: b.velocity.map(|v| [v.x, v.y]),
        }
    }

    /// Geometry-only conversion; the category is resolved by the caller.
    pub fn to_box(&self, category: Category) -> Result<Box3D, GeometryError> {
        Box3D::new(
            Vector3::from_column_slice(&self.center),
            Vector3::from_column_slice(&self.size),
            self.yaw,
            category,
            self.velocity.map(|v| Vector2::new(v[0], v[1])),
        )
    }
}

impl SampleRecord {
    pub fn from_sample(sample: &Sample) -> Self {
        Self {
            sample_id: sample.sample_id.clone(),
            dataset_id: sample.dataset_id.clone(),
            cameras: sample
                .rig
                .cameras()
                .iter()
                .map(CameraRecord::from_camera)
                .collect(),
            boxes: sample.boxes.iter().map(BoxRecord::from_box).collect(),
            image_refs: sample.image_refs.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Load a manifest file and harmonize its categories through `cmap`.
///
/// Boxes whose raw label maps to `ignore` are dropped; a raw label with no
/// map entry at all is an error naming the label and record locus.
pub fn load_manifest(path: &Path, cmap: &CategoryMap) -> Result<DatasetManifest, DatasetError> {
    let (_, records) = record::read_records::<SampleRecord>(path)?;
    let path_str = path.display().to_string();
    let mut samples = Vec::with_capacity(records.len());
    for (line, rec) in records {
        samples.push(sample_from_record(&rec, cmap, &path_str, line)?);
    }
    Ok(DatasetManifest::from_samples(samples))
}

fn sample_from_record(
    rec: &SampleRecord,
    cmap: &CategoryMap,
    path: &str,
    line: usize,
) -> Result<Sample, DatasetError> {
    let mut cameras = Vec::with_capacity(rec.cameras.len());
    for cam in &rec.cameras {
        cameras.push(cam.to_camera().map_err(|source| DatasetError::InvalidRig {
            path: path.to_string(),
            line,
            sample_id: rec.sample_id.clone(),
            source,
        })?);
    }
    let rig = CameraRig::new(cameras).map_err(|source| DatasetError::InvalidRig {
        path: path.to_string(),
        line,
        sample_id: rec.sample_id.clone(),
        source,
    })?;

    if let Some(refs) = &rec.image_refs {
        if refs.len() != rig.len() {
            return Err(DatasetError::InvalidRecord {
                path: path.to_string(),
                line,
                sample_id: rec.sample_id.clone(),
                message: format!(
                    "image_refs has {} entries for {} cameras",
                    refs.len(),
                    rig.len()
                ),
            });
        }
    }

    let mut boxes = Vec::with_capacity(rec.boxes.len());
    for b in &rec.boxes {
        let mapped = cmap
            .lookup(&rec.dataset_id, &b.raw_category)
            .ok_or_else(|| DatasetError::UnknownCategory {
                path: path.to_string(),
                line,
                sample_id: rec.sample_id.clone(),
                dataset_id: rec.dataset_id.clone(),
                label: b.raw_category.clone(),
            })?;
        let Some(category) = mapped.to_category() else {
            continue; // ignore
        };
        boxes.push(
            b.to_box(category)
                .map_err(|e| DatasetError::InvalidRecord {
                    path: path.to_string(),
                    line,
                    sample_id: rec.sample_id.clone(),
                    message: e.to_string(),
                })?,
        );
    }

    Ok(Sample {
        sample_id: rec.sample_id.clone(),
        dataset_id: rec.dataset_id.clone(),
        rig,
        boxes,
        image_refs: rec.image_refs.clone(),
    })
}

/// Write a manifest as a record file, echoing `config` into the header.
pub fn write_manifest(
    path: &Path,
    manifest: &DatasetManifest,
    config: Option<serde_json::Value>,
) -> Result<(), DatasetError> {
    let records: Vec<SampleRecord> = manifest
        .samples
        .iter()
        .map(SampleRecord::from_sample)
        .collect();
    record::write_records(path, config, &records)?;
    Ok(())
}

/// Pad every rig in `manifest` to `target_count` cameras with ghosts.
///
/// Ghost cameras get zero focal length, zero principal point, identity
/// extrinsics, and an absent image reference. Existing cameras are
/// untouched and keep their order.
pub fn add_ghost_cameras(
    manifest: &DatasetManifest,
    target_count: usize,
) -> Result<DatasetManifest, DatasetError> {
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for sample in &manifest.samples {
        let have = sample.rig.len();
        if have > target_count {
            return Err(DatasetError::TargetTooSmall {
                sample_id: sample.sample_id.clone(),
                count: have,
                target: target_count,
            });
        }
        let mut sample = sample.clone();
        for i in have..target_count {
            let name = ghost_name(&sample.rig, i);
            sample
                .rig
                .push(RigCamera {
                    name,
                    intrinsics: CameraIntrinsics::ghost(),
                    extrinsics: CameraExtrinsics::identity(),
                })
                .expect("ghost name is unique by construction");
            if let Some(refs) = &mut sample.image_refs {
                refs.push(None);
            }
        }
        samples.push(sample);
    }
    Ok(DatasetManifest {
        dataset_id: manifest.dataset_id.clone(),
        samples,
        canonical_camera_count: target_count.max(1),
    })
}

fn ghost_name(rig: &CameraRig, index: usize) -> String {
    let mut name = format!("ghost_{index}");
    let mut k = 0;
    while rig.camera(&name).is_some() {
        k += 1;
        name = format!("ghost_{index}_{k}");
    }
    name
}

/// Merge datasets into one manifest with equalized rigs and intrinsics.
///
/// Every rig is padded with ghost cameras to the largest camera count
/// seen, and every real camera is rescaled to `target_w` x `target_h`.
/// Samples keep their provenance `dataset_id`; their order is the
/// concatenation order of the inputs.
pub fn merge_datasets(
    manifests: &[DatasetManifest],
    target_w: u32,
    target_h: u32,
) -> Result<DatasetManifest, DatasetError> {
    if manifests.is_empty() {
        return Err(DatasetError::NoManifests);
    }
    let target_count = manifests
        .iter()
        .flat_map(|m| m.samples.iter().map(|s| s.rig.len()))
        .max()
        .unwrap_or(1)
        .max(1);

    let mut samples = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for manifest in manifests {
        let padded = add_ghost_cameras(manifest, target_count)?;
        for sample in padded.samples {
            if !seen_ids.insert(sample.sample_id.clone()) {
                return Err(DatasetError::DuplicateSampleId {
                    sample_id: sample.sample_id,
                });
            }
            samples.push(rescale_sample(sample, target_w, target_h)?);
        }
    }

    Ok(DatasetManifest {
        dataset_id: MERGED_DATASET_ID.to_string(),
        samples,
        canonical_camera_count: target_count,
    })
}

fn rescale_sample(sample: Sample, target_w: u32, target_h: u32) -> Result<Sample, DatasetError> {
    let mut cameras = Vec::with_capacity(sample.rig.len());
    for cam in sample.rig.cameras() {
        let intrinsics =
            rescale_intrinsics(&cam.intrinsics, target_w, target_h).map_err(|source| {
                DatasetError::Rescale {
                    sample_id: sample.sample_id.clone(),
                    camera: cam.name.clone(),
                    source,
                }
            })?;
        cameras.push(RigCamera {
            name: cam.name.clone(),
            intrinsics,
            extrinsics: cam.extrinsics.clone(),
        });
    }
    Ok(Sample {
        rig: CameraRig::new(cameras).expect("names unchanged"),
        ..sample
    })
}
