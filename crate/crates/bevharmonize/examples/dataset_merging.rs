//! Harmonize and merge two incompatible datasets: different camera
//! counts, resolutions, and label taxonomies.
//!
//! ```bash
//! cargo run --example dataset_merging
//! ```

use bevharmonize::category::{CategoryMap, MappedCategory};
use bevharmonize::dataset::{load_manifest, merge_datasets, write_manifest};
use bevharmonize::synth::{generate, NoiseModel, SceneSpec, SynthCamera};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    // a 6-camera dataset at 1600x900 and a 5-camera dataset at 1920x1280
    let six = SceneSpec {
        dataset_id: "nusc_like".into(),
        cameras: (0..6)
            .map(|i| SynthCamera {
                name: format!("cam_{i}"),
                yaw: i as f64 * 1.05,
                ..SynthCamera::front(1200.0, 1200.0, 1.5)
            })
            .collect(),
        ..SceneSpec::flat(1, 3, 4, NoiseModel::noiseless())
    };
    let five = SceneSpec {
        dataset_id: "waymo_like".into(),
        cameras: (0..5)
            .map(|i| SynthCamera {
                name: format!("view_{i}"),
                yaw: i as f64 * 1.25,
                width: 1920,
                height_px: 1280,
                ..SynthCamera::front(2000.0, 2000.0, 2.1)
            })
            .collect(),
        ..SceneSpec::flat(2, 2, 4, NoiseModel::noiseless())
    };

    let write_scene =
        |spec: &SceneSpec, name: &str| -> Result<std::path::PathBuf, Box<dyn std::error::Error>> {
            let (manifest, _) = generate(spec)?;
            let path = dir.path().join(name);
            write_manifest(&path, &manifest, None)?;
            Ok(path)
        };
    let path_a = write_scene(&six, "six.bhz")?;
    let path_b = write_scene(&five, "five.bhz")?;

    // a category map folds raw labels into {vehicle, two-wheeler, pedestrian};
    // synthetic manifests already use harmonized names, so identity entries
    // suffice, with one extra showing a dataset-specific fold
    let mut cmap = CategoryMap::identity();
    cmap.insert("waymo_like", "Cyclist", MappedCategory::TwoWheeler);

    let a = load_manifest(&path_a, &cmap)?;
    let b = load_manifest(&path_b, &cmap)?;
    println!(
        "loaded '{}' ({} samples, {} cameras) and '{}' ({} samples, {} cameras)",
        a.dataset_id,
        a.samples.len(),
        a.canonical_camera_count,
        b.dataset_id,
        b.samples.len(),
        b.canonical_camera_count
    );

    // merging pads the short rig with a ghost camera and rescales every
    // real camera to a common 704x384 pixel grid
    let merged = merge_datasets(&[a, b], 704, 384)?;
    println!(
        "merged -> '{}': {} samples, {} cameras per rig",
        merged.dataset_id,
        merged.samples.len(),
        merged.canonical_camera_count
    );
    for sample in &merged.samples {
        let ghosts = sample
            .rig
            .cameras()
            .iter()
            .filter(|c| c.intrinsics.is_ghost())
            .count();
        let front = &sample.rig.cameras()[0].intrinsics;
        println!(
            "  {} (from {}): {} ghosts, front camera {}x{} fx={:.1}",
            sample.sample_id, sample.dataset_id, ghosts, front.width, front.height, front.fx
        );
    }

    let out = dir.path().join("merged.bhz");
    write_manifest(&out, &merged, None)?;
    println!("merged manifest written to {}", out.display());
    Ok(())
}
