//! Feature-map distillation kernels and the binary feature-map file.
//!
//! ```bash
//! cargo run --example distillation_losses
//! ```

use bevharmonize::experts::{
    expert_distill_loss, expert_distill_loss_with_mode, read_feature_maps, semantic_distill_loss,
    write_feature_maps, CosineMode, FeatureMap,
};
use bevharmonize::rng::CounterRng;

fn random_map(seed: u64, c: usize, h: usize, w: usize) -> FeatureMap {
    let mut rng = CounterRng::new(seed, 0, 0);
    let data = (0..c * h * w).map(|_| rng.next_range(-1.0, 1.0)).collect();
    FeatureMap::new(c, h, w, data).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // six camera views worth of 64-channel features
    let teacher: Vec<FeatureMap> = (0..6).map(|i| random_map(i, 64, 12, 20)).collect();

    // the expert loss distills teacher features into a student, weighting
    // each view; a zero-noise student reproduces the teacher at loss 0
    let uniform = vec![1.0 / 6.0; 6];
    let perfect = expert_distill_loss(&teacher, &teacher, &uniform)?;
    println!("identical student: loss = {:.3e}", perfect.loss);

    let student: Vec<FeatureMap> = (0..6).map(|i| random_map(100 + i, 64, 12, 20)).collect();
    let random = expert_distill_loss(&student, &teacher, &uniform)?;
    println!("random student:    loss = {:.6}", random.loss);

    let flipped: Vec<FeatureMap> = teacher
        .iter()
        .map(|m| m.scaled(-1.0))
        .collect::<Result<_, _>>()?;
    let anti = expert_distill_loss(&flipped, &teacher, &uniform)?;
    println!(
        "negated student:   loss = {:.6} (maximum is 2 * sum of weights)",
        anti.loss
    );

    // per-location cosine is the default; a whole-map flatten exists for
    // ablation and gives a different (coarser) signal
    let flat = expert_distill_loss_with_mode(&student, &teacher, &uniform, CosineMode::Flatten)?;
    println!("flatten-mode loss: {:.6}\n", flat.loss);

    // semantic distillation aligns a projected 2D-model feature with the
    // first K student channels only, leaving the rest for task-specific
    // information
    let k = 16;
    let projected: Vec<FeatureMap> = (0..6).map(|i| random_map(200 + i, k, 12, 20)).collect();
    let semantic = semantic_distill_loss(&projected, &student, k)?;
    println!(
        "semantic loss over the first {k} of 64 channels: {:.6}",
        semantic.loss
    );

    // all-zero padding (ghost views) contributes cosine 0 and is tallied,
    // never an error
    let padded = vec![FeatureMap::zeros(64, 12, 20)];
    let against = vec![teacher[0].clone()];
    let zeroed = expert_distill_loss(&padded, &against, &[1.0])?;
    println!(
        "zero-padded view: loss = {:.3}, zero-norm locations = {}\n",
        zeroed.loss, zeroed.zero_norm_locations
    );

    // the on-disk format: u32le C,H,W,count header + f32le payload
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("teacher.fmap");
    write_feature_maps(&path, &teacher)?;
    let bytes = std::fs::metadata(&path)?.len();
    let back = read_feature_maps(&path)?;
    println!(
        "feature file: {} maps of {:?} in {bytes} bytes; round-trip equal: {}",
        back.len(),
        back[0].shape(),
        back == teacher
    );
    Ok(())
}
