//! From per-sample pdir values to expert sample weights and the seeded
//! feature-replacement schedule.
//!
//! ```bash
//! cargo run --example expert_weighting
//! ```

use bevharmonize::experts::{expert_weights, replacement_mask, ReplacementSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // pdir values as they might come out of `pdir-stats`: two datasets
    // with very different camera geometry
    let pdirs: Vec<(String, f64)> = vec![
        ("nusc/0001".into(), 182.0),
        ("nusc/0002".into(), 205.5),
        ("nusc/0003".into(), 171.3),
        ("waymo/0001".into(), 410.8),
        ("waymo/0002".into(), 398.2),
        ("waymo/0003".into(), 442.0),
    ];

    let weights = expert_weights(&pdirs)?;
    println!("pdir_max = {}", weights.pdir_max);
    println!("{:<12} {:>8} {:>8} {:>8}", "sample", "pdir", "w1", "w2");
    for (i, id) in weights.sample_ids.iter().enumerate() {
        println!(
            "{:<12} {:>8.1} {:>8.4} {:>8.4}",
            id, pdirs[i].1, weights.w1[i], weights.w2[i]
        );
    }
    println!(
        "sums: w1 = {:.15}, w2 = {:.15}",
        weights.w1.iter().sum::<f64>(),
        weights.w2.iter().sum::<f64>()
    );
    println!("expert 1 leans toward high-pdir samples, expert 2 toward low-pdir ones\n");

    // during fusion training, expert features replace encoder features
    // per (sample, camera) with probability p; the mask is a pure
    // function of the seed
    let schedule = ReplacementSchedule::new(0.25, 42)?;
    let ids: Vec<String> = weights.sample_ids.clone();
    let mask = replacement_mask(&schedule, &ids, 6);
    println!(
        "replacement mask (p = {}, seed = {}):",
        schedule.probability, schedule.seed
    );
    for (i, id) in ids.iter().enumerate() {
        let row: String = (0..6)
            .map(|j| if mask.replace(i, j) { 'x' } else { '.' })
            .collect();
        println!("  {id:<12} {row}");
    }
    println!(
        "{} of {} views replaced; rerunning with the same seed reproduces this exactly",
        mask.count_true(),
        mask.len()
    );
    Ok(())
}
