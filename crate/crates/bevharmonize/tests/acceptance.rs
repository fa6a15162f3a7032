//! Acceptance suite.
//!
//! One test per criterion; each prints a `PASS: criterion N` line on
//! success (run with `--nocapture` to see them alongside cargo's own
//! per-test verdicts). Oracles here are written from scratch against the
//! library's public API so every check is a genuine second route.

use std::collections::BTreeMap;
use std::time::Instant;

use bevharmonize::dataset::{add_ghost_cameras, merge_datasets};
use bevharmonize::geometry::project_point;
use bevharmonize::metrics::{
    average_precision, evaluate, match_detections, nds_plus, Detection, EvalConfig,
};
use bevharmonize::pdir::{compute_pdir, fit_ground_plane, GroundPlane, PdirConfig};
use bevharmonize::rng::CounterRng;
use bevharmonize::synth::{generate, NoiseModel, SceneSpec, ScoreModel, SynthCamera};
use bevharmonize::{expert_distill_loss, expert_weights, Box3D, Category, FeatureMap};
use nalgebra::Vector3;

fn noisy_spec(seed: u64, n_samples: usize, boxes: usize, center_sigma: f64) -> SceneSpec {
    SceneSpec::flat(
        seed,
        n_samples,
        boxes,
        NoiseModel {
            center_sigma,
            size_sigma: 0.05,
            yaw_sigma: 0.1,
            score: ScoreModel::Uniform { lo: 0.05, hi: 1.0 },
        },
    )
}

fn gt_as_perfect_detections(manifest: &bevharmonize::DatasetManifest) -> Vec<Detection> {
    manifest
        .samples
        .iter()
        .flat_map(|s| {
            s.boxes
                .iter()
                .map(|b| Detection::new(s.sample_id.clone(), b.clone(), 1.0).unwrap())
        })
        .collect()
}

#[test]
fn criterion_01_nds_fixed_point_on_perfect_detections() {
    let start = Instant::now();
    for seed in 0..50u64 {
        let mut rng = CounterRng::new(seed, 99, 0);
        let n_samples = 2 + (rng.next_u64() % 4) as usize;
        let boxes = 3 + (rng.next_u64() % 6) as usize;
        let spec = SceneSpec::flat(seed, n_samples, boxes, NoiseModel::noiseless());
        let (manifest, _) = generate(&spec).unwrap();
        let dets = gt_as_perfect_detections(&manifest);
        let report = evaluate(&manifest, &dets, &EvalConfig::default()).unwrap();

        assert!(
            report.excluded.is_empty(),
            "seed {seed}: all categories must be present"
        );
        for class in &report.per_class {
            assert!(
                (class.ap - 1.0).abs() <= 1e-12,
                "seed {seed}: ap {}",
                class.ap
            );
            assert_eq!(
                (class.ate, class.ase, class.aoe),
                (0.0, 0.0, 0.0),
                "seed {seed}"
            );
            assert!((class.nds_plus - 1.0).abs() <= 1e-12, "seed {seed}");
        }
        assert!(
            (report.map - 1.0).abs() <= 1e-12,
            "seed {seed}: map {}",
            report.map
        );
        assert!((report.mnds_plus - 1.0).abs() <= 1e-12, "seed {seed}");
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "took {elapsed:?}, budget 10 s"
    );
    println!("PASS: criterion 1 - perfect detections are the fixed point (50 scenes, {elapsed:?})");
}

#[test]
fn criterion_02_nds_formula_spot_check() {
    let got = nds_plus(0.5, 0.5, 0.25, 2.0);
    let want = (3.0 * 0.5 + (1.0 - 0.5) + (1.0 - 0.25) + 0.0) / 6.0; // 0.458333...
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    assert!((got - 0.458_333_333_333_333_3).abs() <= 1e-12);
    println!("PASS: criterion 2 - combined-score formula spot check ({got})");
}

/// From-scratch greedy matcher: descending score, nearest unmatched
/// same-sample box, strict threshold.
fn oracle_greedy_trace(
    gts: &BTreeMap<String, Vec<Box3D>>,
    dets: &[Detection],
    threshold: f64,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap()
            .then_with(|| dets[i].sample_id.cmp(&dets[j].sample_id))
            .then_with(|| i.cmp(&j))
    });
    let mut taken: BTreeMap<&str, Vec<bool>> = gts
        .iter()
        .map(|(k, v)| (k.as_str(), vec![false; v.len()]))
        .collect();
    let mut flags = Vec::new();
    for &i in &order {
        let det = &dets[i];
        let mut matched = false;
        if let Some(boxes) = gts.get(&det.sample_id) {
            let used = taken.get_mut(det.sample_id.as_str()).unwrap();
            let mut best = f64::INFINITY;
            let mut best_idx = None;
            for (gi, gt) in boxes.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let dx = gt.center.x - det.bbox.center.x;
                let dy = gt.center.y - det.bbox.center.y;
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < best {
                    best = dist;
                    best_idx = Some(gi);
                }
            }
            if let Some(gi) = best_idx {
                if best < threshold {
                    used[gi] = true;
                    matched = true;
                }
            }
        }
        flags.push(matched);
    }
    flags
}

/// Brute-force AP: one operating point per score cut (each cut re-matched
/// from scratch), linear-scan interpolation over 101 recall points,
/// 10% floors.
fn oracle_ap(gts: &BTreeMap<String, Vec<Box3D>>, dets: &[Detection], threshold: f64) -> f64 {
    let n_gt: usize = gts.values().map(Vec::len).sum();
    assert!(n_gt > 0);
    let mut cuts: Vec<f64> = dets.iter().map(|d| d.score).collect();
    cuts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cuts.dedup();

    let mut curve: Vec<(f64, f64)> = Vec::new();
    for cut in cuts {
        let survivors: Vec<Detection> = dets.iter().filter(|d| d.score >= cut).cloned().collect();
        let flags = oracle_greedy_trace(gts, &survivors, threshold);
        let tp = flags.iter().filter(|f| **f).count();
        curve.push((tp as f64 / n_gt as f64, tp as f64 / flags.len() as f64));
    }

    let mut acc = 0.0;
    for i in 11..=100 {
        let r = i as f64 / 100.0;
        let p = if curve.is_empty() || r > curve.last().unwrap().0 {
            0.0
        } else if r < curve[0].0 {
            curve[0].1
        } else {
            let mut j = 0;
            for (idx, point) in curve.iter().enumerate() {
                if point.0 <= r {
                    j = idx;
                }
            }
            if j + 1 == curve.len() {
                curve[j].1
            } else {
                curve[j].1
                    + (curve[j + 1].1 - curve[j].1) * (r - curve[j].0)
                        / (curve[j + 1].0 - curve[j].0)
            }
        };
        acc += (p - 0.1).max(0.0);
    }
    (acc / 90.0 / 0.9).clamp(0.0, 1.0)
}

#[test]
fn criterion_03_ap_equals_brute_force_oracle() {
    let start = Instant::now();
    for seed in 0..100u64 {
        let mut rng = CounterRng::new(seed, 7, 7);
        let boxes = 3 + (rng.next_u64() % 8) as usize; // <= 10 boxes/sample
        let spec = noisy_spec(seed, 3, boxes, 0.35);
        let (manifest, dets) = generate(&spec).unwrap();

        for category in Category::ALL {
            let mut gts: BTreeMap<String, Vec<Box3D>> = BTreeMap::new();
            for s in &manifest.samples {
                let cat_boxes: Vec<Box3D> = s
                    .boxes
                    .iter()
                    .filter(|b| b.category == category)
                    .cloned()
                    .collect();
                if !cat_boxes.is_empty() {
                    gts.insert(s.sample_id.clone(), cat_boxes);
                }
            }
            if gts.is_empty() {
                continue;
            }
            let cat_dets: Vec<Detection> = dets
                .iter()
                .filter(|d| d.bbox.category == category)
                .cloned()
                .collect();
            for threshold in [0.5, 1.0, 2.0, 4.0] {
                let matches = match_detections(&gts, &cat_dets, threshold);
                let got = average_precision(&matches).unwrap();
                let want = oracle_ap(&gts, &cat_dets, threshold);
                assert_eq!(
                    got, want,
                    "seed {seed} category {category} threshold {threshold}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "took {elapsed:?}, budget 30 s"
    );
    println!(
        "PASS: criterion 3 - AP equals the all-cuts brute-force oracle (100 scenes, {elapsed:?})"
    );
}

#[test]
fn criterion_04_pdir_analytic_value_and_focal_proportionality() {
    let start = Instant::now();
    let config = PdirConfig::default(); // d_min 5 m, delta_d 10 m

    let (manifest, _) = generate(&SceneSpec::flat(5, 1, 8, NoiseModel::noiseless())).unwrap();
    let base = compute_pdir(&manifest.samples[0], &config).unwrap();
    let expected = 1000.0 * 1.5 * (1.0 / 5.0 - 1.0 / 15.0); // 200.0
    assert!(
        (base.pdir - expected).abs() <= 1e-6 * expected,
        "pdir {} vs analytic {expected}",
        base.pdir
    );

    let mut doubled_spec = SceneSpec::flat(5, 1, 8, NoiseModel::noiseless());
    doubled_spec.cameras = vec![SynthCamera::front(1000.0, 2000.0, 1.5)];
    let (doubled_manifest, _) = generate(&doubled_spec).unwrap();
    let doubled = compute_pdir(&doubled_manifest.samples[0], &config).unwrap();
    assert!(
        (doubled.pdir - 2.0 * base.pdir).abs() <= 1e-9 * (2.0 * base.pdir),
        "doubling fy: {} vs {}",
        doubled.pdir,
        2.0 * base.pdir
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!(
        "PASS: criterion 4 - pdir = 200.0 px on the analytic scene and doubles with fy ({elapsed:?})"
    );
}

fn sum_sq_residuals(plane: &GroundPlane, points: &[[f64; 3]]) -> f64 {
    points.iter().map(|p| plane.residual(p).powi(2)).sum()
}

#[test]
fn criterion_05_plane_fit_beats_random_perturbations() {
    for set in 0..50u64 {
        let mut rng = CounterRng::new(set, 3, 1);
        let normal = Vector3::new(
            rng.next_range(-0.5, 0.5),
            rng.next_range(0.5, 1.0),
            rng.next_range(-0.5, 0.5),
        )
        .normalize();
        let d0 = rng.next_range(-40.0, 40.0);
        let sample_point = |rng: &mut CounterRng, noise: f64| {
            let x = rng.next_range(-80.0, 80.0);
            let z = rng.next_range(1.0, 50.0);
            let y = (-d0 - normal.x * x - normal.z * z) / normal.y;
            let p = Vector3::new(x, y, z) + normal * noise;
            [p.x, p.y, p.z]
        };

        // noise-free: the fit interpolates exactly
        let exact: Vec<[f64; 3]> = (0..30).map(|_| sample_point(&mut rng, 0.0)).collect();
        let plane = fit_ground_plane(&exact).unwrap();
        for p in &exact {
            assert!(
                plane.residual(p).abs() <= 1e-9,
                "set {set}: residual {}",
                plane.residual(p)
            );
        }

        // noisy: total-least-squares optimum beats 1000 perturbed planes
        let noisy: Vec<[f64; 3]> = (0..30)
            .map(|_| {
                let noise = rng.next_normal() * 0.4;
                sample_point(&mut rng, noise)
            })
            .collect();
        let fitted = fit_ground_plane(&noisy).unwrap();
        let fitted_residual = sum_sq_residuals(&fitted, &noisy);
        for trial in 0..1000 {
            let scale = if trial % 2 == 0 { 1e-3 } else { 0.3 };
            let n = Vector3::new(fitted.a, fitted.b, fitted.c)
                + Vector3::new(
                    rng.next_normal() * scale,
                    rng.next_normal() * scale,
                    rng.next_normal() * scale,
                );
            let n = n.normalize();
            let perturbed = GroundPlane {
                a: n.x,
                b: n.y,
                c: n.z,
                d_coef: fitted.d_coef + rng.next_normal() * scale * 10.0,
            };
            let other = sum_sq_residuals(&perturbed, &noisy);
            assert!(
                fitted_residual <= other + 1e-9,
                "set {set} trial {trial}: fitted {fitted_residual} > perturbed {other}"
            );
        }
    }
    println!(
        "PASS: criterion 5 - plane fit optimal against 50x1000 perturbations, exact on clean data"
    );
}

#[test]
fn criterion_06_expert_weights_sums_softmax_monotonicity() {
    // softmax of (1, 0)
    let w = expert_weights(&[("hi".into(), 321.5), ("lo".into(), 0.0)]).unwrap();
    assert!((w.w1[0] - 0.73106).abs() <= 1e-5, "w1[0] = {}", w.w1[0]);
    assert!((w.w1[1] - 0.26894).abs() <= 1e-5);
    assert!((w.w2[0] - 0.26894).abs() <= 1e-5);
    assert!((w.w2[1] - 0.73106).abs() <= 1e-5);

    for seed in 0..1000u64 {
        let mut rng = CounterRng::new(seed, 11, 0);
        let n = 1 + (rng.next_u64() % 40) as usize;
        let pdirs: Vec<(String, f64)> = (0..n)
            .map(|i| (format!("s{i}"), rng.next_range(0.0, 500.0)))
            .collect();
        if pdirs.iter().all(|(_, p)| *p == 0.0) {
            continue;
        }
        let w = expert_weights(&pdirs).unwrap();
        assert!(
            (w.w1.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
            "seed {seed}"
        );
        assert!(
            (w.w2.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
            "seed {seed}"
        );
        for i in 0..n {
            for j in 0..n {
                if pdirs[i].1 > pdirs[j].1 {
                    assert!(w.w1[i] > w.w1[j], "seed {seed}: w1 not strictly monotone");
                    assert!(
                        w.w2[i] < w.w2[j],
                        "seed {seed}: w2 not strictly anti-monotone"
                    );
                }
            }
        }
    }
    println!("PASS: criterion 6 - weight sums, softmax value, and monotonicity on 1000 draws");
}

/// Naive triple-loop distillation-loss oracle.
fn loop_loss_oracle(student: &[FeatureMap], teacher: &[FeatureMap], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((s, t), w) in student.iter().zip(teacher).zip(weights) {
        let (c, h, wid) = s.shape();
        let mut acc = 0.0;
        for y in 0..h {
            for x in 0..wid {
                let mut dot = 0.0;
                let mut ns = 0.0;
                let mut nt = 0.0;
                for ch in 0..c {
                    dot += s.get(ch, y, x) * t.get(ch, y, x);
                    ns += s.get(ch, y, x) * s.get(ch, y, x);
                    nt += t.get(ch, y, x) * t.get(ch, y, x);
                }
                let (ns, nt) = (ns.sqrt(), nt.sqrt());
                let cos = if ns < 1e-12 || nt < 1e-12 {
                    0.0
                } else {
                    dot / (ns * nt)
                };
                acc += 1.0 - cos;
            }
        }
        total += w * acc / (h * wid) as f64;
    }
    total
}

fn random_map(seed: u64, c: usize, h: usize, w: usize) -> FeatureMap {
    let mut rng = CounterRng::new(seed, 13, 0);
    let data: Vec<f64> = (0..c * h * w).map(|_| rng.next_range(-3.0, 3.0)).collect();
    FeatureMap::new(c, h, w, data).unwrap()
}

#[test]
fn criterion_07_distillation_kernels() {
    // identical lists -> 0
    let maps = vec![random_map(1, 8, 16, 16), random_map(2, 8, 16, 16)];
    let zero = expert_distill_loss(&maps, &maps, &[0.5, 0.5]).unwrap();
    assert!(zero.loss.abs() <= 1e-12, "identical loss {}", zero.loss);

    // negated with unit weight sum -> 2
    let negated: Vec<FeatureMap> = maps.iter().map(|m| m.scaled(-1.0).unwrap()).collect();
    let two = expert_distill_loss(&maps, &negated, &[0.25, 0.75]).unwrap();
    assert!((two.loss - 2.0).abs() <= 1e-9, "negated loss {}", two.loss);

    for seed in 0..50u64 {
        let mut rng = CounterRng::new(seed, 17, 0);
        let c = 1 + (rng.next_u64() % 8) as usize;
        let h = 1 + (rng.next_u64() % 16) as usize;
        let w = 1 + (rng.next_u64() % 16) as usize;
        let student = vec![
            random_map(seed * 3 + 1, c, h, w),
            random_map(seed * 3 + 2, c, h, w),
        ];
        let teacher = vec![
            random_map(seed * 3 + 100, c, h, w),
            random_map(seed * 3 + 200, c, h, w),
        ];
        let weights = [rng.next_f64(), rng.next_f64()];

        let got = expert_distill_loss(&student, &teacher, &weights)
            .unwrap()
            .loss;
        let want = loop_loss_oracle(&student, &teacher, &weights);
        assert!(
            (got - want).abs() <= 1e-7,
            "seed {seed}: {got} vs oracle {want}"
        );

        // cosine scale invariance under positive scaling of either side
        for k in [0.125, 2.0, 7.0] {
            let scaled_student: Vec<FeatureMap> =
                student.iter().map(|m| m.scaled(k).unwrap()).collect();
            let a = expert_distill_loss(&scaled_student, &teacher, &weights)
                .unwrap()
                .loss;
            assert!(
                (a - got).abs() <= 1e-9,
                "seed {seed} scale {k}: {a} vs {got}"
            );
            let scaled_teacher: Vec<FeatureMap> =
                teacher.iter().map(|m| m.scaled(k).unwrap()).collect();
            let b = expert_distill_loss(&student, &scaled_teacher, &weights)
                .unwrap()
                .loss;
            assert!(
                (b - got).abs() <= 1e-9,
                "seed {seed} scale {k}: {b} vs {got}"
            );
        }
    }
    println!(
        "PASS: criterion 7 - distillation kernels: fixed points, loop oracle, scale invariance"
    );
}

#[test]
fn criterion_08_ghost_cameras_change_nothing() {
    let config = PdirConfig::default();
    for seed in 0..10u64 {
        let spec = noisy_spec(seed, 4, 6, 0.25);
        let (manifest, dets) = generate(&spec).unwrap();
        let padded = add_ghost_cameras(&manifest, manifest.canonical_camera_count + 3).unwrap();

        for (before, after) in manifest.samples.iter().zip(&padded.samples) {
            let a = compute_pdir(before, &config).unwrap();
            let b = compute_pdir(after, &config).unwrap();
            assert_eq!(
                a.pdir.to_bits(),
                b.pdir.to_bits(),
                "seed {seed}: pdir changed"
            );
            assert_eq!(a.n_ground_points, b.n_ground_points);
        }

        let report_before = evaluate(&manifest, &dets, &EvalConfig::default()).unwrap();
        let report_after = evaluate(&padded, &dets, &EvalConfig::default()).unwrap();
        let json_before = serde_json::to_string(&report_before).unwrap();
        let json_after = serde_json::to_string(&report_after).unwrap();
        assert_eq!(
            json_before, json_after,
            "seed {seed}: evaluation report changed"
        );
    }
    println!("PASS: criterion 8 - ghost padding is bit-exactly invisible to pdir and evaluation");
}

#[test]
fn criterion_09_merge_bookkeeping_and_rescale_ratios() {
    let six_cam = SceneSpec {
        cameras: (0..6)
            .map(|i| SynthCamera {
                name: format!("cam_{i}"),
                yaw: i as f64,
                ..SynthCamera::front(1200.0, 1100.0, 1.6)
            })
            .collect(),
        dataset_id: "six".into(),
        ..SceneSpec::flat(1, 4, 5, NoiseModel::noiseless())
    };
    let five_cam = SceneSpec {
        cameras: (0..5)
            .map(|i| SynthCamera {
                name: format!("cam_{i}"),
                yaw: i as f64 * 1.2,
                width: 1920,
                height_px: 1280,
                ..SynthCamera::front(2000.0, 2000.0, 2.1)
            })
            .collect(),
        dataset_id: "five".into(),
        ..SceneSpec::flat(2, 3, 5, NoiseModel::noiseless())
    };
    let (m6, _) = generate(&six_cam).unwrap();
    let (m5, _) = generate(&five_cam).unwrap();

    let (target_w, target_h) = (704u32, 384u32);
    let merged = merge_datasets(&[m6.clone(), m5.clone()], target_w, target_h).unwrap();

    assert_eq!(merged.samples.len(), m6.samples.len() + m5.samples.len());
    assert!(merged.samples.iter().all(|s| s.rig.len() == 6));
    assert_eq!(merged.canonical_camera_count, 6);

    // every original camera's projections scale by exactly target/source
    let probe = Vector3::new(12.0, 3.0, 0.7);
    for (original, merged_sample) in m6.samples.iter().chain(&m5.samples).zip(&merged.samples) {
        assert_eq!(original.sample_id, merged_sample.sample_id);
        for cam in original.rig.cameras() {
            let rescaled = merged_sample.rig.camera(&cam.name).unwrap();
            assert!(!rescaled.intrinsics.is_ghost());
            let sx = f64::from(target_w) / f64::from(cam.intrinsics.width);
            let sy = f64::from(target_h) / f64::from(cam.intrinsics.height);
            let before = project_point(&probe, &cam.intrinsics, &cam.extrinsics);
            let after = project_point(&probe, &rescaled.intrinsics, &rescaled.extrinsics);
            match (before, after) {
                (Ok(p0), Ok(p1)) => {
                    let (u0, v0) = p0.pixel();
                    let (u1, v1) = p1.pixel();
                    assert!(
                        (u1 - u0 * sx).abs() <= 1e-9 * u0.abs().max(1.0),
                        "camera {}: u {} vs {}",
                        cam.name,
                        u1,
                        u0 * sx
                    );
                    assert!(
                        (v1 - v0 * sy).abs() <= 1e-9 * v0.abs().max(1.0),
                        "camera {}: v {} vs {}",
                        cam.name,
                        v1,
                        v0 * sy
                    );
                }
                (Err(_), Err(_)) => {} // behind this view in both, fine
                other => panic!("projection disagreement for {}: {other:?}", cam.name),
            }
        }
        // padding appended ghosts only
        for cam in merged_sample.rig.cameras().iter().skip(original.rig.len()) {
            assert!(cam.intrinsics.is_ghost());
        }
    }
    println!("PASS: criterion 9 - merge pads to 6 cameras, keeps counts, rescales by exact ratios");
}

#[test]
fn criterion_10_cli_subcommands_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let spec = noisy_spec(77, 6, 6, 0.3);
    std::fs::write(path("scene.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let spec_b = SceneSpec {
        dataset_id: "other".into(),
        cameras: (0..2)
            .map(|i| SynthCamera {
                name: if i == 0 {
                    "front".into()
                } else {
                    "rear".into()
                },
                yaw: i as f64 * 3.0,
                ..SynthCamera::front(900.0, 900.0, 1.4)
            })
            .collect(),
        ..noisy_spec(78, 4, 5, 0.3)
    };
    std::fs::write(
        path("scene_b.json"),
        serde_json::to_string(&spec_b).unwrap(),
    )
    .unwrap();

    // each entry: (output files, argv)
    let runs: Vec<(Vec<String>, Vec<String>)> = vec![
        (
            vec![path("m.bhz"), path("d.bhz")],
            vec![
                "gen-synthetic".into(),
                "--spec".into(),
                path("scene.json"),
                "--out-manifest".into(),
                path("m.bhz"),
                "--out-detections".into(),
                path("d.bhz"),
            ],
        ),
        (
            vec![path("mb.bhz")],
            vec![
                "gen-synthetic".into(),
                "--spec".into(),
                path("scene_b.json"),
                "--out-manifest".into(),
                path("mb.bhz"),
            ],
        ),
        (
            vec![path("merged.bhz")],
            vec![
                "merge".into(),
                path("m.bhz"),
                path("mb.bhz"),
                "--out".into(),
                path("merged.bhz"),
            ],
        ),
        (
            vec![path("stats.bhz")],
            vec![
                "pdir-stats".into(),
                path("merged.bhz"),
                "--out".into(),
                path("stats.bhz"),
            ],
        ),
        (
            vec![path("weights.bhz")],
            vec![
                "weights".into(),
                path("stats.bhz"),
                "--out".into(),
                path("weights.bhz"),
            ],
        ),
        (
            vec![path("split_pdir.bhz")],
            vec![
                "split".into(),
                path("merged.bhz"),
                "--strategy".into(),
                "pdir".into(),
                "--out".into(),
                path("split_pdir.bhz"),
            ],
        ),
        (
            vec![path("split_rd.bhz")],
            vec![
                "split".into(),
                path("merged.bhz"),
                "--strategy".into(),
                "rd".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                path("split_rd.bhz"),
            ],
        ),
        (
            vec![path("split_ds.bhz")],
            vec![
                "split".into(),
                path("merged.bhz"),
                "--strategy".into(),
                "ds".into(),
                "--out".into(),
                path("split_ds.bhz"),
            ],
        ),
        (
            vec![path("report.bhz")],
            vec![
                "evaluate".into(),
                "--gt".into(),
                path("m.bhz"),
                "--det".into(),
                path("d.bhz"),
                "--out".into(),
                path("report.bhz"),
            ],
        ),
    ];

    for (outputs, argv) in &runs {
        let mut snapshots: Vec<Vec<Vec<u8>>> = Vec::new();
        for threads in ["1", "3"] {
            for _rerun in 0..2 {
                let mut full: Vec<String> = vec![
                    "bevharmonize".into(),
                    "--quiet".into(),
                    "--threads".into(),
                    threads.into(),
                ];
                full.extend(argv.iter().cloned());
                let code = bevharmonize::cli::run(full);
                assert_eq!(code, 0, "{argv:?} exited {code}");
                snapshots.push(outputs.iter().map(|o| std::fs::read(o).unwrap()).collect());
            }
        }
        for other in &snapshots[1..] {
            assert_eq!(
                &snapshots[0], other,
                "outputs of {argv:?} differ across runs/threads"
            );
        }
    }
    println!("PASS: criterion 10 - all subcommands byte-identical across reruns and thread counts");
}
