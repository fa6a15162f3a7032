//! End-to-end subcommand tests: the full shell pipeline, exit codes, and
//! header/config provenance of every output artifact.

use std::path::{Path, PathBuf};

use bevharmonize::cli::{run, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use bevharmonize::record::FORMAT;
use bevharmonize::synth::{NoiseModel, SceneSpec, ScoreModel, SynthCamera};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write_spec(&self, name: &str, spec: &SceneSpec) -> String {
        std::fs::write(self.path(name), serde_json::to_string(spec).unwrap()).unwrap();
        self.arg(name)
    }
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["bevharmonize", "--quiet"];
    argv.extend(args);
    run(argv)
}

fn read_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn five_cam_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        dataset_id: "waymo_like".into(),
        cameras: (0..5)
            .map(|i| SynthCamera {
                name: if i == 0 {
                    "front".into()
                } else {
                    format!("side_{i}")
                },
                yaw: i as f64,
                ..SynthCamera::front(2000.0, 2000.0, 2.1)
            })
            .collect(),
        ..SceneSpec::flat(seed, 3, 5, NoiseModel::noiseless())
    }
}

fn six_cam_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        dataset_id: "nusc_like".into(),
        cameras: (0..6)
            .map(|i| SynthCamera {
                name: if i == 0 {
                    "front".into()
                } else {
                    format!("cam_{i}")
                },
                yaw: i as f64,
                ..SynthCamera::front(1200.0, 1100.0, 1.5)
            })
            .collect(),
        ..SceneSpec::flat(
            seed,
            4,
            6,
            NoiseModel {
                center_sigma: 0.2,
                size_sigma: 0.03,
                yaw_sigma: 0.05,
                score: ScoreModel::Uniform { lo: 0.3, hi: 1.0 },
            },
        )
    }
}

#[test]
fn full_pipeline_chains_through_all_subcommands() {
    let ws = Workspace::new();
    let spec_a = ws.write_spec("a.json", &six_cam_spec(1));
    let spec_b = ws.write_spec("b.json", &five_cam_spec(2));

    assert_eq!(
        cli(&[
            "gen-synthetic",
            "--spec",
            &spec_a,
            "--out-manifest",
            &ws.arg("a.bhz"),
            "--out-detections",
            &ws.arg("a_det.bhz")
        ]),
        EXIT_OK
    );
    assert_eq!(
        cli(&[
            "gen-synthetic",
            "--spec",
            &spec_b,
            "--out-manifest",
            &ws.arg("b.bhz")
        ]),
        EXIT_OK
    );

    assert_eq!(
        cli(&[
            "merge",
            &ws.arg("a.bhz"),
            &ws.arg("b.bhz"),
            "--out",
            &ws.arg("merged.bhz")
        ]),
        EXIT_OK
    );
    let merged = read_lines(&ws.path("merged.bhz"));
    assert_eq!(merged[0]["format"], FORMAT);
    assert_eq!(merged[0]["config"]["subcommand"], "merge");
    assert_eq!(merged[0]["config"]["width"], 704);
    assert_eq!(merged.len() - 1, 7); // 4 + 3 samples
    for sample in &merged[1..] {
        assert_eq!(sample["cameras"].as_array().unwrap().len(), 6);
    }
    // 5-camera rigs got one ghost appended
    let b_sample = merged[1..]
        .iter()
        .find(|s| s["dataset_id"] == "waymo_like")
        .unwrap();
    let cams = b_sample["cameras"].as_array().unwrap();
    assert_eq!(cams[5]["fx"], 0.0);
    assert_eq!(cams[5]["name"], "ghost_5");

    assert_eq!(
        cli(&[
            "pdir-stats",
            &ws.arg("merged.bhz"),
            "--out",
            &ws.arg("stats.bhz")
        ]),
        EXIT_OK
    );
    let stats = read_lines(&ws.path("stats.bhz"));
    assert_eq!(stats[0]["config"]["subcommand"], "pdir-stats");
    let summary = stats.last().unwrap();
    assert_eq!(summary["n_samples"], 7);
    assert_eq!(summary["n_failed"], 0);
    assert_eq!(summary["histogram"]["counts"].as_array().unwrap().len(), 10);
    // per-sample records sorted by sample id
    let ids: Vec<&str> = stats[1..stats.len() - 1]
        .iter()
        .map(|s| s["sample_id"].as_str().unwrap())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    assert_eq!(
        cli(&[
            "weights",
            &ws.arg("stats.bhz"),
            "--out",
            &ws.arg("weights.bhz")
        ]),
        EXIT_OK
    );
    let weights = read_lines(&ws.path("weights.bhz"));
    let w_records = &weights[1..weights.len() - 1];
    assert_eq!(w_records.len(), 7);
    let sum_w1: f64 = w_records.iter().map(|r| r["w1"].as_f64().unwrap()).sum();
    let sum_w2: f64 = w_records.iter().map(|r| r["w2"].as_f64().unwrap()).sum();
    assert!((sum_w1 - 1.0).abs() < 1e-12);
    assert!((sum_w2 - 1.0).abs() < 1e-12);
    assert!(weights.last().unwrap()["pdir_max"].as_f64().unwrap() > 0.0);

    for strategy in ["pdir", "ds", "rd"] {
        let out = ws.arg(&format!("split_{strategy}.bhz"));
        assert_eq!(
            cli(&[
                "split",
                &ws.arg("merged.bhz"),
                "--strategy",
                strategy,
                "--out",
                &out
            ]),
            EXIT_OK
        );
        let lines = read_lines(Path::new(&out));
        assert_eq!(lines.len() - 1, 7);
        for rec in &lines[1..] {
            assert!(rec["subset"].as_u64().unwrap() < 2);
        }
        if strategy == "ds" {
            // dataset ids sort: nusc_like -> 0, waymo_like -> 1
            for rec in &lines[1..] {
                let expected =
                    u64::from(rec["sample_id"].as_str().unwrap().starts_with("waymo_like"));
                assert_eq!(rec["subset"].as_u64().unwrap(), expected);
            }
        }
    }
}

#[test]
fn evaluate_perfect_detections_reports_unity() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(9, 3, 6, NoiseModel::noiseless()),
    );
    assert_eq!(
        cli(&[
            "gen-synthetic",
            "--spec",
            &spec,
            "--out-manifest",
            &ws.arg("gt.bhz"),
            "--out-detections",
            &ws.arg("det.bhz")
        ]),
        EXIT_OK
    );
    assert_eq!(
        cli(&[
            "evaluate",
            "--gt",
            &ws.arg("gt.bhz"),
            "--det",
            &ws.arg("det.bhz"),
            "--out",
            &ws.arg("report.bhz")
        ]),
        EXIT_OK
    );
    let report = &read_lines(&ws.path("report.bhz"))[1];
    assert_eq!(report["map"], 1.0);
    assert_eq!(report["mnds_plus"], 1.0);
    assert_eq!(report["per_class"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["range_m"], 50.0);
    assert_eq!(
        report["config"]["dist_thresholds"],
        serde_json::json!([0.5, 1.0, 2.0, 4.0])
    );
}

#[test]
fn evaluate_rejects_mismatched_detections() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(3, 2, 3, NoiseModel::noiseless()),
    );
    let other = ws.write_spec(
        "other.json",
        &SceneSpec {
            dataset_id: "other".into(),
            ..SceneSpec::flat(4, 2, 3, NoiseModel::noiseless())
        },
    );
    cli(&[
        "gen-synthetic",
        "--spec",
        &spec,
        "--out-manifest",
        &ws.arg("gt.bhz"),
    ]);
    cli(&[
        "gen-synthetic",
        "--spec",
        &other,
        "--out-manifest",
        &ws.arg("other.bhz"),
        "--out-detections",
        &ws.arg("other_det.bhz"),
    ]);
    // detections reference sample ids from the other manifest
    assert_eq!(
        cli(&[
            "evaluate",
            "--gt",
            &ws.arg("gt.bhz"),
            "--det",
            &ws.arg("other_det.bhz")
        ]),
        EXIT_VALIDATION
    );
}

#[test]
fn category_map_harmonizes_raw_labels() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(5, 2, 4, NoiseModel::noiseless()),
    );
    cli(&[
        "gen-synthetic",
        "--spec",
        &spec,
        "--out-manifest",
        &ws.arg("m.bhz"),
    ]);

    // rewrite raw categories to dataset-specific names
    let mut lines = read_lines(&ws.path("m.bhz"));
    for sample in &mut lines[1..] {
        for bbox in sample["boxes"].as_array_mut().unwrap() {
            let renamed = match bbox["raw_category"].as_str().unwrap() {
                "vehicle" => "Car",
                "two-wheeler" => "Cyclist",
                other => other,
            };
            bbox["raw_category"] = renamed.into();
        }
    }
    let text: String = lines
        .iter()
        .map(|l| serde_json::to_string(l).unwrap() + "\n")
        .collect();
    std::fs::write(ws.path("raw.bhz"), text).unwrap();

    // without a map: unknown category, validation failure
    assert_eq!(
        cli(&["merge", &ws.arg("raw.bhz"), "--out", &ws.arg("out.bhz")]),
        EXIT_VALIDATION
    );

    // with a map: Car -> vehicle, Cyclist -> ignore (dropped)
    let map = serde_json::json!({
        "synthetic": {"Car": "vehicle", "Cyclist": "ignore"},
        "*": {"pedestrian": "pedestrian"}
    });
    std::fs::write(ws.path("map.json"), serde_json::to_string(&map).unwrap()).unwrap();
    assert_eq!(
        cli(&[
            "merge",
            &ws.arg("raw.bhz"),
            "--category-map",
            &ws.arg("map.json"),
            "--out",
            &ws.arg("out.bhz")
        ]),
        EXIT_OK
    );
    let merged = read_lines(&ws.path("out.bhz"));
    let mut categories = std::collections::BTreeSet::new();
    let mut n_boxes = 0;
    for sample in &merged[1..] {
        for bbox in sample["boxes"].as_array().unwrap() {
            categories.insert(bbox["raw_category"].as_str().unwrap().to_string());
            n_boxes += 1;
        }
    }
    assert!(categories.contains("vehicle"));
    assert!(!categories.contains("Car"));
    assert!(!categories.contains("Cyclist")); // ignored boxes dropped
    let original_boxes: usize = lines[1..]
        .iter()
        .map(|s| s["boxes"].as_array().unwrap().len())
        .sum();
    assert!(n_boxes < original_boxes);
}

#[test]
fn exit_codes_cover_usage_validation_and_io() {
    let ws = Workspace::new();
    // usage: unknown flag / missing required
    assert_eq!(cli(&["merge", "--nope"]), EXIT_USAGE);
    assert_eq!(cli(&["split", &ws.arg("x.bhz")]), EXIT_USAGE); // missing --strategy/--out

    // io: nonexistent input
    assert_eq!(
        cli(&["merge", &ws.arg("missing.bhz"), "--out", &ws.arg("out.bhz")]),
        EXIT_IO
    );

    // validation: header with wrong format tag
    std::fs::write(ws.path("bad.bhz"), "{\"format\":\"other/1\"}\n").unwrap();
    assert_eq!(
        cli(&["merge", &ws.arg("bad.bhz"), "--out", &ws.arg("out.bhz")]),
        EXIT_VALIDATION
    );

    // validation: malformed record line is named
    std::fs::write(
        ws.path("mangled.bhz"),
        format!("{{\"format\":\"{FORMAT}\"}}\nnot-json\n"),
    )
    .unwrap();
    assert_eq!(
        cli(&[
            "pdir-stats",
            &ws.arg("mangled.bhz"),
            "--out",
            &ws.arg("out.bhz")
        ]),
        EXIT_VALIDATION
    );
}

#[test]
fn pdir_stats_flags_unmeasurable_samples() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(6, 3, 3, NoiseModel::noiseless()),
    );
    cli(&[
        "gen-synthetic",
        "--spec",
        &spec,
        "--out-manifest",
        &ws.arg("m.bhz"),
    ]);

    // empty one sample's boxes: its pdir becomes uncomputable
    let mut lines = read_lines(&ws.path("m.bhz"));
    lines[1]["boxes"] = serde_json::json!([]);
    let text: String = lines
        .iter()
        .map(|l| serde_json::to_string(l).unwrap() + "\n")
        .collect();
    std::fs::write(ws.path("m.bhz"), text).unwrap();

    assert_eq!(
        cli(&[
            "pdir-stats",
            &ws.arg("m.bhz"),
            "--out",
            &ws.arg("stats.bhz"),
            "--hist-bins",
            "4"
        ]),
        EXIT_OK
    );
    let stats = read_lines(&ws.path("stats.bhz"));
    let summary = stats.last().unwrap();
    assert_eq!(summary["n_failed"], 1);
    assert_eq!(summary["failed"].as_array().unwrap().len(), 1);

    // split still assigns every sample, flagging the failed one
    assert_eq!(
        cli(&[
            "split",
            &ws.arg("m.bhz"),
            "--strategy",
            "pdir",
            "--out",
            &ws.arg("split.bhz")
        ]),
        EXIT_OK
    );
    let split = read_lines(&ws.path("split.bhz"));
    assert_eq!(split.len() - 1, 3);
    let flagged: Vec<_> = split[1..]
        .iter()
        .filter(|r| r["flagged"].as_bool() == Some(true))
        .collect();
    assert_eq!(flagged.len(), 1);
}

#[test]
fn custom_pdir_parameters_are_respected_and_echoed() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(8, 2, 5, NoiseModel::noiseless()),
    );
    cli(&[
        "gen-synthetic",
        "--spec",
        &spec,
        "--out-manifest",
        &ws.arg("m.bhz"),
    ]);

    assert_eq!(
        cli(&[
            "pdir-stats",
            &ws.arg("m.bhz"),
            "--delta-d",
            "20",
            "--d-min",
            "4",
            "--out",
            &ws.arg("stats.bhz")
        ]),
        EXIT_OK
    );
    let stats = read_lines(&ws.path("stats.bhz"));
    assert_eq!(stats[0]["config"]["pdir"]["delta_d"], 20.0);
    let rec = &stats[1];
    assert_eq!(rec["d_min"], 4.0);
    assert_eq!(rec["delta_d"], 20.0);
    // flat ground closed form: fy*h*(1/4 - 1/24)
    let expected = 1000.0 * 1.5 * (1.0 / 4.0 - 1.0 / 24.0);
    let got = rec["pdir"].as_f64().unwrap();
    assert!(
        (got - expected).abs() < 1e-6 * expected,
        "{got} vs {expected}"
    );

    // min-object-depth policy
    assert_eq!(
        cli(&[
            "pdir-stats",
            &ws.arg("m.bhz"),
            "--d-min-policy",
            "min-object-depth",
            "--out",
            &ws.arg("stats2.bhz")
        ]),
        EXIT_OK
    );
    let stats2 = read_lines(&ws.path("stats2.bhz"));
    assert!(stats2[1]["d_min"].as_f64().unwrap() > 0.0);
    assert_ne!(stats2[1]["d_min"], stats[1]["d_min"]);
}

#[test]
fn spawned_binary_matches_in_process_behavior() {
    let ws = Workspace::new();
    let spec = ws.write_spec(
        "scene.json",
        &SceneSpec::flat(2, 2, 4, NoiseModel::noiseless()),
    );
    let bin = env!("CARGO_BIN_EXE_bevharmonize");

    let out = std::process::Command::new(bin)
        .args([
            "--quiet",
            "gen-synthetic",
            "--spec",
            &spec,
            "--out-manifest",
            &ws.arg("m.bhz"),
            "--out-detections",
            &ws.arg("d.bhz"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));

    let eval = std::process::Command::new(bin)
        .args([
            "--quiet",
            "evaluate",
            "--gt",
            &ws.arg("m.bhz"),
            "--det",
            &ws.arg("d.bhz"),
        ])
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(EXIT_OK));
    let stdout = String::from_utf8(eval.stdout).unwrap();
    assert!(stdout.contains("mAP 1.0000"), "stdout: {stdout}");
    assert!(stdout.contains("vehicle"));

    let usage = std::process::Command::new(bin)
        .arg("--definitely-not-a-flag")
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
}
