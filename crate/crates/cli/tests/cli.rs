use std::path::Path;
use std::process::{Command, Output};

use segmetrics::mask::{save_confidence_map, save_label_map};
use segmetrics::synthetic::{random_confidence, random_scenario, ScenarioParams};
use serde_json::Value;

fn segmetrics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmetrics"))
        .args(args)
        .env_remove("SEGMETRICS_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Panels under `dir/gt` and `dir/pred`.
fn panels(dir: &Path) {
    let out = segmetrics(&["panels", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn random_dataset(dir: &Path, n: u64) {
    let p = ScenarioParams::default();
    for sub in ["gt", "pred", "conf"] {
        std::fs::create_dir_all(dir.join(sub)).unwrap();
    }
    for seed in 0..n {
        let (gt, pred) = random_scenario(seed, &p);
        save_label_map(&gt, dir.join(format!("gt/{seed}.png"))).unwrap();
        save_label_map(&pred, dir.join(format!("pred/{seed}.png"))).unwrap();
        save_confidence_map(
            &random_confidence(seed, p.width, p.height),
            dir.join(format!("conf/{seed}.bin")),
        )
        .unwrap();
    }
}

fn image_rom(report: &Value, id: &str) -> f64 {
    let image = report["images"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["image_id"] == id)
        .unwrap();
    let class = image["classes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["class_id"] == 1)
        .unwrap();
    class["regions"]["over"]["rom"].as_f64().unwrap()
}

#[test]
fn panels_evaluate_to_their_rom_values() {
    let dir = tempfile::tempdir().unwrap();
    panels(dir.path());
    let report = dir.path().join("report.json");
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "2",
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["images"].as_array().unwrap().len(), 16);
    assert!((image_rom(&json, "e") - 0.5f64.tanh()).abs() < 1e-12);
    assert!((image_rom(&json, "j") - 0.99).abs() < 0.01);
    assert_eq!(json["config"]["connectivity"], 8);
}

#[test]
fn fail_above_gates_with_status_3_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    panels(dir.path());
    let report = dir.path().join("r.json");
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let base = [
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "2",
        "--out",
        s(&report),
    ];
    let out = segmetrics(&[&base[..], &["--fail-above", "rom=0.1"]].concat());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rom"));
    assert!(report.exists());
    let out = segmetrics(&[&base[..], &["--fail-above", "rom=0.9"]].concat());
    assert_eq!(code(&out), 0);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&segmetrics(&["--help"])), 0);
    assert_eq!(code(&segmetrics(&["--version"])), 0);
    assert_eq!(code(&segmetrics(&["eval", "--classes", "2"])), 1);
    assert_eq!(code(&segmetrics(&["frobnicate"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    // background outside the class range
    let out = segmetrics(&[
        "eval",
        "--gt",
        d,
        "--pred",
        d,
        "--classes",
        "2",
        "--background",
        "5",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 1);
    let out = segmetrics(&[
        "eval",
        "--gt",
        d,
        "--pred",
        d,
        "--classes",
        "2",
        "--sweep",
        "0.5:0.1:0.1",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 3);
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let missing = dir.path().join("nowhere");
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&missing),
        "--pred",
        s(&pred),
        "--classes",
        "4",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 2);
    // labels 1..3 exceed two classes
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "2",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 2);

    std::fs::remove_file(dir.path().join("pred/1.png")).unwrap();
    let args = [
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "4",
        "--out",
        "-",
    ];
    assert_eq!(code(&segmetrics(&args)), 2);
    let out = segmetrics(&[&args[..], &["--skip-unpaired"]].concat());
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["images"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_goes_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 2);
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "4",
        "--format",
        "csv",
        "--metrics",
        "rom,rum,iou",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("schema_version,image_id,class_id"));
    assert!(text.lines().last().unwrap().contains("__overall__"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 12);
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_segmetrics"))
            .args([
                "eval",
                "--gt",
                s(&gt),
                "--pred",
                s(&pred),
                "--classes",
                "4",
                "--out",
                "-",
            ])
            .env("SEGMETRICS_THREADS", threads)
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(code(&run("zero")), 1);
}

#[test]
fn sweep_reads_confidence_maps() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 5);
    let (gt, pred, conf) = (dir.path().join("gt"), dir.path().join("pred"), dir.path().join("conf"));
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--conf",
        s(&conf),
        "--classes",
        "4",
        "--sweep",
        "0:1:0.25",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    let points = json["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    assert_eq!(points[4]["predicted_regions"], 0);

    // a sweep without confidence maps is a data error
    let out = segmetrics(&[
        "eval",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--classes",
        "4",
        "--sweep",
        "0,1",
        "--out",
        "-",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 2);
    let file = dir.path().join("eval.conf");
    std::fs::write(
        &file,
        format!(
            "gt = {}\npred = {}\nclasses = 4\nconnectivity = 4\nmetrics = rom,rum\n",
            s(&dir.path().join("gt")),
            s(&dir.path().join("pred"))
        ),
    )
    .unwrap();
    let out = segmetrics(&["eval", "--config", s(&file), "--out", "-"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["config"]["connectivity"], 4);
    assert_eq!(json["config"]["metrics"], serde_json::json!(["rom", "rum"]));
}

#[test]
fn manifest_input() {
    let dir = tempfile::tempdir().unwrap();
    random_dataset(dir.path(), 2);
    let manifest = dir.path().join("pairs.txt");
    std::fs::write(&manifest, "x gt/0.png pred/0.png\ny gt/1.png pred/1.png\n").unwrap();
    let out = segmetrics(&["eval", "--manifest", s(&manifest), "--classes", "4", "--out", "-"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["images"][1]["image_id"], "y");
}

#[test]
fn oracle_check_passes() {
    let out = segmetrics(&["check", "--seeds", "25"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("25 seeds checked, 0 mismatches"));
}
