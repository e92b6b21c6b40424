//! File-based evaluation: pairing, manifests, sweeps and report round trips.

use std::fs;
use std::path::Path;

use segmetrics::harness::{
    evaluate_dataset, evaluate_images, pair_directories, parse_report_json, read_manifest, render_report, render_sweep,
    sweep_confidence, EvalConfig, ImageInput, ReportFormat, CLASS_MEAN_ROW, OVERALL_ROW,
};
use segmetrics::mask::{save_confidence_map, save_label_map};
use segmetrics::synthetic::{random_confidence, random_scenario, ScenarioParams};
use segmetrics::Error;

fn write_pairs(dir: &Path, seeds: std::ops::Range<u64>, with_conf: bool) {
    let p = ScenarioParams::default();
    for sub in ["gt", "pred", "conf"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
    }
    for seed in seeds {
        let (gt, pred) = random_scenario(seed, &p);
        save_label_map(&gt, dir.join(format!("gt/s{seed:03}.png"))).unwrap();
        save_label_map(&pred, dir.join(format!("pred/s{seed:03}.png"))).unwrap();
        if with_conf {
            let conf = random_confidence(seed, p.width, p.height);
            save_confidence_map(&conf, dir.join(format!("conf/s{seed:03}.bin"))).unwrap();
        }
    }
}

#[test]
fn file_and_memory_evaluation_agree() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 0..6, false);
    let pairs = pair_directories(&dir.path().join("gt"), &dir.path().join("pred"), None, false).unwrap();
    assert_eq!(pairs.len(), 6);
    let from_files = evaluate_dataset(&pairs, &EvalConfig::new(4)).unwrap();

    let p = ScenarioParams::default();
    let images: Vec<ImageInput> = (0..6)
        .map(|seed| {
            let (gt, pred) = random_scenario(seed, &p);
            ImageInput {
                image_id: format!("s{seed:03}"),
                gt,
                pred,
                conf: None,
            }
        })
        .collect();
    let in_memory = evaluate_images(&images, &EvalConfig::new(4)).unwrap();
    assert_eq!(from_files, in_memory);
}

#[test]
fn unpaired_files_fail_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 0..3, false);
    fs::remove_file(dir.path().join("pred/s001.png")).unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    assert!(matches!(
        pair_directories(&gt, &pred, None, false),
        Err(Error::Unpaired(_))
    ));
    let kept = pair_directories(&gt, &pred, None, true).unwrap();
    let ids: Vec<_> = kept.iter().map(|p| p.image_id.as_str()).collect();
    assert_eq!(ids, ["s000", "s002"]);
}

#[test]
fn manifest_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 0..2, true);
    let manifest = dir.path().join("list.txt");
    fs::write(
        &manifest,
        "# id gt pred conf\nb gt/s001.png pred/s001.png conf/s001.bin\na gt/s000.png pred/s000.png\n",
    )
    .unwrap();
    let pairs = read_manifest(&manifest).unwrap();
    assert_eq!(pairs.len(), 2);
    // sorted by id
    assert_eq!(pairs[0].gt, dir.path().join("gt/s000.png"));
    assert!(pairs[0].conf.is_none() && pairs[1].conf.is_some());
    let report = evaluate_dataset(&pairs, &EvalConfig::new(4)).unwrap();
    let ids: Vec<_> = report.images.iter().map(|i| i.image_id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 10..14, false);
    let pairs = pair_directories(&dir.path().join("gt"), &dir.path().join("pred"), None, false).unwrap();
    let report = evaluate_dataset(&pairs, &EvalConfig::new(4)).unwrap();
    let text = render_report(&report, ReportFormat::Json).unwrap();
    assert_eq!(parse_report_json(&text).unwrap(), report);
}

#[test]
fn csv_report_ends_with_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 20..23, false);
    let pairs = pair_directories(&dir.path().join("gt"), &dir.path().join("pred"), None, false).unwrap();
    let report = evaluate_dataset(&pairs, &EvalConfig::new(4)).unwrap();
    let csv = render_report(&report, ReportFormat::Csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
    assert!(lines.last().unwrap().contains(OVERALL_ROW));
    assert!(lines.iter().any(|l| l.contains(CLASS_MEAN_ROW)));
}

#[test]
fn sweep_drops_regions_as_threshold_rises() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs(dir.path(), 30..38, true);
    let pairs = pair_directories(
        &dir.path().join("gt"),
        &dir.path().join("pred"),
        Some(&dir.path().join("conf")),
        false,
    )
    .unwrap();
    let mut cfg = EvalConfig::new(4);
    cfg.sweep = Some(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let (sweep, reports) = sweep_confidence(&pairs, &cfg).unwrap();
    assert_eq!(reports.len(), 5);
    let counts: Vec<u64> = sweep.points.iter().map(|p| p.predicted_regions).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert!(counts[0] > counts[4]);
    // threshold 0 keeps every region, matching an unfiltered run
    let plain = evaluate_dataset(&pairs, &EvalConfig::new(4)).unwrap();
    assert_eq!(reports[0].images, plain.images);
    let csv = render_sweep(&sweep, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 6);
}
