mod common;

use std::fs;

use common::{seqslam, stderr, stdout, Fixture};
use seqslam::dataset::{load_ground_truth, load_traverse};
use seqslam::evaluation::optimize_threshold;
use seqslam::export::{decode_matrix, decode_scores, match_set_csv, metrics_csv};
use seqslam::pipeline::{run_pipeline, PipelineParams, ThresholdChoice};
use seqslam::preprocess::PreprocessConfig;
use seqslam::search::SearchConfig;
use seqslam::{RecallDenominator, Target, Traverse64};

fn params(d_s: usize) -> PipelineParams {
    PipelineParams {
        preprocess: PreprocessConfig {
            crop: None,
            target_width: 32,
            target_height: 16,
            patch_size: 8,
        },
        search: SearchConfig {
            d_s,
            ..SearchConfig::default()
        },
        ..PipelineParams::default()
    }
}

fn load(f: &Fixture) -> (Traverse64, Traverse64) {
    (
        load_traverse(&f.path().join("ref"), "*.pgm").unwrap(),
        load_traverse(&f.path().join("query"), "*.pgm").unwrap(),
    )
}

#[test]
fn run_writes_library_results() {
    let f = Fixture::new(40, 2);
    let cfg = f.config("run.cfg", "search.d_s = 5\nselection.lambda = 0.5\n");
    let out = f.path().join("out");
    let o = seqslam(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("f1="));

    let (reference, query) = load(&f);
    let gt = load_ground_truth(&f.path().join("gt.csv"), 40, 40).unwrap();
    let mut p = params(5);
    p.selection.lambda = 0.5;
    let want = run_pipeline(&reference, &query, Some(&gt), &p, ThresholdChoice::Configured).unwrap();
    assert_eq!(
        fs::read_to_string(out.join("matches.csv")).unwrap(),
        match_set_csv(&want.outcome.matches)
    );
    assert_eq!(
        fs::read_to_string(out.join("metrics.csv")).unwrap(),
        metrics_csv(&want.outcome.metrics.unwrap(), 0.5)
    );
    assert!(fs::read_to_string(out.join("pr_curve.csv")).unwrap().starts_with("threshold,precision,recall,f1\n"));
    assert!(fs::read_to_string(out.join("pr_curve.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn run_without_ground_truth_writes_matches_only() {
    let f = Fixture::new(20, 3);
    let text = fs::read_to_string(f.config("x.cfg", "")).unwrap().replace("dataset.ground_truth = gt.csv\n", "");
    let cfg = f.path().join("nogt.cfg");
    fs::write(&cfg, text).unwrap();
    let out = f.path().join("out");
    let o = seqslam(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("matches.csv").exists());
    assert!(!out.join("metrics.csv").exists());

    let o = seqslam(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dataset.ground_truth"));
}

#[test]
fn outputs_identical_across_worker_counts() {
    let f = Fixture::new(40, 4);
    let cfg = f.config("det.cfg", "search.method = hybrid\nsearch.d_s = 6\nselection.method = windowed_uniqueness\nselection.mu = 1.05\n");
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = f.path().join(format!("out{workers}"));
        let o = seqslam(&["run", "--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(
            ["matches.csv", "metrics.csv", "pr_curve.csv"]
                .map(|name| fs::read(out.join(name)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn optimize_prints_optimizer_result() {
    let f = Fixture::new(40, 5);
    let cfg = f.config("opt.cfg", "search.d_s = 4\n");
    let o = seqslam(&["optimize", "--config", cfg.to_str().unwrap(), "--target", "f1"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let (reference, query) = load(&f);
    let gt = load_ground_truth(&f.path().join("gt.csv"), 40, 40).unwrap();
    let p = params(4);
    let out = run_pipeline(&reference, &query, Some(&gt), &p, ThresholdChoice::Configured).unwrap();
    let (threshold, m) = optimize_threshold(
        &out.proposals,
        &out.scores,
        &gt,
        &p.selection,
        Target::F1,
        RecallDenominator::Eligible,
    )
    .unwrap();
    let text = stdout(&o);
    assert!(text.contains(&format!("threshold={threshold} ")), "{text}");
    assert!(text.contains(&format!("f1={} ", m.f1)), "{text}");
}

#[test]
fn sweep_writes_rows_and_provenance() {
    let f = Fixture::new(24, 6);
    let cfg = f.config("sweep.cfg", "sweep.axis = seq_length\nsweep.values = 2:6:2\n");
    let out = f.path().join("sweep");
    let o = seqslam(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis,value,method,precision,recall,f1,seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("seq_length,2,trajectory,"));
    let provenance = fs::read_to_string(out.join("provenance.json")).unwrap();
    assert!(provenance.contains("reference_hash"));
}

#[test]
fn sweep_without_axis_names_the_key() {
    let f = Fixture::new(10, 7);
    let cfg = f.config("noaxis.cfg", "sweep.values = 2,3\n");
    let o = seqslam(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("sweep.axis"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn invalid_sweep_value_is_reported() {
    let f = Fixture::new(10, 7);
    let cfg = f.config("bad.cfg", "sweep.axis = norm_width\nsweep.values = 1,2\n");
    let o = seqslam(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("norm_width value 1"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_nonzero_on_one_line() {
    let f = Fixture::new(10, 8);
    for (extra, needle) in [
        ("search.v_min = 1.2\nsearch.v_max = 0.8\n", "v_min > v_max"),
        ("enhance.r_norm = 1\n", "minimum 2"),
        ("search.colour = red\n", "search.colour: unknown key"),
    ] {
        let cfg = f.config("bad.cfg", extra);
        let o = seqslam(&["run", "--config", cfg.to_str().unwrap()]);
        assert!(!o.status.success());
        let err = stderr(&o);
        assert!(err.starts_with("error: config: "), "{err}");
        assert!(err.contains(needle), "{err}");
        assert_eq!(err.trim_end().lines().count(), 1);
        assert!(stdout(&o).is_empty());
    }
    let o = seqslam(&["run"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn missing_dataset_fails_cleanly() {
    let f = Fixture::new(10, 9);
    let cfg = f.path().join("missing.cfg");
    fs::write(&cfg, "dataset.reference_dir = nowhere\ndataset.query_dir = query\n").unwrap();
    let o = seqslam(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: pipeline: "), "{}", stderr(&o));
}

#[test]
fn export_matrix_round_trips() {
    let f = Fixture::new(20, 10);
    let cfg = f.config("exp.cfg", "search.d_s = 4\nsearch.method = cone\n");
    let out = f.path().join("mats");
    let o = seqslam(&["export-matrix", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let (reference, query) = load(&f);
    let mut p = params(4);
    p.search.method = seqslam::search::SearchMethod::Cone;
    let want = run_pipeline(&reference, &query, None, &p, ThresholdChoice::Configured).unwrap();
    assert_eq!(&decode_matrix(&fs::read(out.join("raw.ssm")).unwrap()).unwrap(), want.difference.grid());
    assert_eq!(&decode_matrix(&fs::read(out.join("enhanced.ssm")).unwrap()).unwrap(), want.enhanced.grid());
    assert_eq!(decode_scores(&fs::read(out.join("scores.ssm")).unwrap()).unwrap(), want.scores);
}
