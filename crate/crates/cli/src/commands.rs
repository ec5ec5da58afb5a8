//! Subcommand implementations. Each returns the text printed on success.

use std::net::SocketAddr;
use std::path::Path;

use seqslam::dataset::{load_ground_truth, load_traverse, subsample};
use seqslam::diffmatrix::enhance_matrix;
use seqslam::export::{encode_matrix, encode_scores, match_set_csv, metrics_csv, pr_curve_csv, pr_curve_svg, write_atomic};
use seqslam::pipeline::{prepare, run_pipeline, ThresholdChoice};
use seqslam::search::{search, SearchMethod};
use seqslam::sweep::{run_sweep, SweepSpec};
use seqslam::{GroundTruth, Metrics, Target, Traverse64};
use seqslam_service::{Artifacts, Session};

use crate::config::PipelineConfig;
use crate::CliError;

pub struct Inputs {
    pub reference: Traverse64,
    pub query: Traverse64,
    pub ground_truth: Option<GroundTruth>,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, CliError> {
    let d = &cfg.dataset;
    let reference = subsample(&load_traverse(&d.reference_dir, &d.reference_pattern)?, d.reference_step)?;
    let query = subsample(&load_traverse(&d.query_dir, &d.query_pattern)?, d.query_step)?;
    log::info!("loaded {} reference and {} query frames", reference.len(), query.len());
    let ground_truth = match &d.ground_truth {
        Some(path) => {
            let gt = load_ground_truth(path, query.len(), reference.len())?;
            Some(match cfg.tolerance {
                Some(t) => gt.with_tolerance(t),
                None => gt,
            })
        }
        None => None,
    };
    Ok(Inputs {
        reference,
        query,
        ground_truth,
    })
}

fn require_ground_truth<'a>(inputs: &'a Inputs, command: &str) -> Result<&'a GroundTruth, CliError> {
    inputs
        .ground_truth
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("`{command}` needs ground truth: missing key dataset.ground_truth")))
}

fn describe(m: &Metrics) -> String {
    format!(
        "precision={} recall={} f1={} tp={} fp={} eligible={}",
        m.precision, m.recall, m.f1, m.true_positives, m.false_positives, m.eligible_count
    )
}

/// Full pipeline at the configured threshold; writes `matches.csv` and,
/// with ground truth, `metrics.csv` and `pr_curve.{csv,svg}`.
pub fn run(cfg: &PipelineConfig, out: &Path) -> Result<String, CliError> {
    let inputs = load_inputs(cfg)?;
    let result = run_pipeline(
        &inputs.reference,
        &inputs.query,
        inputs.ground_truth.as_ref(),
        &cfg.params,
        ThresholdChoice::Configured,
    )?;
    let o = &result.outcome;
    write_atomic(&out.join("matches.csv"), match_set_csv(&o.matches).as_bytes())?;
    let mut summary = format!(
        "accepted {} of {} proposals at threshold {}",
        o.matches.accepted_count(),
        o.matches.proposals.len(),
        o.threshold
    );
    if let (Some(m), Some(curve)) = (&o.metrics, &o.curve) {
        write_atomic(&out.join("metrics.csv"), metrics_csv(m, o.threshold).as_bytes())?;
        write_atomic(&out.join("pr_curve.csv"), pr_curve_csv(curve).as_bytes())?;
        write_atomic(&out.join("pr_curve.svg"), pr_curve_svg(curve).as_bytes())?;
        summary.push(' ');
        summary.push_str(&describe(m));
    }
    Ok(summary)
}

/// Threshold maximising `target`, with the metrics it achieves.
pub fn optimize(cfg: &PipelineConfig, target: Target) -> Result<String, CliError> {
    let inputs = load_inputs(cfg)?;
    require_ground_truth(&inputs, "optimize")?;
    let result = run_pipeline(
        &inputs.reference,
        &inputs.query,
        inputs.ground_truth.as_ref(),
        &cfg.params,
        ThresholdChoice::Optimize(target),
    )?;
    let o = &result.outcome;
    let m = o.metrics.as_ref().expect("ground truth supplied");
    Ok(format!(
        "method={} target={target} threshold={} {}",
        cfg.params.selection.method,
        o.threshold,
        describe(m)
    ))
}

/// Writes `sweep.csv` and `provenance.json`.
pub fn sweep(cfg: &PipelineConfig, target: Option<Target>, out: &Path) -> Result<String, CliError> {
    let axis = cfg
        .sweep
        .axis
        .ok_or_else(|| CliError::Usage("missing key sweep.axis".into()))?;
    let values = cfg
        .sweep
        .values
        .clone()
        .ok_or_else(|| CliError::Usage("missing key sweep.values".into()))?;
    let spec = SweepSpec {
        base: cfg.params.clone(),
        axis,
        values,
        optimize_target: target.unwrap_or(cfg.sweep.target),
        threshold_scale: cfg.sweep.threshold_scale,
    };
    // validate before loading images
    spec.points(usize::MAX)?;
    let inputs = load_inputs(cfg)?;
    let gt = require_ground_truth(&inputs, "sweep")?;
    let result = run_sweep(&spec, &inputs.reference, &inputs.query, gt)?;
    write_atomic(&out.join("sweep.csv"), result.to_csv().as_bytes())?;
    write_atomic(&out.join("provenance.json"), result.provenance_json().as_bytes())?;
    Ok(format!("{} sweep rows over {axis} written to {}", result.rows.len(), out.display()))
}

/// Writes `raw.ssm`, `enhanced.ssm` and `scores.ssm`.
pub fn export_matrix(cfg: &PipelineConfig, out: &Path) -> Result<String, CliError> {
    let inputs = load_inputs(cfg)?;
    cfg.params.validate()?;
    let prepared = prepare(&inputs.reference, &inputs.query, &cfg.params.preprocess)?;
    let enhanced = enhance_matrix(&prepared.difference, cfg.params.r_norm)?;
    let scores = search(&prepared.difference, &enhanced, &cfg.params.search)?;
    write_atomic(&out.join("raw.ssm"), &encode_matrix(prepared.difference.grid()))?;
    write_atomic(&out.join("enhanced.ssm"), &encode_matrix(enhanced.grid()))?;
    write_atomic(&out.join("scores.ssm"), &encode_scores(&scores))?;
    Ok(format!(
        "wrote {}x{} matrices to {}",
        scores.n(),
        scores.m(),
        out.display()
    ))
}

/// Builds the session and serves it until interrupted.
pub fn serve(cfg: &PipelineConfig, port: u16, all_methods: bool) -> Result<String, CliError> {
    let inputs = load_inputs(cfg)?;
    let methods: Vec<SearchMethod> = if all_methods {
        SearchMethod::ALL.to_vec()
    } else {
        vec![cfg.params.search.method]
    };
    let id = inputs.reference.content_hash()[..12].to_string();
    let artifacts = Artifacts::compute(
        inputs.reference,
        inputs.query,
        inputs.ground_truth,
        cfg.params.clone(),
        &methods,
    )?;
    let session = Session::new(id, artifacts)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(seqslam_service::serve(addr, session))?;
    Ok("server stopped".into())
}
