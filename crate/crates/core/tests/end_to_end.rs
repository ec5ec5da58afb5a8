use std::time::Instant;

use seqslam::pipeline::{run_pipeline, PipelineParams, ThresholdChoice};
use seqslam::preprocess::PreprocessConfig;
use seqslam::search::SearchConfig;
use seqslam::sweep::{run_point, run_sweep, SweepAxis, SweepSpec, ThresholdScale};
use seqslam::synthetic::SyntheticRoute;
use seqslam::{GroundTruth, Target};

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

#[test]
fn sweep_rows_equal_uncached_runs() {
    let (reference, query) = SyntheticRoute {
        frames: 30,
        ..SyntheticRoute::default()
    }
    .generate::<f64>(21);
    let gt = GroundTruth::identity(30, 30, 1);
    let axes = [
        (SweepAxis::NormWidth, vec![2.0, 5.0, 10.0, 30.0], ThresholdScale::Relative),
        (SweepAxis::SeqLength, vec![2.0, 3.0, 6.0], ThresholdScale::Relative),
        (SweepAxis::SearchMethodThreshold, vec![0.0, 0.4, 1.0], ThresholdScale::Relative),
        (SweepAxis::SelectionMethodThreshold, vec![0.0, 0.25, 0.9], ThresholdScale::Relative),
        (SweepAxis::SelectionMethodThreshold, vec![1.0, 1.3], ThresholdScale::Absolute),
    ];
    for (axis, values, threshold_scale) in axes {
        let spec = SweepSpec {
            base: params(4),
            axis,
            values,
            optimize_target: Target::F1,
            threshold_scale,
        };
        let result = run_sweep(&spec, &reference, &query, &gt).unwrap();
        let points = spec.points(30).unwrap();
        assert_eq!(result.rows.len(), points.len());
        let methods = match axis {
            SweepAxis::SearchMethodThreshold => 3,
            SweepAxis::SelectionMethodThreshold => 2,
            _ => 1,
        };
        assert_eq!(result.rows.len(), spec.values.len() * methods);
        for (row, point) in result.rows.iter().zip(&points) {
            let (threshold, metrics) = run_point(point, &reference, &query, &gt).unwrap();
            assert_eq!((row.value, &row.method), (point.value, &point.method));
            assert_eq!(row.threshold.to_bits(), threshold.to_bits(), "{axis} {} {}", row.value, row.method);
            assert_eq!(row.metrics, metrics, "{axis} {} {}", row.value, row.method);
        }
    }
}

#[test]
fn sweep_rejects_values_outside_the_axis() {
    let (reference, query) = SyntheticRoute {
        frames: 12,
        ..SyntheticRoute::default()
    }
    .generate::<f64>(2);
    let gt = GroundTruth::identity(12, 12, 1);
    let spec = |axis, values| SweepSpec {
        base: params(3),
        axis,
        values,
        optimize_target: Target::F1,
        threshold_scale: ThresholdScale::Relative,
    };
    for (axis, values) in [
        (SweepAxis::NormWidth, vec![1.0]),
        (SweepAxis::NormWidth, vec![13.0]),
        (SweepAxis::SeqLength, vec![2.5]),
        (SweepAxis::SearchMethodThreshold, vec![1.5]),
        (SweepAxis::SeqLength, vec![]),
    ] {
        assert!(run_sweep(&spec(axis, values.clone()), &reference, &query, &gt).is_err(), "{axis} {values:?}");
    }
    let single = run_sweep(&spec(SweepAxis::NormWidth, vec![12.0]), &reference, &query, &gt).unwrap();
    assert_eq!(single.rows.len(), 1);
}

#[test]
fn longer_sequences_match_better_on_noisy_route() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let started = Instant::now();
    let (reference, query) = SyntheticRoute::default().generate::<f64>(0);
    let gt = GroundTruth::identity(200, 200, 1);
    let f1 = |d_s| {
        pool.install(|| run_pipeline(&reference, &query, Some(&gt), &params(d_s), ThresholdChoice::Optimize(Target::F1)))
            .unwrap()
            .outcome
            .metrics
            .unwrap()
            .f1
    };
    let (short, long) = (f1(2), f1(10));
    assert!(long >= 0.90, "f1 at d_s = 10 is {long}");
    assert!(long - short >= 0.10, "f1 {short} -> {long}");
    assert!(started.elapsed().as_secs() < 60);
}
