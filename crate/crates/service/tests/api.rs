use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seqslam::pipeline::{select_and_evaluate, PipelineParams, ThresholdChoice};
use seqslam::preprocess::PreprocessConfig;
use seqslam::search::{SearchConfig, SearchMethod};
use seqslam::synthetic::SyntheticRoute;
use seqslam::{GroundTruth, Grid, SelectionConfig, Traverse};
use seqslam_service::{block_means, router, Artifacts, Registry, Session};

fn params(d_s: usize) -> PipelineParams {
    PipelineParams {
        preprocess: PreprocessConfig {
            crop: None,
            target_width: 16,
            target_height: 8,
            patch_size: 4,
        },
        r_norm: 6,
        search: SearchConfig {
            d_s,
            ..SearchConfig::default()
        },
        ..PipelineParams::default()
    }
}

fn session(methods: &[SearchMethod], with_gt: bool) -> Session {
    let (reference, query) = SyntheticRoute {
        frames: 40,
        ..SyntheticRoute::default()
    }
    .generate::<f64>(11);
    let gt = with_gt.then(|| GroundTruth::identity(40, 40, 1));
    let artifacts = Artifacts::compute(reference, query, gt, params(4), methods).unwrap();
    Session::new("test", artifacts).unwrap()
}

fn build(s: Session) -> (Router, Arc<Registry>) {
    let registry = Arc::new(Registry::single(s));
    (router(registry.clone()), registry)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, body) = call(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

fn accepted_queries(v: &Value) -> Vec<u64> {
    let m = &v["matches"];
    m["proposals"]
        .as_array()
        .unwrap()
        .iter()
        .zip(m["accepted"].as_array().unwrap())
        .filter(|(_, a)| a.as_bool().unwrap())
        .map(|(p, _)| p["query"].as_u64().unwrap())
        .collect()
}

#[tokio::test]
async fn session_describes_artifacts() {
    let (app, _) = build(session(&[SearchMethod::Trajectory], true));
    let (status, v) = get_json(&app, "/api/session").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["id"], "test");
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(40), Some(40)));
    assert_eq!(v["computed_methods"], json!(["trajectory"]));
    assert_eq!(v["tolerance"], 1);

    let (status, v) = get_json(&app, "/api/session?session=nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");
    assert!(v["detail"].as_str().unwrap().contains("nope"));
}

/// Independent averaging: accumulate every cell into its block.
fn averaging_oracle(grid: &Grid<f64>, valid: Option<&Grid<bool>>, k: usize) -> Vec<Option<f64>> {
    let (rows, cols) = (grid.rows().div_ceil(k), grid.cols().div_ceil(k));
    let mut sums = vec![0.0; rows * cols];
    let mut counts = vec![0usize; rows * cols];
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if valid.is_none_or(|v| v.get(r, c)) {
                sums[(r / k) * cols + c / k] += grid.get(r, c);
                counts[(r / k) * cols + c / k] += 1;
            }
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { None } else { Some(s / n as f64) })
        .collect()
}

fn values(v: &Value) -> Vec<Option<f64>> {
    v["values"].as_array().unwrap().iter().map(Value::as_f64).collect()
}

#[tokio::test]
async fn matrix_payloads_match_artifacts() {
    let s = session(&[SearchMethod::Trajectory, SearchMethod::Cone], true);
    let difference = s.artifacts.difference.grid().clone();
    let scores = s.artifacts.methods[0].scores.clone();
    let (app, _) = build(s);

    let (status, v) = get_json(&app, "/api/matrix?kind=raw&downsample=1").await;
    assert_eq!(status, StatusCode::OK);
    let exact: Vec<Option<f64>> = difference.as_slice().iter().map(|&x| Some(x)).collect();
    assert_eq!(values(&v), exact);

    for k in [2, 3, 7] {
        let (_, v) = get_json(&app, &format!("/api/matrix?kind=raw&downsample={k}")).await;
        let got = values(&v);
        let want = averaging_oracle(&difference, None, k);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g.unwrap() - w.unwrap()).abs() < 1e-9);
        }

        let (_, v) = get_json(&app, &format!("/api/matrix?kind=scores&method=trajectory&downsample={k}")).await;
        assert_eq!(v["orientation"], "lower_is_better");
        let want = averaging_oracle(scores.scores(), Some(scores.valid()), k);
        for (g, w) in values(&v).iter().zip(&want) {
            match (g, w) {
                (Some(g), Some(w)) => assert!((g - w).abs() < 1e-9),
                (g, w) => assert_eq!(g, w),
            }
        }
    }

    // invalid score cells are null at full resolution
    let (_, v) = get_json(&app, "/api/matrix?kind=scores&method=trajectory").await;
    let nulls = values(&v).iter().filter(|x| x.is_none()).count();
    let invalid = scores.valid().as_slice().iter().filter(|&&ok| !ok).count();
    assert_eq!(nulls, invalid);
    assert!(invalid > 0);

    let (status, v) = get_json(&app, "/api/matrix?kind=scores&method=hybrid").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "not_computed");

    let (status, v) = get_json(&app, "/api/matrix?kind=bogus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
}

#[test]
fn block_means_on_four_by_four() {
    let g = Grid::from_vec(4, 4, (0..16).map(f64::from).collect());
    let (rows, cols, v) = block_means(&g, None, 2);
    assert_eq!((rows, cols), (2, 2));
    assert_eq!(v, vec![Some(2.5), Some(4.5), Some(10.5), Some(12.5)]);
}

#[tokio::test]
async fn reselect_is_deterministic_monotone_and_leaves_artifacts() {
    let (app, registry) = build(session(&[SearchMethod::Trajectory], true));
    let before = registry.session(None).unwrap().artifacts.digest();

    let tight = json!({"method": "score_threshold", "lambda": 0.8});
    let (status, a) = post_json(&app, "/api/reselect", tight.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = post_json(&app, "/api/reselect", tight).await;
    assert_eq!(a["matches"], b["matches"]);
    assert_eq!(a["metrics"], b["metrics"]);

    let (_, loose) = post_json(&app, "/api/reselect", json!({"lambda": 0.2})).await;
    let kept = accepted_queries(&loose);
    assert!(accepted_queries(&a).iter().all(|q| kept.contains(q)));

    let (_, u) = post_json(&app, "/api/reselect", json!({"method": "windowed_uniqueness", "mu": 1.1, "r_window": 3})).await;
    assert_eq!(u["selection"]["method"], "windowed_uniqueness");
    assert!(u["matches"]["proposals"][5]["uniqueness"].is_number());

    let (_, s) = get_json(&app, "/api/session").await;
    assert_eq!(s["selection"]["mu"], 1.1);
    assert_eq!(registry.session(None).unwrap().artifacts.digest(), before);
    assert_eq!(s["artifact_digest"], before.as_str());

    let (status, v) = post_json(&app, "/api/reselect", json!({"mu": 0.5})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "invalid_selection");
    let (status, _) = post_json(&app, "/api/reselect", json!({"search_method": "cone"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn reselect_agrees_with_library_pipeline() {
    let s = session(&[SearchMethod::Trajectory], true);
    let m = s.artifacts.methods[0].clone();
    let gt = s.artifacts.ground_truth.clone().unwrap();
    let (app, _) = build(s);
    for lambda in [0.0, 0.5, 1.5] {
        let selection = SelectionConfig {
            lambda,
            ..SelectionConfig::default()
        };
        let want = select_and_evaluate(
            &m.proposals,
            &m.scores,
            Some(&gt),
            &selection,
            Default::default(),
            ThresholdChoice::Configured,
        )
        .unwrap();
        let (_, v) = post_json(&app, "/api/reselect", json!({"lambda": lambda})).await;
        assert_eq!(v["metrics"], serde_json::to_value(want.metrics.unwrap()).unwrap());
        assert_eq!(v["matches"], serde_json::to_value(&want.matches).unwrap());
    }
}

#[tokio::test]
async fn match_detail_cells_sum_to_score() {
    let (app, _) = build(session(&[SearchMethod::Trajectory, SearchMethod::Hybrid, SearchMethod::Cone], true));
    for method in ["trajectory", "hybrid"] {
        for q in [2, 10, 25, 37] {
            let (status, v) = get_json(&app, &format!("/api/match/{q}?context=1&method={method}")).await;
            assert_eq!(status, StatusCode::OK);
            let cells = v["cells"].as_array().unwrap();
            assert_eq!(cells.len(), 4, "{method} q={q}");
            let sum: f64 = cells.iter().map(|c| c["enhanced"].as_f64().unwrap()).sum();
            let score = v["proposal"]["score"].as_f64().unwrap();
            assert!((sum - score).abs() < 1e-9, "{sum} vs {score}");
            assert!(cells.iter().any(|c| c["query"] == q));
            assert_eq!(v["images"]["query"].as_array().unwrap().len(), 3);
            assert!(v["proposal"]["accepted"].is_boolean());
        }
    }

    // cone proposals have no trajectory
    let (_, v) = get_json(&app, "/api/match/10?method=cone").await;
    assert!(v["proposal"].is_object());
    assert!(v["cells"].as_array().unwrap().is_empty());

    // with d_s = 4 the first two queries have no full sequence
    let (status, v) = get_json(&app, "/api/match/0").await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["proposal"].is_null());
    assert!(v["images"]["reference"].as_array().unwrap().is_empty());

    let (status, v) = get_json(&app, "/api/match/40").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "query_out_of_range");
}

#[tokio::test]
async fn pr_curve_needs_ground_truth() {
    let (app, _) = build(session(&[SearchMethod::Trajectory], true));
    let (status, v) = get_json(&app, "/api/pr-curve?method=windowed_uniqueness").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["method"], "windowed_uniqueness");
    let points = v["points"].as_array().unwrap();
    assert!(points.len() >= 2);
    assert_eq!(points.last().unwrap()["reject_all"], true);

    let (app, _) = build(session(&[SearchMethod::Trajectory], false));
    let (status, v) = get_json(&app, "/api/pr-curve").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "no_ground_truth");
    let (_, v) = post_json(&app, "/api/reselect", json!({"lambda": 1.0})).await;
    assert!(v["metrics"].is_null());
}

#[tokio::test]
async fn images_are_png() {
    let (app, _) = build(session(&[SearchMethod::Trajectory], true));
    let (status, body) = call(
        &app,
        Request::get("/api/image?traverse=query&index=3").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&body[..8], b"\x89PNG\r\n\x1a\n");
    let (status, _) = get_json(&app, "/api/image?traverse=reference&index=40").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get_json(&app, "/api/image?traverse=other&index=0").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn concurrent_reselects_never_mix_state() {
    let (app, registry) = build(session(&[SearchMethod::Trajectory], true));
    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let lambda = i as f64 / 8.0;
            post_json(&app, "/api/reselect", json!({"lambda": lambda})).await
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let s = registry.session(None).unwrap();
    let current = s.selection();
    let m = &s.artifacts.methods[0];
    let recomputed = seqslam::matching::select(&m.proposals, &m.scores, &current.config).unwrap();
    assert_eq!(current.matches, recomputed);
}

#[tokio::test]
async fn reselect_latency_at_five_thousand_queries() {
    let (reference, query) = SyntheticRoute {
        frames: 5000,
        width: 8,
        height: 4,
        ..SyntheticRoute::default()
    }
    .generate::<f64>(5);
    let reference = Traverse::new(reference.images()[..20].to_vec(), reference.ids()[..20].to_vec()).unwrap();
    let mut p = params(4);
    p.preprocess = PreprocessConfig {
        crop: None,
        target_width: 8,
        target_height: 4,
        patch_size: 4,
    };
    let artifacts = Artifacts::compute(reference, query, Some(GroundTruth::identity(5000, 20, 1)), p, &[SearchMethod::Trajectory]).unwrap();
    assert!(artifacts.methods[0].proposals.len() >= 4990);
    let (app, _) = build(Session::new("big", artifacts).unwrap());
    for body in [
        json!({"method": "score_threshold", "lambda": 0.5}),
        json!({"method": "windowed_uniqueness", "mu": 1.2, "r_window": 3}),
    ] {
        let started = Instant::now();
        let (status, _) = post_json(&app, "/api/reselect", body).await;
        let elapsed = started.elapsed();
        assert_eq!(status, StatusCode::OK);
        assert!(elapsed.as_millis() < 200, "reselect took {elapsed:?}");
    }
}

#[test]
fn session_needs_a_computed_method() {
    let (reference, query) = SyntheticRoute {
        frames: 10,
        ..SyntheticRoute::default()
    }
    .generate::<f64>(1);
    let artifacts = Artifacts::compute(reference, query, None, params(4), &[]).unwrap();
    assert!(Session::new("empty", artifacts).is_err());
}
