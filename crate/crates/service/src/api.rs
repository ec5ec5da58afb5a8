//! HTTP routes. Every handler reads immutable artifacts; only
//! `POST /api/reselect` touches the session's selection.

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use seqslam::evaluation::pr_curve;
use seqslam::matching::select;
use seqslam::search::{best_trajectory, Orientation, SearchMethod};
use seqslam::{Grid, MatchSet64, Metrics, SelectionConfig, SelectionMethod, Traverse64};

use crate::session::{ReselectError, Selection, Session};

/// Largest matrix payload served, in cells.
pub const MAX_CELLS: usize = 4_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub detail: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            error,
            detail: detail.into(),
        }
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    fn not_computed(method: SearchMethod) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "not_computed",
            format!("scores for search method `{method}` were not computed in this session"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Sessions served by one process; requests without a `session` parameter
/// go to the default one.
#[derive(Debug)]
pub struct Registry {
    sessions: HashMap<String, Arc<Session>>,
    default_id: String,
}

impl Registry {
    pub fn single(session: Session) -> Self {
        let default_id = session.id.clone();
        let mut sessions = HashMap::new();
        sessions.insert(default_id.clone(), Arc::new(session));
        Self { sessions, default_id }
    }

    pub fn session(&self, id: Option<&str>) -> ApiResult<Arc<Session>> {
        let id = id.unwrap_or(&self.default_id);
        self.sessions.get(id).cloned().ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
        })
    }
}

pub type AppState = Arc<Registry>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", get(get_session))
        .route("/api/matrix", get(get_matrix))
        .route("/api/reselect", post(post_reselect))
        .route("/api/pr-curve", get(get_pr_curve))
        .route("/api/match/{query}", get(get_match))
        .route("/api/image", get(get_image))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

#[derive(Debug, Serialize)]
struct TraverseInfo {
    count: usize,
    ids: Vec<String>,
}

impl TraverseInfo {
    fn of(t: &Traverse64) -> Self {
        Self {
            count: t.len(),
            ids: t.ids().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SessionInfo {
    id: String,
    reference: TraverseInfo,
    query: TraverseInfo,
    rows: usize,
    cols: usize,
    r_norm: usize,
    d_s: usize,
    computed_methods: Vec<SearchMethod>,
    has_ground_truth: bool,
    tolerance: Option<usize>,
    search_method: SearchMethod,
    selection: SelectionConfig,
    metrics: Option<Metrics>,
    artifact_digest: String,
}

async fn get_session(
    State(state): State<AppState>,
    q: Result<Query<SessionQuery>, QueryRejection>,
) -> ApiResult<Json<SessionInfo>> {
    let Query(q) = q?;
    let s = state.session(q.session.as_deref())?;
    let a = &s.artifacts;
    let current = s.selection();
    Ok(Json(SessionInfo {
        id: s.id.clone(),
        reference: TraverseInfo::of(&a.reference),
        query: TraverseInfo::of(&a.query),
        rows: a.difference.n(),
        cols: a.difference.m(),
        r_norm: a.enhanced.r_norm(),
        d_s: a.params.search.d_s,
        computed_methods: a.methods.iter().map(|m| m.search.method).collect(),
        has_ground_truth: a.ground_truth.is_some(),
        tolerance: a.ground_truth.as_ref().map(|gt| gt.tolerance()),
        search_method: current.search_method,
        selection: current.config,
        metrics: current.metrics,
        artifact_digest: a.digest(),
    }))
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MatrixKind {
    Raw,
    Enhanced,
    Scores,
}

#[derive(Debug, Deserialize)]
struct MatrixQuery {
    session: Option<String>,
    kind: MatrixKind,
    method: Option<SearchMethod>,
    downsample: Option<usize>,
}

/// Row-major matrix values; `null` marks cells (or blocks) with no valid
/// score.
#[derive(Debug, Serialize)]
pub struct MatrixPayload {
    pub rows: usize,
    pub cols: usize,
    pub source_rows: usize,
    pub source_cols: usize,
    pub downsample: usize,
    pub orientation: Option<Orientation>,
    pub values: Vec<Option<f64>>,
}

/// Means of `k`x`k` blocks; edge blocks cover the cells that remain. Cells
/// marked invalid are left out of their block's mean, and a block with no
/// valid cell is `None`.
pub fn block_means(grid: &Grid<f64>, valid: Option<&Grid<bool>>, k: usize) -> (usize, usize, Vec<Option<f64>>) {
    let rows = grid.rows().div_ceil(k);
    let cols = grid.cols().div_ceil(k);
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let (mut sum, mut count) = (0.0, 0usize);
            for r in br * k..((br + 1) * k).min(grid.rows()) {
                for c in bc * k..((bc + 1) * k).min(grid.cols()) {
                    if valid.is_none_or(|v| v.get(r, c)) {
                        sum += grid.get(r, c);
                        count += 1;
                    }
                }
            }
            out.push((count > 0).then(|| sum / count as f64));
        }
    }
    (rows, cols, out)
}

async fn get_matrix(
    State(state): State<AppState>,
    q: Result<Query<MatrixQuery>, QueryRejection>,
) -> ApiResult<Json<MatrixPayload>> {
    let Query(q) = q?;
    let s = state.session(q.session.as_deref())?;
    let k = q.downsample.unwrap_or(1);
    if k == 0 {
        return Err(ApiError::bad_request("downsample must be at least 1"));
    }
    let a = &s.artifacts;
    let (grid, valid, orientation) = match q.kind {
        MatrixKind::Raw => (a.difference.grid(), None, None),
        MatrixKind::Enhanced => (a.enhanced.grid(), None, None),
        MatrixKind::Scores => {
            let method = q.method.unwrap_or_else(|| s.selection().search_method);
            let m = a.method(method).ok_or_else(|| ApiError::not_computed(method))?;
            (m.scores.scores(), Some(m.scores.valid()), Some(m.scores.orientation()))
        }
    };
    let cells = grid.rows().div_ceil(k) * grid.cols().div_ceil(k);
    if cells > MAX_CELLS {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too_large",
            format!("{cells} cells exceeds the {MAX_CELLS}-cell cap; request a larger downsample"),
        ));
    }
    let (rows, cols, values) = block_means(grid, valid, k);
    Ok(Json(MatrixPayload {
        rows,
        cols,
        source_rows: grid.rows(),
        source_cols: grid.cols(),
        downsample: k,
        orientation,
        values,
    }))
}

#[derive(Debug, Deserialize)]
pub struct ReselectRequest {
    /// Search method whose proposals are selected; defaults to the current one.
    pub search_method: Option<SearchMethod>,
    #[serde(flatten)]
    pub selection: SelectionConfig,
}

#[derive(Debug, Serialize)]
struct ReselectResponse {
    session: String,
    search_method: SearchMethod,
    selection: SelectionConfig,
    accepted_count: usize,
    matches: MatchSet64,
    metrics: Option<Metrics>,
}

impl ReselectResponse {
    fn new(session: &Session, s: Selection) -> Self {
        Self {
            session: session.id.clone(),
            search_method: s.search_method,
            selection: s.config,
            accepted_count: s.matches.accepted_count(),
            matches: s.matches,
            metrics: s.metrics,
        }
    }
}

async fn post_reselect(
    State(state): State<AppState>,
    q: Result<Query<SessionQuery>, QueryRejection>,
    body: Result<Json<ReselectRequest>, JsonRejection>,
) -> ApiResult<Json<ReselectResponse>> {
    let Query(q) = q?;
    let Json(body) = body?;
    let s = state.session(q.session.as_deref())?;
    let next = s.reselect(body.search_method, body.selection).map_err(|e| match e {
        ReselectError::NotComputed(m) => ApiError::not_computed(m),
        ReselectError::Invalid(e) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_selection", e.to_string()),
    })?;
    log::debug!("reselect {}: {} accepted", s.id, next.matches.accepted_count());
    Ok(Json(ReselectResponse::new(&s, next)))
}

#[derive(Debug, Deserialize)]
struct PrCurveQuery {
    session: Option<String>,
    /// Selection method the curve sweeps.
    method: Option<SelectionMethod>,
    search: Option<SearchMethod>,
}

async fn get_pr_curve(
    State(state): State<AppState>,
    q: Result<Query<PrCurveQuery>, QueryRejection>,
) -> ApiResult<Json<seqslam::PrCurve>> {
    let Query(q) = q?;
    let s = state.session(q.session.as_deref())?;
    let current = s.selection();
    let a = &s.artifacts;
    let gt = a.ground_truth.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "no_ground_truth", "session has no ground truth")
    })?;
    let search = q.search.unwrap_or(current.search_method);
    let m = a.method(search).ok_or_else(|| ApiError::not_computed(search))?;
    let selection = SelectionConfig {
        method: q.method.unwrap_or(current.config.method),
        ..current.config
    };
    Ok(Json(pr_curve(&m.proposals, &m.scores, gt, &selection, a.params.recall)))
}

#[derive(Debug, Deserialize)]
struct MatchQuery {
    session: Option<String>,
    context: Option<usize>,
    method: Option<SearchMethod>,
}

#[derive(Debug, Serialize)]
struct ProposalDetail {
    reference: usize,
    score: f64,
    strength: f64,
    uniqueness: Option<f64>,
    accepted: bool,
}

#[derive(Debug, Serialize)]
struct Cell {
    reference: usize,
    query: usize,
    enhanced: f64,
}

#[derive(Debug, Serialize)]
struct ImageRef {
    traverse: &'static str,
    index: usize,
    id: String,
    url: String,
}

#[derive(Debug, Serialize)]
struct Images {
    query: Vec<ImageRef>,
    reference: Vec<ImageRef>,
}

#[derive(Debug, Serialize)]
struct MatchDetail {
    query: usize,
    search_method: SearchMethod,
    proposal: Option<ProposalDetail>,
    expected_reference: Option<usize>,
    velocity: Option<f64>,
    cells: Vec<Cell>,
    cells_sum: Option<f64>,
    images: Images,
}

fn image_refs(session: &Session, name: &'static str, t: &Traverse64, centre: usize, context: usize) -> Vec<ImageRef> {
    let last = t.len() - 1;
    (centre.saturating_sub(context)..=(centre.saturating_add(context)).min(last))
        .map(|index| ImageRef {
            traverse: name,
            index,
            id: t.ids()[index].clone(),
            url: format!("/api/image?session={}&traverse={name}&index={index}", session.id),
        })
        .collect()
}

async fn get_match(
    State(state): State<AppState>,
    path: Result<Path<usize>, PathRejection>,
    q: Result<Query<MatchQuery>, QueryRejection>,
) -> ApiResult<Json<MatchDetail>> {
    let Path(query) = path?;
    let Query(q) = q?;
    let s = state.session(q.session.as_deref())?;
    let a = &s.artifacts;
    if query >= a.difference.m() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "query_out_of_range",
            format!("query {query} outside 0..{}", a.difference.m()),
        ));
    }
    let context = q.context.unwrap_or(2);
    let current = s.selection();
    let method = q.method.unwrap_or(current.search_method);
    let m = a.method(method).ok_or_else(|| ApiError::not_computed(method))?;
    let matches = if method == current.search_method {
        current.matches
    } else {
        select(&m.proposals, &m.scores, &current.config)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "selection_failed", e.to_string()))?
    };
    let found = matches
        .proposals
        .iter()
        .zip(&matches.accepted)
        .find(|(p, _)| p.query == query);
    let proposal = found.map(|(p, &accepted)| ProposalDetail {
        reference: p.reference,
        score: p.score,
        strength: p.strength,
        uniqueness: p.uniqueness,
        accepted,
    });
    let trajectory = proposal
        .as_ref()
        .and_then(|p| best_trajectory(&a.difference, &a.enhanced, &m.search, p.reference, query));
    let (velocity, cells) = match trajectory {
        Some((v, cells)) => (
            Some(v),
            cells
                .into_iter()
                .map(|(r, c)| Cell {
                    reference: r,
                    query: c,
                    enhanced: a.enhanced.get(r, c),
                })
                .collect(),
        ),
        None => (None, Vec::new()),
    };
    let cells_sum = (!cells.is_empty()).then(|| cells.iter().fold(0.0, |acc, c| acc + c.enhanced));
    let images = Images {
        query: image_refs(&s, "query", &a.query, query, context),
        reference: proposal
            .as_ref()
            .map(|p| image_refs(&s, "reference", &a.reference, p.reference, context))
            .unwrap_or_default(),
    };
    Ok(Json(MatchDetail {
        query,
        search_method: method,
        proposal,
        expected_reference: a.ground_truth.as_ref().and_then(|gt| gt.expected(query)),
        velocity,
        cells,
        cells_sum,
        images,
    }))
}

#[derive(Debug, Deserialize)]
struct ImageQuery {
    session: Option<String>,
    traverse: String,
    index: usize,
}

async fn get_image(
    State(state): State<AppState>,
    q: Result<Query<ImageQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = q?;
    let s = state.session(q.session.as_deref())?;
    let t = match q.traverse.as_str() {
        "reference" => &s.artifacts.reference,
        "query" => &s.artifacts.query,
        other => return Err(ApiError::bad_request(format!("unknown traverse `{other}` (reference|query)"))),
    };
    let img = t.images().get(q.index).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "image_out_of_range",
            format!("{} index {} outside 0..{}", q.traverse, q.index, t.len()),
        )
    })?;
    let buffer = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_display_bytes())
        .expect("buffer matches dimensions");
    let mut png = Cursor::new(Vec::new());
    buffer
        .write_to(&mut png, image::ImageFormat::Png)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "encode_failed", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png.into_inner()).into_response())
}
