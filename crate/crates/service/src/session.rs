//! Session state: immutable pipeline artifacts plus the one mutable
//! selection.

use std::sync::Mutex;

use seqslam::diffmatrix::enhance_matrix;
use seqslam::export::{encode_matrix, encode_scores};
use seqslam::matching::{proposals_from_scores, select};
use seqslam::pipeline::{prepare, PipelineParams};
use seqslam::search::{search, SearchConfig, SearchMethod};
use seqslam::{
    evaluation, DifferenceMatrix64, EnhancedMatrix64, GroundTruth, MatchProposal64, MatchSet64, Metrics,
    Result, ScoreMatrix64, SelectionConfig, Traverse64,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Scores and proposals of one search method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodArtifacts {
    pub search: SearchConfig,
    pub scores: ScoreMatrix64,
    pub proposals: Vec<MatchProposal64>,
}

/// Everything computed once per session. Never mutated after construction.
#[derive(Debug, Clone)]
pub struct Artifacts {
    /// Unprocessed traverses, served as images.
    pub reference: Traverse64,
    pub query: Traverse64,
    pub difference: DifferenceMatrix64,
    pub enhanced: EnhancedMatrix64,
    pub methods: Vec<MethodArtifacts>,
    pub ground_truth: Option<GroundTruth>,
    pub params: PipelineParams,
}

impl Artifacts {
    /// Runs every stage up to proposals for each of `methods`.
    pub fn compute(
        reference: Traverse64,
        query: Traverse64,
        ground_truth: Option<GroundTruth>,
        params: PipelineParams,
        methods: &[SearchMethod],
    ) -> Result<Self> {
        params.validate()?;
        let prepared = prepare(&reference, &query, &params.preprocess)?;
        let enhanced = enhance_matrix(&prepared.difference, params.r_norm)?;
        let mut computed = Vec::new();
        for &method in methods {
            let cfg = SearchConfig {
                method,
                ..params.search.clone()
            };
            let scores = search(&prepared.difference, &enhanced, &cfg)?;
            let proposals = proposals_from_scores(&scores);
            computed.push(MethodArtifacts {
                search: cfg,
                scores,
                proposals,
            });
        }
        Ok(Self {
            reference,
            query,
            difference: prepared.difference,
            enhanced,
            methods: computed,
            ground_truth,
            params,
        })
    }

    pub fn method(&self, method: SearchMethod) -> Option<&MethodArtifacts> {
        self.methods.iter().find(|a| a.search.method == method)
    }

    /// SHA-256 over every matrix and proposal list, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(encode_matrix(self.difference.grid()));
        h.update(encode_matrix(self.enhanced.grid()));
        for a in &self.methods {
            h.update(a.search.method.as_str());
            h.update(encode_scores(&a.scores));
            h.update(serde_json::to_vec(&a.proposals).expect("proposals serialise"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The mutable part of a session, replaced wholesale on reselect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub search_method: SearchMethod,
    pub config: SelectionConfig,
    pub matches: MatchSet64,
    pub metrics: Option<Metrics>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub artifacts: Artifacts,
    selection: Mutex<Selection>,
}

#[derive(Debug)]
pub enum ReselectError {
    NotComputed(SearchMethod),
    Invalid(seqslam::Error),
}

impl Session {
    /// Starts with the first computed method and the configured selection.
    pub fn new(id: impl Into<String>, artifacts: Artifacts) -> Result<Self> {
        let first = artifacts
            .methods
            .first()
            .ok_or_else(|| seqslam::Error::InvalidParameter {
                name: "methods",
                reason: "a session needs at least one computed search method".into(),
            })?;
        let config = artifacts.params.selection.clone();
        let selection = apply(&artifacts, first, &config)?;
        Ok(Self {
            id: id.into(),
            selection: Mutex::new(selection),
            artifacts,
        })
    }

    pub fn selection(&self) -> Selection {
        self.selection.lock().expect("selection lock").clone()
    }

    /// Re-runs selection and evaluation only. Concurrent calls are
    /// serialised and the stored selection is swapped in one step.
    pub fn reselect(
        &self,
        method: Option<SearchMethod>,
        config: SelectionConfig,
    ) -> std::result::Result<Selection, ReselectError> {
        let mut current = self.selection.lock().expect("selection lock");
        let method = method.unwrap_or(current.search_method);
        let artifacts = self
            .artifacts
            .method(method)
            .ok_or(ReselectError::NotComputed(method))?;
        let next = apply(&self.artifacts, artifacts, &config).map_err(ReselectError::Invalid)?;
        *current = next.clone();
        Ok(next)
    }
}

fn apply(artifacts: &Artifacts, method: &MethodArtifacts, config: &SelectionConfig) -> Result<Selection> {
    let matches = select(&method.proposals, &method.scores, config)?;
    let metrics = artifacts
        .ground_truth
        .as_ref()
        .map(|gt| evaluation::evaluate_matches(&matches, gt, artifacts.params.recall));
    Ok(Selection {
        search_method: method.search.method,
        config: config.clone(),
        matches,
        metrics,
    })
}
