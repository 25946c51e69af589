//! End-to-end inference: skeleton → scored unshielded triples → conflict-free
//! v-structure set → partial DAG → Meek closure → CPDAG; plus the
//! training-set builder that featurizes and labels whole corpora.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::citest::{CiError, CiTester, G2Config, SepsetConfig};
use crate::featurize::{build_vicinity, featurize_with_context, EmbeddingBasis};
use crate::graph::{
    meek_closure, skeleton_of, unshielded_triples, Dag, GraphError, NodeId, Pdag, Skeleton,
    UnshieldedTriple,
};
use crate::learner::{label_uts, predicate_score, Classifier, LearnerError, Provenance, UtExample};
use crate::synth::DiscreteDataset;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset columns do not match skeleton nodes")]
    ColumnMismatch,
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A triple the classifier accepted as a v-structure, with its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VCandidate {
    pub triple: UnshieldedTriple,
    pub score: f64,
}

/// Two candidates conflict iff they orient a shared edge in opposite
/// directions; claiming the same arrow is compatible.
pub fn candidates_conflict(a: &VCandidate, b: &VCandidate) -> bool {
    let reversed: [(NodeId, NodeId); 2] = b.triple.arrows().map(|(u, v)| (v, u));
    a.triple
        .arrows()
        .iter()
        .any(|arrow| reversed.contains(arrow))
}

/// Higher score wins; equal scores fall back to canonical triple order,
/// earlier triple first.
fn higher_priority(a: &VCandidate, b: &VCandidate) -> bool {
    match a.score.total_cmp(&b.score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.triple < b.triple,
    }
}

/// Iteratively removes the lowest-priority candidate that conflicts with a
/// higher-priority survivor until the set is conflict-free. Candidates that
/// conflict with nothing are never removed.
pub fn conflict_resolve(candidates: Vec<VCandidate>) -> Vec<VCandidate> {
    let mut survivors = candidates;
    loop {
        let mut victim: Option<usize> = None;
        for i in 0..survivors.len() {
            let removable = survivors.iter().enumerate().any(|(j, other)| {
                j != i
                    && candidates_conflict(&survivors[i], other)
                    && higher_priority(other, &survivors[i])
            });
            if removable {
                let is_lower = match victim {
                    Some(v) => higher_priority(&survivors[v], &survivors[i]),
                    None => true,
                };
                if is_lower {
                    victim = Some(i);
                }
            }
        }
        match victim {
            Some(i) => {
                survivors.remove(i);
            }
            None => return survivors,
        }
    }
}

/// Builds the partial DAG: each survivor's arrows directed, every other
/// skeleton edge undirected. Survivors must reference skeleton edges and be
/// mutually conflict-free.
pub fn orient(skel: &Skeleton, survivors: &[VCandidate]) -> Result<Pdag, PipelineError> {
    let mut directed: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for cand in survivors {
        for (u, v) in cand.triple.arrows() {
            if !skel.adjacent(u, v) {
                return Err(PipelineError::Graph(GraphError::InvalidNodes(format!(
                    "candidate arrow {u}->{v} is not a skeleton edge"
                ))));
            }
            if directed.contains(&(v, u)) {
                return Err(PipelineError::Graph(GraphError::OrientationConflict(u, v)));
            }
            directed.insert((u, v));
        }
    }
    let undirected: Vec<(NodeId, NodeId)> = skel
        .edges()
        .filter(|&(u, v)| !directed.contains(&(u, v)) && !directed.contains(&(v, u)))
        .collect();
    Ok(Pdag::new(skel.names().to_vec(), directed, undirected)?)
}

/// Inference settings; thresholds and test parameters mirror the CLI keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ml4cConfig {
    /// Candidates need score ≥ threshold to be admitted.
    pub threshold: f64,
    pub sepset: SepsetConfig,
    pub g2: G2Config,
}

impl Default for Ml4cConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            sepset: SepsetConfig::default(),
            g2: G2Config::default(),
        }
    }
}

/// Everything one inference run produced: the CPDAG, per-UT scores, and
/// per-phase timings for the run manifest.
#[derive(Debug, Clone)]
pub struct Ml4cRun {
    pub cpdag: Pdag,
    pub scored_uts: Vec<(UnshieldedTriple, f64)>,
    pub survivors: Vec<VCandidate>,
    pub scoring_time: Duration,
    pub orientation_time: Duration,
}

/// Scores every unshielded triple of the skeleton with the classifier.
/// Featurization is skipped for predicate classifiers, which read the
/// vicinity context directly.
fn score_uts(
    tester: &CiTester,
    skel: &Skeleton,
    classifier: &Classifier,
    config: &Ml4cConfig,
) -> Result<Vec<(UnshieldedTriple, f64)>, PipelineError> {
    let uts = unshielded_triples(skel);
    let results: Vec<Result<(UnshieldedTriple, f64), PipelineError>> = uts
        .into_par_iter()
        .map(|ut| {
            let ctx = build_vicinity(skel, &ut, tester, &config.sepset)?;
            let score = match classifier {
                Classifier::Predicate(kind) => {
                    if predicate_score(*kind, &ctx, tester)? {
                        1.0
                    } else {
                        0.0
                    }
                }
                Classifier::Trained(model) => {
                    let fv = featurize_with_context(&ctx, tester, &model.basis)?;
                    model.score(&fv)?
                }
            };
            Ok((ut, score))
        })
        .collect();
    results.into_iter().collect()
}

/// Full inference against an explicit tester backend.
pub fn run_ml4c_with_tester(
    tester: &CiTester,
    skel: &Skeleton,
    classifier: &Classifier,
    config: &Ml4cConfig,
) -> Result<Ml4cRun, PipelineError> {
    let start = Instant::now();
    let scored_uts = score_uts(tester, skel, classifier, config)?;
    let scoring_time = start.elapsed();

    let start = Instant::now();
    let candidates: Vec<VCandidate> = scored_uts
        .iter()
        .filter(|&&(_, score)| score >= config.threshold)
        .map(|&(triple, score)| VCandidate { triple, score })
        .collect();
    let survivors = conflict_resolve(candidates);
    let partial = orient(skel, &survivors)?;
    let cpdag = meek_closure(&partial)?;
    let orientation_time = start.elapsed();
    Ok(Ml4cRun {
        cpdag,
        scored_uts,
        survivors,
        scoring_time,
        orientation_time,
    })
}

/// Inference on observational data with the G² backend.
pub fn run_ml4c(
    data: &DiscreteDataset,
    skel: &Skeleton,
    classifier: &Classifier,
    config: &Ml4cConfig,
) -> Result<Pdag, PipelineError> {
    if data.column_names() != skel.names() {
        return Err(PipelineError::ColumnMismatch);
    }
    let tester = CiTester::from_data(data, config.g2);
    Ok(run_ml4c_with_tester(&tester, skel, classifier, config)?.cpdag)
}

/// Featurizes and labels every unshielded triple of every corpus graph with
/// the data-backed tester.
pub fn build_training_set(
    corpus: &[(Dag, DiscreteDataset)],
    corpus_id: &str,
    basis: &EmbeddingBasis,
    config: &Ml4cConfig,
) -> Result<Vec<UtExample>, PipelineError> {
    let mut out = Vec::new();
    for (graph_index, (dag, data)) in corpus.iter().enumerate() {
        let skel = skeleton_of(dag);
        if data.column_names() != skel.names() {
            return Err(PipelineError::ColumnMismatch);
        }
        let labeled = label_uts(dag, &skel)?;
        let tester = CiTester::from_data(data, config.g2);
        let examples: Vec<Result<UtExample, PipelineError>> = labeled
            .into_par_iter()
            .map(|(ut, label)| {
                let ctx = build_vicinity(&skel, &ut, &tester, &config.sepset)?;
                let features = featurize_with_context(&ctx, &tester, basis)?;
                Ok(UtExample {
                    features,
                    label,
                    provenance: Provenance {
                        corpus_id: corpus_id.to_string(),
                        graph_index,
                        triple: ut,
                    },
                })
            })
            .collect();
        for e in examples {
            out.push(e?);
        }
    }
    Ok(out)
}
