//! Binary classifiers over unshielded triples: ground-truth labeling, the
//! six discriminative-predicate classifiers, and a trainable
//! gradient-boosted tree ensemble.

mod gbdt;

pub use gbdt::{fit, sigmoid, GbdtParams, LossKind, Tree, TreeEnsembleModel, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citest::{CiError, CiTester};
use crate::featurize::{EmbeddingBasis, FeatureVector, VicinityContext, SCHEMA_VERSION};
use crate::graph::{skeleton_of, v_structures_of, Dag, Skeleton, UnshieldedTriple};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("skeleton does not match the dag's adjacency structure")]
    SkeletonMismatch,
    #[error("training requires at least one example of each class")]
    DegenerateLabels,
    #[error("feature schema mismatch: model expects {expected} features, got {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Ci(#[from] CiError),
}

/// Labels every unshielded triple of the skeleton against the ground-truth
/// DAG: 1 iff both endpoints point into the center.
pub fn label_uts(
    dag: &Dag,
    skel: &Skeleton,
) -> Result<Vec<(UnshieldedTriple, bool)>, LearnerError> {
    if *skel != skeleton_of(dag) {
        return Err(LearnerError::SkeletonMismatch);
    }
    let v_structures = v_structures_of(dag);
    Ok(crate::graph::unshielded_triples(skel)
        .into_iter()
        .map(|ut| {
            let label = v_structures.contains(&ut);
            (ut, label)
        })
        .collect())
}

/// The six pre-specified classifiers. Strong predicates decide from the
/// sepset ensemble alone (plus one dependency for GMB) and are exact on
/// canonical instances; weak predicates carry a one-sided guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    /// olp({T}, S) = 0: T absent from every sepset.
    StrongCpc,
    /// olp({T}, S) < 0.5: T absent from a majority of sepsets.
    StrongMpc,
    /// olp({T}, S) < 1 and min{X ~ Y | S∨T} > 0.
    StrongGmb,
    /// min{X ~ Y | {T}} > 0; never 0 on a v-structure.
    Weak1,
    /// max{X ~ Y | PC_T} = 0; never 1 on a non-v-structure.
    Weak2,
    /// min{PC_X ~ PC_Y | S∨T} > 0; never 0 on a v-structure.
    Weak3,
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 6] = [
        PredicateKind::StrongCpc,
        PredicateKind::StrongMpc,
        PredicateKind::StrongGmb,
        PredicateKind::Weak1,
        PredicateKind::Weak2,
        PredicateKind::Weak3,
    ];

    pub fn is_strong(&self) -> bool {
        matches!(
            self,
            PredicateKind::StrongCpc | PredicateKind::StrongMpc | PredicateKind::StrongGmb
        )
    }
}

/// Evaluates a predicate on a vicinity context. Empty quantification
/// domains resolve to the value that keeps the predicate's guarantee:
/// strong predicates and WEAK_2 fall back to 0, WEAK_3 is vacuously 1.
pub fn predicate_score(
    kind: PredicateKind,
    ctx: &VicinityContext,
    tester: &CiTester,
) -> Result<bool, LearnerError> {
    let ut = &ctx.ut;
    let seps = &ctx.sepsets;
    let t_fraction = seps.fraction_containing(ut.t);
    let value = match kind {
        PredicateKind::StrongCpc => !seps.is_empty() && t_fraction == 0.0,
        PredicateKind::StrongMpc => !seps.is_empty() && t_fraction < 0.5,
        PredicateKind::StrongGmb => {
            if seps.is_empty() || t_fraction >= 1.0 {
                false
            } else {
                let mut all_dependent = true;
                for s in &seps.sets {
                    let mut cond: Vec<usize> = s.iter().copied().collect();
                    if !s.contains(&ut.t) {
                        cond.push(ut.t);
                    }
                    if tester.dependency(ut.x, ut.y, &cond)? == 0.0 {
                        all_dependent = false;
                        break;
                    }
                }
                all_dependent
            }
        }
        PredicateKind::Weak1 => tester.dependency(ut.x, ut.y, &[ut.t])? > 0.0,
        PredicateKind::Weak2 => {
            if ctx.pc_t.is_empty() {
                false
            } else {
                let mut all_zero = true;
                for &p in &ctx.pc_t {
                    if tester.dependency(ut.x, ut.y, &[p])? > 0.0 {
                        all_zero = false;
                        break;
                    }
                }
                all_zero
            }
        }
        PredicateKind::Weak3 => {
            let mut vacuous = true;
            let mut all_dependent = true;
            'outer: for &a in &ctx.pc_x {
                for &b in &ctx.pc_y {
                    if a == b {
                        continue;
                    }
                    for s in &seps.sets {
                        let mut cond: Vec<usize> = s.iter().copied().collect();
                        if !s.contains(&ut.t) {
                            cond.push(ut.t);
                        }
                        if cond.contains(&a) || cond.contains(&b) {
                            continue;
                        }
                        vacuous = false;
                        if tester.dependency(a, b, &cond)? == 0.0 {
                            all_dependent = false;
                            break 'outer;
                        }
                    }
                }
            }
            vacuous || all_dependent
        }
    };
    Ok(value)
}

/// One labeled, featurized training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtExample {
    pub features: FeatureVector,
    pub label: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_id: String,
    pub graph_index: usize,
    pub triple: UnshieldedTriple,
}

/// A trained ensemble together with everything scoring needs: the embedding
/// basis that produced its features, the decision threshold, and the schema
/// tag the features were laid out under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_version: String,
    pub basis: EmbeddingBasis,
    pub threshold: f64,
    pub ensemble: TreeEnsembleModel,
}

impl TrainedModel {
    pub fn score(&self, fv: &FeatureVector) -> Result<f64, LearnerError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LearnerError::SchemaMismatch {
                expected: self.ensemble.feature_dim,
                got: fv.len(),
            });
        }
        self.ensemble.score(&fv.values)
    }
}

/// The pluggable classifier behind the pipeline: a pre-specified predicate
/// (reads the vicinity context) or a trained ensemble (reads features).
pub enum Classifier {
    Predicate(PredicateKind),
    Trained(TrainedModel),
}

impl Classifier {
    pub fn threshold(&self) -> f64 {
        match self {
            Classifier::Predicate(_) => 0.1,
            Classifier::Trained(m) => m.threshold,
        }
    }
}

/// Trains the reference tree ensemble on labeled examples; returns the
/// model and the per-round training loss.
pub fn train(
    examples: &[UtExample],
    params: &GbdtParams,
) -> Result<(TreeEnsembleModel, Vec<f64>), LearnerError> {
    let rows: Vec<&[f64]> = examples
        .iter()
        .map(|e| e.features.values.as_slice())
        .collect();
    let labels: Vec<bool> = examples.iter().map(|e| e.label).collect();
    fit(&rows, &labels, params)
}
