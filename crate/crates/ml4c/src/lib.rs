//! Supervised causal structure learning on discrete data.
//!
//! Given a dataset and its skeleton, the pipeline classifies every unshielded
//! triple as v-structure or not, resolves conflicts among the accepted
//! colliders, orients the partial DAG, and closes it under Meek's rules to
//! produce a CPDAG. The crate also ships everything needed to train the
//! classifier end to end: synthetic Bayesian-network corpora, a G² based
//! conditional-independence engine with a d-separation oracle backend,
//! vicinity featurization with random-feature mean embeddings, a
//! gradient-boosted tree learner, and CPDAG evaluation metrics.

pub mod citest;
pub mod cli;
pub mod featurize;
pub mod graph;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod pipeline;
pub mod reference;
pub mod synth;
