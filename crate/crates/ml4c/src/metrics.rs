//! CPDAG-level evaluation: the ten-cell edge confusion table, structural
//! Hamming distance, identifiable-edge F1, and UT-level classification F1.

use thiserror::Error;

use crate::graph::{NodeId, Pdag};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("graphs are over different node sets")]
    NodeMismatch,
    #[error("label vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Counts of unordered node pairs by (status in truth CPDAG, status in
/// result CPDAG). Cells follow the layout: truth-directed pairs land in
/// 1–4 (right / reversed / undirected / missing), truth-undirected in 5–7
/// (directed / right / missing), truth-nonedges in 8–10 (directed /
/// undirected / absent). SHD sums every cell except 1, 6 and 10.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeConfusion {
    pub directed_right: u64,         // ① truth directed, predicted same arrow
    pub directed_reversed: u64,      // ② truth directed, predicted opposite arrow
    pub directed_as_undirected: u64, // ③ truth directed, predicted undirected
    pub directed_missing: u64,       // ④ truth directed, predicted absent
    pub undirected_as_directed: u64, // ⑤ truth undirected, predicted directed
    pub undirected_right: u64,       // ⑥ truth undirected, predicted undirected
    pub undirected_missing: u64,     // ⑦ truth undirected, predicted absent
    pub spurious_directed: u64,      // ⑧ truth absent, predicted directed
    pub spurious_undirected: u64,    // ⑨ truth absent, predicted undirected
    pub true_nonedge: u64,           // ⑩ absent in both
}

impl EdgeConfusion {
    /// Pairs carrying an edge in the truth CPDAG.
    pub fn truth_edge_total(&self) -> u64 {
        self.directed_right
            + self.directed_reversed
            + self.directed_as_undirected
            + self.directed_missing
            + self.undirected_as_directed
            + self.undirected_right
            + self.undirected_missing
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PairStatus {
    Directed(NodeId, NodeId),
    Undirected,
    Absent,
}

fn pair_status(g: &Pdag, u: NodeId, v: NodeId) -> PairStatus {
    if g.has_directed(u, v) {
        PairStatus::Directed(u, v)
    } else if g.has_directed(v, u) {
        PairStatus::Directed(v, u)
    } else if g.has_undirected(u, v) {
        PairStatus::Undirected
    } else {
        PairStatus::Absent
    }
}

/// Classifies every unordered node pair into exactly one confusion cell.
pub fn edge_confusion(truth: &Pdag, predicted: &Pdag) -> Result<EdgeConfusion, MetricsError> {
    if truth.names() != predicted.names() {
        return Err(MetricsError::NodeMismatch);
    }
    let n = truth.node_count();
    let mut c = EdgeConfusion::default();
    for u in 0..n {
        for v in u + 1..n {
            use PairStatus::*;
            match (pair_status(truth, u, v), pair_status(predicted, u, v)) {
                (Directed(a, b), Directed(c2, d)) if (a, b) == (c2, d) => c.directed_right += 1,
                (Directed(..), Directed(..)) => c.directed_reversed += 1,
                (Directed(..), Undirected) => c.directed_as_undirected += 1,
                (Directed(..), Absent) => c.directed_missing += 1,
                (Undirected, Directed(..)) => c.undirected_as_directed += 1,
                (Undirected, Undirected) => c.undirected_right += 1,
                (Undirected, Absent) => c.undirected_missing += 1,
                (Absent, Directed(..)) => c.spurious_directed += 1,
                (Absent, Undirected) => c.spurious_undirected += 1,
                (Absent, Absent) => c.true_nonedge += 1,
            }
        }
    }
    Ok(c)
}

/// Structural Hamming distance at CPDAG level: the number of edge
/// additions, deletions, reversals, and type changes separating the graphs.
/// A reversal counts once.
pub fn shd(truth: &Pdag, predicted: &Pdag) -> Result<u64, MetricsError> {
    let c = edge_confusion(truth, predicted)?;
    Ok(c.directed_reversed
        + c.directed_as_undirected
        + c.directed_missing
        + c.undirected_as_directed
        + c.undirected_missing
        + c.spurious_directed
        + c.spurious_undirected)
}

/// F1 over identifiable (directed) edges: precision = ①/(①+②+③+④),
/// recall = ①/(①+②+⑤+⑧). Returns 0 when the truth CPDAG has no
/// identifiable edges or when no exact arrow was recovered.
pub fn edge_f1(truth: &Pdag, predicted: &Pdag) -> Result<f64, MetricsError> {
    let c = edge_confusion(truth, predicted)?;
    let truth_directed =
        c.directed_right + c.directed_reversed + c.directed_as_undirected + c.directed_missing;
    let predicted_directed =
        c.directed_right + c.directed_reversed + c.undirected_as_directed + c.spurious_directed;
    if truth_directed == 0 || predicted_directed == 0 || c.directed_right == 0 {
        return Ok(0.0);
    }
    let precision = c.directed_right as f64 / truth_directed as f64;
    let recall = c.directed_right as f64 / predicted_directed as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Binary F1 with v-structure (label 1) as the positive class. The vacuous
/// case — no positives in truth and none predicted — is defined as 1.0.
pub fn ut_f1(truth_labels: &[bool], predicted_labels: &[bool]) -> Result<f64, MetricsError> {
    if truth_labels.len() != predicted_labels.len() {
        return Err(MetricsError::LengthMismatch(
            truth_labels.len(),
            predicted_labels.len(),
        ));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (&t, &p) in truth_labels.iter().zip(predicted_labels) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(if fp == 0 && fn_ == 0 { 1.0 } else { 0.0 });
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}
