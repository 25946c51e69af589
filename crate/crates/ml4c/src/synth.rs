//! Synthetic training corpora: random graph structures (Erdős–Rényi and
//! scale-free), per-node cardinalities, Dirichlet conditional probability
//! tables, and forward sampling. All randomness flows from seedable ChaCha8
//! generators so corpora replay bit-identically; per-graph seeds are derived
//! from the master seed and recorded in the corpus manifest.

use std::collections::BTreeSet;

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{topological_order, Dag, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// SplitMix64 finalizer; used to derive per-component seeds from the master
/// seed so every stream is independent and documented.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModel {
    /// Uniform choice of the target number of distinct edges.
    Er,
    /// Preferential attachment, padded with extra attachments on random
    /// nodes to hit the target edge count.
    Sf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Inclusive node-count range.
    pub node_count_range: (usize, usize),
    /// Average edges per node, sampled uniformly.
    pub sparsity_range: (f64, f64),
    pub graph_model: GraphModel,
    pub sample_size: usize,
    /// Symmetric Dirichlet concentration, one draw per node.
    pub dirichlet_alpha_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            node_count_range: (10, 20),
            sparsity_range: (1.2, 1.7),
            graph_model: GraphModel::Er,
            sample_size: 10_000,
            dirichlet_alpha_range: (0.1, 1.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (lo, hi) = self.node_count_range;
        if lo < 2 || lo > hi {
            return Err(SynthError::InvalidConfig(format!(
                "node count range [{lo}, {hi}] must be non-empty with at least 2 nodes"
            )));
        }
        let (slo, shi) = self.sparsity_range;
        // NaN bounds must fail validation, hence the negated comparisons
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(slo > 0.0) || slo > shi || shi >= lo as f64 {
            return Err(SynthError::InvalidConfig(format!(
                "sparsity range [{slo}, {shi}] must be within (0, node count)"
            )));
        }
        let (alo, ahi) = self.dirichlet_alpha_range;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(alo > 0.0) || alo > ahi {
            return Err(SynthError::InvalidConfig(format!(
                "dirichlet alpha range [{alo}, {ahi}] must be positive and non-empty"
            )));
        }
        if self.sample_size == 0 {
            return Err(SynthError::InvalidConfig(
                "sample size must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn uniform_in(range: (f64, f64), rng: &mut impl Rng) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Undirected skeleton with exactly `m` distinct edges chosen uniformly.
fn er_skeleton(d: usize, m: usize, rng: &mut impl Rng) -> BTreeSet<(NodeId, NodeId)> {
    let total = d * (d - 1) / 2;
    let m = m.min(total);
    let mut chosen = BTreeSet::new();
    while chosen.len() < m {
        let u = rng.random_range(0..d);
        let v = rng.random_range(0..d);
        if u != v {
            chosen.insert(if u < v { (u, v) } else { (v, u) });
        }
    }
    chosen
}

/// Preferential-attachment skeleton targeting `m` edges: a spanning
/// attachment pass with `k = max(1, m/d)` links per new node, then single
/// extra attachments from uniformly random nodes until the target is hit.
fn sf_skeleton(d: usize, m: usize, rng: &mut impl Rng) -> BTreeSet<(NodeId, NodeId)> {
    let total = d * (d - 1) / 2;
    let m = m.min(total);
    let k = (m / d).max(1);
    let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut degree = vec![0usize; d];
    // repeat-by-degree pool for preferential choice; +1 smoothing via the
    // uniform fallback below keeps isolated nodes reachable
    let mut pool: Vec<NodeId> = Vec::new();
    let add_edge = |edges: &mut BTreeSet<(NodeId, NodeId)>,
                    degree: &mut Vec<usize>,
                    pool: &mut Vec<NodeId>,
                    u: NodeId,
                    v: NodeId|
     -> bool {
        let key = if u < v { (u, v) } else { (v, u) };
        if u == v || !edges.insert(key) {
            return false;
        }
        degree[u] += 1;
        degree[v] += 1;
        pool.push(u);
        pool.push(v);
        true
    };
    for new in 1..d {
        let want = k.min(new);
        let mut attached = 0;
        let mut guard = 0;
        while attached < want && guard < 64 * (new + 1) {
            guard += 1;
            let target = if pool.is_empty() {
                rng.random_range(0..new)
            } else if rng.random::<f64>() < 0.9 {
                *pool.choose(rng).expect("pool nonempty")
            } else {
                rng.random_range(0..new)
            };
            if target < new && add_edge(&mut edges, &mut degree, &mut pool, new, target) {
                attached += 1;
            }
        }
    }
    let mut guard = 0;
    while edges.len() < m && guard < 1000 * m.max(1) {
        guard += 1;
        let u = rng.random_range(0..d);
        let target = if pool.is_empty() || rng.random::<f64>() < 0.1 {
            rng.random_range(0..d)
        } else {
            *pool.choose(rng).expect("pool nonempty")
        };
        add_edge(&mut edges, &mut degree, &mut pool, u, target);
    }
    edges
}

/// Draws a random DAG per the config: skeleton from the chosen model, then
/// every edge directed from lower to higher rank in a random permutation.
pub fn gen_dag(config: &SynthConfig, rng: &mut impl Rng) -> Result<Dag, SynthError> {
    config.validate()?;
    let (lo, hi) = config.node_count_range;
    let d = rng.random_range(lo..=hi);
    let sparsity = uniform_in(config.sparsity_range, rng);
    let m = (sparsity * d as f64).round() as usize;
    let skeleton = match config.graph_model {
        GraphModel::Er => er_skeleton(d, m, rng),
        GraphModel::Sf => sf_skeleton(d, m, rng),
    };
    let mut rank: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        rank.swap(i, rng.random_range(0..=i));
    }
    let edges: Vec<(NodeId, NodeId)> = skeleton
        .into_iter()
        .map(|(u, v)| if rank[u] < rank[v] { (u, v) } else { (v, u) })
        .collect();
    let names = (0..d).map(|i| format!("V{i}")).collect();
    Ok(Dag::new(names, edges)?)
}

/// Per-node cardinalities from a truncated normal N(2, 1.5/m) with floor 2,
/// where m is the largest in-degree among the node's children (1 when the
/// node has none). Rejection sampling, rounded after acceptance.
pub fn gen_cardinalities(dag: &Dag, rng: &mut impl Rng) -> Vec<u32> {
    (0..dag.node_count())
        .map(|v| {
            let m = dag
                .children(v)
                .iter()
                .map(|&c| dag.in_degree(c))
                .max()
                .unwrap_or(1)
                .max(1);
            let sigma = 1.5 / m as f64;
            let normal = Normal::new(2.0, sigma).expect("positive sigma");
            loop {
                let draw = normal.sample(rng);
                if draw >= 2.0 {
                    return draw.round() as u32;
                }
            }
        })
        .collect()
}

/// Conditional probability table of one node: one probability row per
/// combination of parent values, rows indexed in mixed-radix order over
/// `parent_order` (first parent varies slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: NodeId,
    pub cardinality: u32,
    pub parent_order: Vec<NodeId>,
    pub parent_cardinalities: Vec<u32>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn row_count(&self) -> usize {
        self.parent_cardinalities
            .iter()
            .map(|&c| c as usize)
            .product()
    }

    /// Row index for concrete parent values, mixed radix over parent_order.
    pub fn row_index(&self, parent_values: &[u32]) -> usize {
        debug_assert_eq!(parent_values.len(), self.parent_order.len());
        let mut idx = 0usize;
        for (val, &card) in parent_values.iter().zip(&self.parent_cardinalities) {
            debug_assert!(*val < card);
            idx = idx * card as usize + *val as usize;
        }
        idx
    }

    pub fn row(&self, parent_values: &[u32]) -> &[f64] {
        &self.rows[self.row_index(parent_values)]
    }

    /// Checks row count and that every row is a probability vector.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.rows.len() != self.row_count() {
            return Err(SynthError::InvalidConfig(format!(
                "cpt for node {} has {} rows, expected {}",
                self.node,
                self.rows.len(),
                self.row_count()
            )));
        }
        for row in &self.rows {
            if row.len() != self.cardinality as usize {
                return Err(SynthError::InvalidConfig(format!(
                    "cpt row length {} does not match cardinality {}",
                    row.len(),
                    self.cardinality
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(SynthError::InvalidConfig(format!(
                    "cpt row is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric Dirichlet(alpha) draw via normalized Gamma(alpha, 1) variates.
fn dirichlet_row(alpha: f64, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive alpha");
    loop {
        let mut row: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            for p in &mut row {
                *p /= sum;
            }
            return row;
        }
    }
}

/// One CPT per node: a single alpha per node drawn from the config range,
/// then an independent symmetric Dirichlet row per parent-value combination.
pub fn gen_cpts(
    dag: &Dag,
    cardinalities: &[u32],
    alpha_range: (f64, f64),
    rng: &mut impl Rng,
) -> Vec<Cpt> {
    (0..dag.node_count())
        .map(|v| {
            let alpha = uniform_in(alpha_range, rng);
            let parent_order: Vec<NodeId> = dag.parents(v).to_vec();
            let parent_cardinalities: Vec<u32> =
                parent_order.iter().map(|&p| cardinalities[p]).collect();
            let row_count: usize = parent_cardinalities.iter().map(|&c| c as usize).product();
            let dim = cardinalities[v] as usize;
            let rows = (0..row_count)
                .map(|_| dirichlet_row(alpha, dim, rng))
                .collect();
            Cpt {
                node: v,
                cardinality: cardinalities[v],
                parent_order,
                parent_cardinalities,
                rows,
            }
        })
        .collect()
}

/// A DAG with per-node cardinalities and conditional probability tables.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    pub dag: Dag,
    pub cardinalities: Vec<u32>,
    pub cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn new(dag: Dag, cardinalities: Vec<u32>, cpts: Vec<Cpt>) -> Result<Self, SynthError> {
        if cardinalities.len() != dag.node_count() || cpts.len() != dag.node_count() {
            return Err(SynthError::InvalidConfig(
                "cardinalities and cpts must cover every node".into(),
            ));
        }
        if cardinalities.iter().any(|&c| c < 2) {
            return Err(SynthError::InvalidConfig(
                "cardinalities must be at least 2".into(),
            ));
        }
        for (v, cpt) in cpts.iter().enumerate() {
            if cpt.node != v
                || cpt.cardinality != cardinalities[v]
                || cpt.parent_order != dag.parents(v)
            {
                return Err(SynthError::InvalidConfig(format!(
                    "cpt for node {v} is inconsistent with the dag"
                )));
            }
            cpt.validate()?;
        }
        Ok(Self {
            dag,
            cardinalities,
            cpts,
        })
    }

    pub fn random(config: &SynthConfig, rng: &mut impl Rng) -> Result<Self, SynthError> {
        let dag = gen_dag(config, rng)?;
        let cardinalities = gen_cardinalities(&dag, rng);
        let cpts = gen_cpts(&dag, &cardinalities, config.dirichlet_alpha_range, rng);
        BayesNet::new(dag, cardinalities, cpts)
    }
}

/// Integer-coded categorical sample matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDataset {
    column_names: Vec<String>,
    cardinalities: Vec<u32>,
    cells: Vec<u32>,
    n_rows: usize,
}

impl DiscreteDataset {
    pub fn new(
        column_names: Vec<String>,
        cardinalities: Vec<u32>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self, SynthError> {
        let n_cols = column_names.len();
        if cardinalities.len() != n_cols {
            return Err(SynthError::InvalidConfig(
                "one cardinality per column is required".into(),
            ));
        }
        let n_rows = rows.len();
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            if row.len() != n_cols {
                return Err(SynthError::InvalidConfig("ragged dataset row".into()));
            }
            for (c, &val) in row.iter().enumerate() {
                if val >= cardinalities[c] {
                    return Err(SynthError::InvalidConfig(format!(
                        "value {val} out of range for column {} (cardinality {})",
                        column_names[c], cardinalities[c]
                    )));
                }
                cells.push(val);
            }
        }
        Ok(Self {
            column_names,
            cardinalities,
            cells,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn value(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        let w = self.n_cols();
        &self.cells[row * w..(row + 1) * w]
    }
}

/// Standard forward sampling: rows are generated in topological order, each
/// node drawn from its CPT row given already-sampled parent values.
pub fn forward_sample(bn: &BayesNet, n: usize, rng: &mut impl Rng) -> DiscreteDataset {
    let d = bn.dag.node_count();
    let order = bn.dag.topological_order();
    let mut cells = Vec::with_capacity(n * d);
    let mut assignment = vec![0u32; d];
    let mut parent_values: Vec<u32> = Vec::new();
    for _ in 0..n {
        for &v in order {
            let cpt = &bn.cpts[v];
            parent_values.clear();
            parent_values.extend(cpt.parent_order.iter().map(|&p| assignment[p]));
            let probs = cpt.row(&parent_values);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut value = cpt.cardinality - 1;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    value = i as u32;
                    break;
                }
            }
            assignment[v] = value;
        }
        cells.extend_from_slice(&assignment);
    }
    DiscreteDataset {
        column_names: bn.dag.names().to_vec(),
        cardinalities: bn.cardinalities.clone(),
        cells,
        n_rows: n,
    }
}

/// One synthesized graph with its dataset and the seed that reproduces it.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub index: usize,
    pub seed: u64,
    pub net: BayesNet,
    pub dataset: DiscreteDataset,
}

/// Builds `n_graphs` independent (net, dataset) pairs. Each item uses its
/// own ChaCha8 generator seeded by `derive_seed(config.seed, index)`.
pub fn build_corpus(config: &SynthConfig, n_graphs: usize) -> Result<Vec<CorpusItem>, SynthError> {
    config.validate()?;
    (0..n_graphs)
        .map(|index| {
            let seed = derive_seed(config.seed, index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = BayesNet::random(config, &mut rng)?;
            let dataset = forward_sample(&net, config.sample_size, &mut rng);
            Ok(CorpusItem {
                index,
                seed,
                net,
                dataset,
            })
        })
        .collect()
}

/// Acyclicity spot check used by property tests and the corpus builder.
pub fn is_acyclic(dag: &Dag) -> bool {
    topological_order(dag.node_count(), dag.edges()).is_ok()
}
