//! Core graph types and algorithms: DAGs, skeletons, partially directed
//! graphs, unshielded triples, d-separation, Meek closure, and DAG→CPDAG.
//!
//! Node identity is by index; names are metadata resolved at I/O boundaries.
//! All types are immutable after construction and validate their invariants
//! in the constructor, so operations on them are pure and panic-free.

mod dsep;
mod meek;

pub use dsep::d_separated;
pub use meek::meek_closure;

use std::collections::BTreeSet;
use thiserror::Error;

/// Index of a node within a graph's name list.
pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("directed cycle detected")]
    CycleDetected,
    #[error("node index {index} out of range for {node_count} nodes")]
    InvalidNode { index: usize, node_count: usize },
    #[error("invalid node arguments: {0}")]
    InvalidNodes(String),
    #[error("self loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0} - {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {0} - {1} is both directed and undirected")]
    MixedEdge(NodeId, NodeId),
    #[error("orientation conflict on edge {0} - {1}")]
    OrientationConflict(NodeId, NodeId),
}

fn check_node(index: usize, node_count: usize) -> Result<(), GraphError> {
    if index >= node_count {
        return Err(GraphError::InvalidNode { index, node_count });
    }
    Ok(())
}

/// Computes a topological order of `node_count` nodes under `edges`
/// (parent, child), smallest index first among ready nodes.
pub fn topological_order(
    node_count: usize,
    edges: impl IntoIterator<Item = (NodeId, NodeId)>,
) -> Result<Vec<NodeId>, GraphError> {
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
    let mut in_degree = vec![0usize; node_count];
    for (u, v) in edges {
        check_node(u, node_count)?;
        check_node(v, node_count)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        children[u].push(v);
        in_degree[v] += 1;
    }
    let mut ready: BTreeSet<NodeId> = (0..node_count).filter(|&v| in_degree[v] == 0).collect();
    let mut order = Vec::with_capacity(node_count);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &c in &children[v] {
            in_degree[c] -= 1;
            if in_degree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() != node_count {
        return Err(GraphError::CycleDetected);
    }
    Ok(order)
}

/// A directed acyclic graph over named discrete variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    edge_count: usize,
    topo: Vec<NodeId>,
}

impl Dag {
    /// Builds a DAG, rejecting self loops, duplicate edges, out-of-range
    /// indices, and directed cycles.
    pub fn new(
        names: Vec<String>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let n = names.len();
        let mut parents: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut seen: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let mut edge_count = 0usize;
        for (u, v) in edges {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !seen.insert((u, v)) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
            children[u].push(v);
            parents[v].push(u);
            edge_count += 1;
        }
        let topo = topological_order(n, seen.iter().copied())?;
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self {
            names,
            parents,
            children,
            edge_count,
            topo,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Directed edges (parent, child), sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, cs) in self.children.iter().enumerate() {
            for &v in cs {
                out.push((u, v));
            }
        }
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && self.children[u].binary_search(&v).is_ok()
    }

    pub fn parents(&self, v: NodeId) -> &[NodeId] {
        &self.parents[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.parents[v].len()
    }

    /// A topological order (parents before children), fixed at construction.
    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }
}

/// An undirected graph over named variables; adjacency is symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    names: Vec<String>,
    adjacency: Vec<BTreeSet<NodeId>>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

fn unordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Skeleton {
    pub fn new(
        names: Vec<String>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let n = names.len();
        let mut adjacency: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !set.insert(unordered(u, v)) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
            adjacency[u].insert(v);
            adjacency[v].insert(u);
        }
        Ok(Self {
            names,
            adjacency,
            edges: set,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Unordered edges, canonicalized as (min, max).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains(&unordered(u, v))
    }

    pub fn neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[v]
    }
}

/// An unshielded triple ⟨X,T,Y⟩: X–T and T–Y adjacent, X and Y not.
/// Stored canonically with `x < y`, so ⟨X,T,Y⟩ and ⟨Y,T,X⟩ compare equal.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct UnshieldedTriple {
    pub x: NodeId,
    pub t: NodeId,
    pub y: NodeId,
}

impl UnshieldedTriple {
    pub fn new(a: NodeId, t: NodeId, b: NodeId) -> Self {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        Self { x, t, y }
    }

    /// The two arrows this triple would orient as a v-structure.
    pub fn arrows(&self) -> [(NodeId, NodeId); 2] {
        [(self.x, self.t), (self.y, self.t)]
    }
}

/// A partially directed graph; with both orientation closure and the
/// v-structure set of an equivalence class it serves as a CPDAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdag {
    names: Vec<String>,
    directed: BTreeSet<(NodeId, NodeId)>,
    undirected: BTreeSet<(NodeId, NodeId)>,
}

impl Pdag {
    /// Builds a PDAG, rejecting self loops, pairs that are both directed and
    /// undirected, opposite directed duplicates, and directed cycles.
    pub fn new(
        names: Vec<String>,
        directed: impl IntoIterator<Item = (NodeId, NodeId)>,
        undirected: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let n = names.len();
        let mut dir = BTreeSet::new();
        for (u, v) in directed {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if dir.contains(&(v, u)) {
                return Err(GraphError::OrientationConflict(u, v));
            }
            if !dir.insert((u, v)) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
        }
        let mut und = BTreeSet::new();
        for (u, v) in undirected {
            check_node(u, n)?;
            check_node(v, n)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !und.insert(unordered(u, v)) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
        }
        for &(u, v) in &dir {
            if und.contains(&unordered(u, v)) {
                return Err(GraphError::MixedEdge(u, v));
            }
        }
        topological_order(n, dir.iter().copied())?;
        Ok(Self {
            names,
            directed: dir,
            undirected: und,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.directed.iter().copied()
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.undirected.iter().copied()
    }

    pub fn directed_count(&self) -> usize {
        self.directed.len()
    }

    pub fn undirected_count(&self) -> usize {
        self.undirected.len()
    }

    pub fn has_directed(&self, u: NodeId, v: NodeId) -> bool {
        self.directed.contains(&(u, v))
    }

    pub fn has_undirected(&self, u: NodeId, v: NodeId) -> bool {
        self.undirected.contains(&unordered(u, v))
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.has_undirected(u, v) || self.has_directed(u, v) || self.has_directed(v, u)
    }

    /// The underlying adjacency structure with directions dropped.
    pub fn skeleton(&self) -> Skeleton {
        let edges = self
            .directed
            .iter()
            .map(|&(u, v)| unordered(u, v))
            .chain(self.undirected.iter().copied());
        Skeleton::new(self.names.clone(), edges).expect("pdag adjacency is a valid skeleton")
    }

    /// A fully undirected PDAG over the given skeleton.
    pub fn from_skeleton(skel: &Skeleton) -> Self {
        Pdag::new(skel.names().to_vec(), [], skel.edges()).expect("skeleton is a valid pdag")
    }
}

/// The undirected graph of a DAG: its edge set with directions dropped.
pub fn skeleton_of(dag: &Dag) -> Skeleton {
    Skeleton::new(dag.names().to_vec(), dag.edges()).expect("dag adjacency is a valid skeleton")
}

/// All unshielded triples of a skeleton, deduplicated under (x, y) swap and
/// sorted by (x, t, y).
pub fn unshielded_triples(skel: &Skeleton) -> Vec<UnshieldedTriple> {
    let mut out = Vec::new();
    for t in 0..skel.node_count() {
        let nbrs: Vec<NodeId> = skel.neighbors(t).iter().copied().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if !skel.adjacent(a, b) {
                    out.push(UnshieldedTriple::new(a, t, b));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// The v-structures of a DAG: unshielded triples whose endpoints are both
/// parents of the center.
pub fn v_structures_of(dag: &Dag) -> BTreeSet<UnshieldedTriple> {
    let skel = skeleton_of(dag);
    unshielded_triples(&skel)
        .into_iter()
        .filter(|ut| dag.has_edge(ut.x, ut.t) && dag.has_edge(ut.y, ut.t))
        .collect()
}

/// The CPDAG of a DAG: its skeleton with v-structure arrows kept and the
/// orientation closed under Meek's rules.
pub fn cpdag_of(dag: &Dag) -> Pdag {
    let skel = skeleton_of(dag);
    let mut directed: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for ut in v_structures_of(dag) {
        directed.insert((ut.x, ut.t));
        directed.insert((ut.y, ut.t));
    }
    let undirected: Vec<(NodeId, NodeId)> = skel
        .edges()
        .filter(|&(u, v)| !directed.contains(&(u, v)) && !directed.contains(&(v, u)))
        .collect();
    let pdag = Pdag::new(dag.names().to_vec(), directed, undirected)
        .expect("v-structure arrows of a dag are consistent");
    meek_closure(&pdag).expect("meek closure cannot conflict on a dag's own v-structures")
}
