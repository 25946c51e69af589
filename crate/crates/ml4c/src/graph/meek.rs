//! Meek's orientation rules R1–R4, applied to a fixpoint.
//!
//! Each sweep scans all rule instances against the frozen graph and collects
//! the demanded orientations; opposite demands for the same edge raise
//! `OrientationConflict`. On inputs whose v-structures come from an actual
//! DAG the closure is confluent and conflict-free.

use std::collections::{BTreeMap, BTreeSet};

use super::{GraphError, NodeId, Pdag};

/// Demanded orientations of one sweep, keyed by unordered edge.
type Demands = BTreeMap<(NodeId, NodeId), (NodeId, NodeId)>;

struct Working {
    n: usize,
    directed: BTreeSet<(NodeId, NodeId)>,
    undirected: BTreeSet<(NodeId, NodeId)>,
    parents: Vec<BTreeSet<NodeId>>,
    children: Vec<BTreeSet<NodeId>>,
    und_nbrs: Vec<BTreeSet<NodeId>>,
}

impl Working {
    fn from_pdag(pdag: &Pdag) -> Self {
        let n = pdag.node_count();
        let mut w = Working {
            n,
            directed: pdag.directed_edges().collect(),
            undirected: pdag.undirected_edges().collect(),
            parents: vec![BTreeSet::new(); n],
            children: vec![BTreeSet::new(); n],
            und_nbrs: vec![BTreeSet::new(); n],
        };
        for (u, v) in pdag.directed_edges() {
            w.children[u].insert(v);
            w.parents[v].insert(u);
        }
        for (u, v) in pdag.undirected_edges() {
            w.und_nbrs[u].insert(v);
            w.und_nbrs[v].insert(u);
        }
        w
    }

    fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.children[u].contains(&v)
            || self.parents[u].contains(&v)
            || self.und_nbrs[u].contains(&v)
    }

    fn orient(&mut self, u: NodeId, v: NodeId) {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.undirected.remove(&key);
        self.und_nbrs[u].remove(&v);
        self.und_nbrs[v].remove(&u);
        self.directed.insert((u, v));
        self.children[u].insert(v);
        self.parents[v].insert(u);
    }

    /// One sweep: every orientation demanded by R1–R4 against the current
    /// graph, keyed by unordered edge.
    fn demands(&self) -> Result<Demands, GraphError> {
        let mut demands = Demands::new();
        let mut demand = |u: NodeId, v: NodeId| -> Result<(), GraphError> {
            let key = if u <= v { (u, v) } else { (v, u) };
            match demands.get(&key) {
                Some(&(du, dv)) if (du, dv) != (u, v) => Err(GraphError::OrientationConflict(u, v)),
                _ => {
                    demands.insert(key, (u, v));
                    Ok(())
                }
            }
        };

        // R1: a→b, b–c, a and c nonadjacent  ⇒  b→c
        for &(a, b) in &self.directed {
            for &c in &self.und_nbrs[b] {
                if c != a && !self.adjacent(a, c) {
                    demand(b, c)?;
                }
            }
        }
        // R2: a→b→c, a–c  ⇒  a→c
        for &(a, c) in &self.undirected {
            for (from, to) in [(a, c), (c, a)] {
                if self.children[from]
                    .iter()
                    .any(|&b| self.children[b].contains(&to))
                {
                    demand(from, to)?;
                }
            }
        }
        // R3: a–b, a–c, a–d, c→b, d→b, c and d nonadjacent  ⇒  a→b
        for &(p, q) in &self.undirected {
            for (a, b) in [(p, q), (q, p)] {
                let cands: Vec<NodeId> = self.und_nbrs[a]
                    .iter()
                    .copied()
                    .filter(|&c| c != b && self.children[c].contains(&b))
                    .collect();
                let fires = cands
                    .iter()
                    .enumerate()
                    .any(|(i, &c)| cands[i + 1..].iter().any(|&d| !self.adjacent(c, d)));
                if fires {
                    demand(a, b)?;
                }
            }
        }
        // R4: a–b, a–c, c→d, d→b, c and b nonadjacent, a and d adjacent  ⇒  a→b
        for &(p, q) in &self.undirected {
            for (a, b) in [(p, q), (q, p)] {
                let fires = self.und_nbrs[a].iter().any(|&c| {
                    c != b
                        && !self.adjacent(c, b)
                        && self.children[c].iter().any(|&d| {
                            d != a && d != b && self.children[d].contains(&b) && self.adjacent(a, d)
                        })
                });
                if fires {
                    demand(a, b)?;
                }
            }
        }
        Ok(demands)
    }
}

/// Applies Meek rules R1–R4 until no undirected edge remains orientable.
/// The skeleton is unchanged; only undirected edges gain direction.
pub fn meek_closure(pdag: &Pdag) -> Result<Pdag, GraphError> {
    let mut w = Working::from_pdag(pdag);
    loop {
        let demands = w.demands()?;
        if demands.is_empty() {
            break;
        }
        for (_, (u, v)) in demands {
            w.orient(u, v);
        }
    }
    let n = w.n;
    Pdag::new(
        pdag.names().to_vec(),
        w.directed.iter().copied().collect::<Vec<_>>(),
        w.undirected.iter().copied().collect::<Vec<_>>(),
    )
    .map_err(|e| match e {
        // A cycle here means the input's directed part was inconsistent with
        // its own closure; surface it as a conflict on some edge.
        GraphError::CycleDetected => GraphError::InvalidNodes(format!(
            "meek closure produced a directed cycle over {n} nodes"
        )),
        other => other,
    })
}
