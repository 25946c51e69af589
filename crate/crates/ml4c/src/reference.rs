//! Slow, exhaustive reference implementations used by the test suites to
//! cross-check the fast algorithms: path-enumeration d-separation,
//! equivalence-class CPDAG construction by brute force, covered-edge
//! reversal, and small combinatorial helpers. Nothing here is called by the
//! production pipeline.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Dag, NodeId, Pdag};

/// All subsets of `pool` with at most `max_size` elements, ordered by size
/// then lexicographically.
pub fn subsets_up_to(pool: &[NodeId], max_size: usize) -> Vec<BTreeSet<NodeId>> {
    let mut out = vec![BTreeSet::new()];
    let mut current: Vec<NodeId> = Vec::new();
    fn rec(
        pool: &[NodeId],
        start: usize,
        left: usize,
        current: &mut Vec<NodeId>,
        out: &mut Vec<BTreeSet<NodeId>>,
    ) {
        if left == 0 {
            out.push(current.iter().copied().collect());
            return;
        }
        for i in start..pool.len() {
            current.push(pool[i]);
            rec(pool, i + 1, left - 1, current, out);
            current.pop();
        }
    }
    for k in 1..=max_size.min(pool.len()) {
        rec(pool, 0, k, &mut current, &mut out);
    }
    out
}

/// Random DAG: a random node permutation with each forward pair kept as an
/// edge with probability `edge_prob`.
pub fn random_dag<R: Rng>(n: usize, edge_prob: f64, rng: &mut R) -> Dag {
    let mut perm: Vec<NodeId> = (0..n).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    let names = (0..n).map(|i| format!("V{i}")).collect();
    Dag::new(names, edges).expect("forward-oriented pairs are acyclic")
}

fn descendants(dag: &Dag, v: NodeId) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &c in dag.children(u) {
            if out.insert(c) {
                stack.push(c);
            }
        }
    }
    out
}

fn all_simple_paths(dag: &Dag, x: NodeId, y: NodeId) -> Vec<Vec<NodeId>> {
    let n = dag.node_count();
    let mut nbrs: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    for (u, v) in dag.edges() {
        nbrs[u].insert(v);
        nbrs[v].insert(u);
    }
    let mut paths = Vec::new();
    let mut path = vec![x];
    let mut on_path = vec![false; n];
    on_path[x] = true;
    fn rec(
        nbrs: &[BTreeSet<NodeId>],
        y: NodeId,
        path: &mut Vec<NodeId>,
        on_path: &mut Vec<bool>,
        paths: &mut Vec<Vec<NodeId>>,
    ) {
        let last = *path.last().unwrap();
        if last == y {
            paths.push(path.clone());
            return;
        }
        for &next in &nbrs[last] {
            if !on_path[next] {
                path.push(next);
                on_path[next] = true;
                rec(nbrs, y, path, on_path, paths);
                path.pop();
                on_path[next] = false;
            }
        }
    }
    rec(&nbrs, y, &mut path, &mut on_path, &mut paths);
    paths
}

/// d-separation by enumerating every simple path and applying the blocking
/// rules node by node.
pub fn d_separated_by_paths(dag: &Dag, x: NodeId, y: NodeId, z: &BTreeSet<NodeId>) -> bool {
    for path in all_simple_paths(dag, x, y) {
        let mut blocked = false;
        for i in 1..path.len() - 1 {
            let (prev, w, next) = (path[i - 1], path[i], path[i + 1]);
            let collider = dag.has_edge(prev, w) && dag.has_edge(next, w);
            if collider {
                let opens = z.contains(&w) || descendants(dag, w).iter().any(|d| z.contains(d));
                if !opens {
                    blocked = true;
                    break;
                }
            } else if z.contains(&w) {
                blocked = true;
                break;
            }
        }
        if !blocked {
            return false;
        }
    }
    true
}

/// Every DAG sharing `dag`'s skeleton and v-structure set, found by trying
/// all 2^m orientations of the skeleton.
pub fn equivalence_class(dag: &Dag) -> Vec<Dag> {
    let skel_edges: Vec<(NodeId, NodeId)> = crate::graph::skeleton_of(dag).edges().collect();
    let m = skel_edges.len();
    assert!(
        m <= 20,
        "equivalence-class enumeration is exponential in edges"
    );
    let target_v = crate::graph::v_structures_of(dag);
    let names = dag.names().to_vec();
    let mut class = Vec::new();
    for mask in 0u32..(1 << m) {
        let edges: Vec<(NodeId, NodeId)> = skel_edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| if mask >> i & 1 == 0 { (u, v) } else { (v, u) })
            .collect();
        let Ok(candidate) = Dag::new(names.clone(), edges) else {
            continue;
        };
        if crate::graph::v_structures_of(&candidate) == target_v {
            class.push(candidate);
        }
    }
    class
}

/// CPDAG as the intersection of orientations over the whole Markov
/// equivalence class: arrows present in every member stay directed,
/// everything else is undirected.
pub fn cpdag_by_enumeration(dag: &Dag) -> Pdag {
    let class = equivalence_class(dag);
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for (u, v) in dag.edges() {
        if class.iter().all(|g| g.has_edge(u, v)) {
            directed.push((u, v));
        } else {
            undirected.push((u, v));
        }
    }
    Pdag::new(dag.names().to_vec(), directed, undirected)
        .expect("intersection of an equivalence class is a valid pdag")
}

/// Edges x→y with parents(y) = parents(x) ∪ {x}; reversing one yields a
/// Markov-equivalent DAG.
pub fn covered_edges(dag: &Dag) -> Vec<(NodeId, NodeId)> {
    dag.edges()
        .into_iter()
        .filter(|&(x, y)| {
            let mut expect: BTreeSet<NodeId> = dag.parents(x).iter().copied().collect();
            expect.insert(x);
            let pa_y: BTreeSet<NodeId> = dag.parents(y).iter().copied().collect();
            expect == pa_y
        })
        .collect()
}

/// Reverses a uniformly chosen covered edge, or `None` when the DAG has none.
pub fn reverse_random_covered_edge<R: Rng>(dag: &Dag, rng: &mut R) -> Option<Dag> {
    let covered = covered_edges(dag);
    if covered.is_empty() {
        return None;
    }
    let &(x, y) = &covered[rng.random_range(0..covered.len())];
    let edges: Vec<(NodeId, NodeId)> = dag
        .edges()
        .into_iter()
        .map(|(u, v)| if (u, v) == (x, y) { (y, x) } else { (u, v) })
        .collect();
    Some(Dag::new(dag.names().to_vec(), edges).expect("covered-edge reversal stays acyclic"))
}
