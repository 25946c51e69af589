//! d-separation by linear-time reachability over (node, travel direction)
//! states. An exhaustive path-enumeration oracle lives in `crate::reference`
//! and backs the tests.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use super::{Dag, GraphError, NodeId};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Entered from a child; the trail may continue through parents or turn
    /// down through children.
    Up,
    /// Entered from a parent; the trail continues down unless blocked, and
    /// may bounce back up at a conditioned collider.
    Down,
}

/// True iff every path between `x` and `y` is blocked by `z`: non-colliders
/// block when conditioned, colliders block unless they (or a descendant) are
/// conditioned.
pub fn d_separated(
    dag: &Dag,
    x: NodeId,
    y: NodeId,
    z: &BTreeSet<NodeId>,
) -> Result<bool, GraphError> {
    let n = dag.node_count();
    for &v in [x, y].iter().chain(z.iter()) {
        if v >= n {
            return Err(GraphError::InvalidNode {
                index: v,
                node_count: n,
            });
        }
    }
    if x == y {
        return Err(GraphError::InvalidNodes("x and y must differ".into()));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(GraphError::InvalidNodes("x and y must not be in z".into()));
    }

    // Nodes with a descendant in z (including z itself); these open colliders.
    let mut anc_of_z = vec![false; n];
    let mut queue: VecDeque<NodeId> = z.iter().copied().collect();
    for &v in z {
        anc_of_z[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &p in dag.parents(v) {
            if !anc_of_z[p] {
                anc_of_z[p] = true;
                queue.push_back(p);
            }
        }
    }

    let in_z = {
        let mut m = vec![false; n];
        for &v in z {
            m[v] = true;
        }
        m
    };

    let mut visited_up = vec![false; n];
    let mut visited_down = vec![false; n];
    let mut frontier = VecDeque::new();
    frontier.push_back((x, Dir::Up));
    while let Some((v, dir)) = frontier.pop_front() {
        let seen = match dir {
            Dir::Up => &mut visited_up[v],
            Dir::Down => &mut visited_down[v],
        };
        if *seen {
            continue;
        }
        *seen = true;
        if v == y {
            return Ok(false);
        }
        match dir {
            Dir::Up => {
                if !in_z[v] {
                    for &p in dag.parents(v) {
                        frontier.push_back((p, Dir::Up));
                    }
                    for &c in dag.children(v) {
                        frontier.push_back((c, Dir::Down));
                    }
                }
            }
            Dir::Down => {
                if !in_z[v] {
                    for &c in dag.children(v) {
                        frontier.push_back((c, Dir::Down));
                    }
                }
                if anc_of_z[v] {
                    for &p in dag.parents(v) {
                        frontier.push_back((p, Dir::Up));
                    }
                }
            }
        }
    }
    Ok(true)
}
