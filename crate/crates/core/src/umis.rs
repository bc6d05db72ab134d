//! The UMIS predicate checker and the priority-greedy UMIS computation.
//!
//! `check_umis` is the ground truth every experiment is judged against.
//! `priority_greedy_umis` is the shared identifier-priority construction the
//! identifier-based protocols evaluate on their collected topologies, and it
//! doubles as a desk-scale oracle on full graphs.

use std::collections::{BTreeMap, BTreeSet};

use crate::digraph::{tarjan_scc, Digraph, ProcessId};

/// Per-process boolean output of the `mis` function.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MisVector(Vec<bool>);

impl MisVector {
    pub fn new(outputs: Vec<bool>) -> Self {
        MisVector(outputs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: ProcessId) -> bool {
        self.0[i.index()]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<bool>> for MisVector {
    fn from(v: Vec<bool>) -> Self {
        MisVector(v)
    }
}

impl std::fmt::Display for MisVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Outcome of [`check_umis`]: violations are data, not errors.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum UmisVerdict {
    Valid,
    Violations(Vec<ProcessId>),
}

impl UmisVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, UmisVerdict::Valid)
    }

    pub fn violations(&self) -> &[ProcessId] {
        match self {
            UmisVerdict::Valid => &[],
            UmisVerdict::Violations(v) => v,
        }
    }
}

/// Checks the UMIS predicate over neighbors N.i = P.i ∪ S.i: every process
/// outputs true with all neighbors false, or outputs false with at least one
/// true neighbor.
pub fn check_umis(g: &Digraph, m: &MisVector) -> UmisVerdict {
    assert_eq!(g.n(), m.len(), "mis vector must cover every process");
    let mut violating = Vec::new();
    for i in g.process_ids() {
        let neighbors = g.neighbors(i);
        let ok = if m.get(i) {
            neighbors.iter().all(|&j| !m.get(j))
        } else {
            neighbors.iter().any(|&j| m.get(j))
        };
        if !ok {
            violating.push(i);
        }
    }
    if violating.is_empty() {
        UmisVerdict::Valid
    } else {
        UmisVerdict::Violations(violating)
    }
}

/// Directed graph reconstructed from `(id, predecessor-id-set)` tuples.
///
/// Identifiers mentioned only inside someone's predecessor set become nodes
/// with no known predecessors, so reachability questions stay answerable on
/// half-collected topologies. Multiple tuples carrying the same id merge
/// into a single node whose predecessor set is the union.
#[derive(Clone, Debug)]
pub struct TopologyGraph<I> {
    nodes: Vec<I>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl<I: Ord + Clone> TopologyGraph<I> {
    pub fn from_tuples(tuples: impl IntoIterator<Item = (I, Vec<I>)>) -> Self {
        let tuples: Vec<(I, Vec<I>)> = tuples.into_iter().collect();
        let mut nodes = BTreeSet::new();
        for (id, preds) in &tuples {
            nodes.insert(id.clone());
            for p in preds {
                nodes.insert(p.clone());
            }
        }
        let nodes: Vec<I> = nodes.into_iter().collect();
        let index: BTreeMap<&I, usize> = nodes.iter().enumerate().map(|(k, id)| (id, k)).collect();
        let mut preds = vec![BTreeSet::new(); nodes.len()];
        for (id, ps) in &tuples {
            let v = index[id];
            for p in ps {
                preds[v].insert(index[p]);
            }
        }
        let mut succs = vec![Vec::new(); nodes.len()];
        for (v, ps) in preds.iter().enumerate() {
            for &p in ps {
                succs[p].push(v);
            }
        }
        let preds = preds.into_iter().map(|s| s.into_iter().collect()).collect();
        TopologyGraph {
            nodes,
            preds,
            succs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending identifier order.
    pub fn nodes(&self) -> &[I] {
        &self.nodes
    }

    pub fn contains(&self, id: &I) -> bool {
        self.nodes.binary_search(id).is_ok()
    }

    fn index_of(&self, id: &I) -> Option<usize> {
        self.nodes.binary_search(id).ok()
    }

    /// Identifiers with a directed path to `target` (including `target`).
    pub fn reachable_to(&self, target: &I) -> BTreeSet<I> {
        let Some(t) = self.index_of(target) else {
            return BTreeSet::new();
        };
        self.collect_reachable(t, &self.preds)
    }

    /// Identifiers reachable from `source` by directed paths (including it).
    pub fn reachable_from(&self, source: &I) -> BTreeSet<I> {
        let Some(s) = self.index_of(source) else {
            return BTreeSet::new();
        };
        self.collect_reachable(s, &self.succs)
    }

    fn collect_reachable(&self, start: usize, adj: &[Vec<usize>]) -> BTreeSet<I> {
        let mut seen = vec![false; self.nodes.len()];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|&(_, &s)| s)
            .map(|(v, _)| self.nodes[v].clone())
            .collect()
    }

    fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for (v, ps) in self.preds.iter().enumerate() {
            for &p in ps {
                adj[v].insert(p);
                adj[p].insert(v);
            }
        }
        adj
    }
}

/// Priority-greedy UMIS over a reconstructed topology.
///
/// Repeatedly takes a source strongly connected component of the working
/// graph, scans its identifiers in descending order, keeps each one whose
/// addition leaves the chosen set independent (judged over the full edge set
/// of `t`, both directions), then removes the component. When several source
/// components are available the one holding the largest identifier goes
/// first; the choice does not affect the result.
pub fn priority_greedy_umis<I: Ord + Clone>(t: &TopologyGraph<I>) -> BTreeSet<I> {
    let n = t.node_count();
    let neighbors = t.adjacency();
    let mut alive = vec![true; n];
    let mut chosen = vec![false; n];
    let mut remaining = n;
    while remaining > 0 {
        // SCCs of the alive-induced subgraph.
        let sub: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if alive[v] {
                    t.succs[v].iter().copied().filter(|&w| alive[w]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let comps: Vec<Vec<usize>> = tarjan_scc(&sub)
            .into_iter()
            .filter(|comp| alive[comp[0]])
            .collect();
        let mut comp_of = vec![usize::MAX; n];
        for (cid, comp) in comps.iter().enumerate() {
            for &v in comp {
                comp_of[v] = cid;
            }
        }
        let mut has_incoming = vec![false; comps.len()];
        for v in 0..n {
            if alive[v] {
                for &w in &sub[v] {
                    if comp_of[v] != comp_of[w] {
                        has_incoming[comp_of[w]] = true;
                    }
                }
            }
        }
        // Source component containing the largest identifier; node order is
        // identifier order, so the max index decides.
        let source = comps
            .iter()
            .enumerate()
            .filter(|&(cid, _)| !has_incoming[cid])
            .max_by_key(|(_, comp)| comp.iter().max().copied())
            .map(|(_, comp)| comp.clone())
            .expect("nonempty graph has a source component");
        let mut members = source;
        members.sort_unstable_by(|a, b| b.cmp(a));
        for v in members.iter().copied() {
            if !neighbors[v].iter().any(|&u| chosen[u]) {
                chosen[v] = true;
            }
        }
        for v in members {
            alive[v] = false;
            remaining -= 1;
        }
    }
    (0..n)
        .filter(|&v| chosen[v])
        .map(|v| t.nodes[v].clone())
        .collect()
}

/// Brute-force test: no two members of `s` adjacent and every non-member has
/// a member neighbor, over the undirected closure of `t`'s edges.
pub fn is_maximal_independent<I: Ord + Clone>(t: &TopologyGraph<I>, s: &BTreeSet<I>) -> bool {
    let neighbors = t.adjacency();
    let in_set: Vec<bool> = t.nodes.iter().map(|id| s.contains(id)).collect();
    for v in 0..t.node_count() {
        if in_set[v] {
            if neighbors[v].iter().any(|&u| in_set[u]) {
                return false;
            }
        } else if !neighbors[v].iter().any(|&u| in_set[u]) {
            return false;
        }
    }
    true
}

/// The MIS vector on a full graph whose process `i` carries identifier
/// `ids[i]`: the oracle route for protocol equivalence checks.
pub fn greedy_umis_on_digraph<I: Ord + Clone>(g: &Digraph, ids: &[I]) -> MisVector {
    assert_eq!(g.n(), ids.len());
    let tuples: Vec<(I, Vec<I>)> = g
        .process_ids()
        .map(|i| {
            let preds = g
                .predecessors(i)
                .iter()
                .map(|&p| ids[p.index()].clone())
                .collect();
            (ids[i.index()].clone(), preds)
        })
        .collect();
    let set = priority_greedy_umis(&TopologyGraph::from_tuples(tuples));
    MisVector::new(
        g.process_ids()
            .map(|i| set.contains(&ids[i.index()]))
            .collect(),
    )
}
