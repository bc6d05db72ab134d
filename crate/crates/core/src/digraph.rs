//! Directed-graph model of a unidirectional network.
//!
//! Processes are dense integer indices. An edge `(i, j)` means `i` is a
//! predecessor of `j`: `j` can read the variables of `i`, never the other
//! way around. Identifiers, when a protocol has them, live in protocol
//! state, not here.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Index of a process in a [`Digraph`], in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(usize);

impl ProcessId {
    pub fn new(index: usize) -> Self {
        ProcessId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for ProcessId {
    fn from(index: usize) -> Self {
        ProcessId(index)
    }
}

impl fmt::Debug for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Directed distance. Unreachable pairs have a distance of [`Distance::Infinite`],
/// which is an ordinary value, not an error or a sentinel.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one process")]
    Empty,
    #[error("self-loop at process {0}")]
    SelfLoop(usize),
    #[error("edge endpoint {endpoint} out of range for {n} processes")]
    OutOfRange { endpoint: usize, n: usize },
    #[error("edge probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("clique shape must be nonempty with nonzero part sizes")]
    InvalidShape,
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("malformed graph text: {0}")]
    Parse(String),
}

/// A unidirectional network: `n` processes and a set of directed edges over
/// distinct processes. Immutable after construction, so it can be shared
/// freely across concurrently running trials.
#[derive(Clone, PartialEq, Eq)]
pub struct Digraph {
    succ: Vec<Vec<ProcessId>>,
    pred: Vec<Vec<ProcessId>>,
    neighbors: Vec<Vec<ProcessId>>,
    edge_count: usize,
}

impl Digraph {
    /// Builds a graph from an edge list. Rejects self-loops and out-of-range
    /// endpoints; duplicate edges collapse.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (src, dst) in edges {
            if src >= n {
                return Err(GraphError::OutOfRange { endpoint: src, n });
            }
            if dst >= n {
                return Err(GraphError::OutOfRange { endpoint: dst, n });
            }
            if src == dst {
                return Err(GraphError::SelfLoop(src));
            }
            succ[src].push(ProcessId(dst));
            pred[dst].push(ProcessId(src));
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = succ.iter().map(Vec::len).sum();
        let neighbors = (0..n)
            .map(|i| {
                let mut ns: Vec<ProcessId> =
                    succ[i].iter().chain(pred[i].iter()).copied().collect();
                ns.sort_unstable();
                ns.dedup();
                ns
            })
            .collect();
        Ok(Digraph {
            succ,
            pred,
            neighbors,
            edge_count,
        })
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    /// Number of directed edges, written `m` in complexity bounds.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn process_ids(&self) -> impl Iterator<Item = ProcessId> {
        (0..self.n()).map(ProcessId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (ProcessId, ProcessId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(src, dsts)| dsts.iter().map(move |&dst| (ProcessId(src), dst)))
    }

    /// P.i — processes whose variables `i` can read.
    pub fn predecessors(&self, i: ProcessId) -> &[ProcessId] {
        &self.pred[i.0]
    }

    /// S.i — processes that can read `i`'s variables.
    pub fn successors(&self, i: ProcessId) -> &[ProcessId] {
        &self.succ[i.0]
    }

    /// N.i = P.i ∪ S.i.
    pub fn neighbors(&self, i: ProcessId) -> &[ProcessId] {
        &self.neighbors[i.0]
    }

    /// Largest |N.i| over all processes. The locally central scheduler needs
    /// a fairness bound at least this large to be realizable.
    pub fn max_neighbor_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, src: ProcessId, dst: ProcessId) -> bool {
        self.succ[src.0].binary_search(&dst).is_ok()
    }

    /// Shortest directed path lengths from `i` to every process, by BFS.
    pub fn distances_from(&self, i: ProcessId) -> Vec<Distance> {
        let mut dist = vec![Distance::Infinite; self.n()];
        dist[i.0] = Distance::Finite(0);
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            let du = match dist[u.0] {
                Distance::Finite(d) => d,
                Distance::Infinite => unreachable!(),
            };
            for &v in &self.succ[u.0] {
                if dist[v.0] == Distance::Infinite {
                    dist[v.0] = Distance::Finite(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// d(i, j): shortest directed path length; `d(i,i) = 0`, infinite when
    /// `j` is unreachable from `i`.
    pub fn distance(&self, i: ProcessId, j: ProcessId) -> Distance {
        self.distances_from(i)[j.0]
    }

    /// D = max over finite d(i, j). A graph with no edges has diameter 0.
    pub fn diameter(&self) -> usize {
        let mut max = 0;
        for i in self.process_ids() {
            for d in self.distances_from(i) {
                if let Distance::Finite(d) = d {
                    max = max.max(d);
                }
            }
        }
        max
    }

    /// Processes `j ≠ i` with a directed path to `i`.
    pub fn ancestors(&self, i: ProcessId) -> Vec<ProcessId> {
        let mut seen = vec![false; self.n()];
        seen[i.0] = true;
        let mut queue = VecDeque::from([i]);
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            for &v in &self.pred[u.0] {
                if !seen[v.0] {
                    seen[v.0] = true;
                    out.push(v);
                    queue.push_back(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Strongly connected components plus the acyclic component graph.
    pub fn condense(&self) -> Condensation {
        let adj: Vec<Vec<usize>> = self
            .succ
            .iter()
            .map(|list| list.iter().map(|p| p.0).collect())
            .collect();
        let mut comps = tarjan_scc(&adj);
        for comp in &mut comps {
            comp.sort_unstable();
        }
        // Deterministic component numbering: by smallest member.
        comps.sort_by_key(|comp| comp[0]);
        let mut component_of = vec![usize::MAX; self.n()];
        for (cid, comp) in comps.iter().enumerate() {
            for &v in comp {
                component_of[v] = cid;
            }
        }
        let mut dag = vec![Vec::new(); comps.len()];
        let mut has_incoming = vec![false; comps.len()];
        for (src, dst) in self.edges() {
            let (cs, cd) = (component_of[src.0], component_of[dst.0]);
            if cs != cd {
                dag[cs].push(cd);
            }
        }
        for out in &mut dag {
            out.sort_unstable();
            out.dedup();
        }
        for out in &dag {
            for &cd in out {
                has_incoming[cd] = true;
            }
        }
        let sources = (0..comps.len()).filter(|&c| !has_incoming[c]).collect();
        let components = comps
            .into_iter()
            .map(|comp| comp.into_iter().map(ProcessId).collect())
            .collect();
        Condensation {
            component_of,
            components,
            dag,
            sources,
        }
    }

    /// Line-oriented text form: `n <count>` then one `<src> <dst>` per line,
    /// edges sorted. Round-trips bit-exactly through [`Digraph::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\n", self.n());
        for (src, dst) in self.edges() {
            out.push_str(&format!("{src} {dst}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty input".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|_| GraphError::Parse(format!("bad process count `{count}`")))?,
            _ => return Err(GraphError::Parse(format!("bad header `{header}`"))),
        };
        let mut edges = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (src, dst) = match (it.next(), it.next(), it.next()) {
                (Some(s), Some(d), None) => (
                    s.parse::<usize>()
                        .map_err(|_| GraphError::Parse(format!("bad edge line `{line}`")))?,
                    d.parse::<usize>()
                        .map_err(|_| GraphError::Parse(format!("bad edge line `{line}`")))?,
                ),
                _ => return Err(GraphError::Parse(format!("bad edge line `{line}`"))),
            };
            edges.push((src, dst));
        }
        Digraph::new(n, edges)
    }
}

impl fmt::Debug for Digraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Digraph(n={}, edges={:?})",
            self.n(),
            self.edges().collect::<Vec<_>>()
        )
    }
}

/// SCC partition of a [`Digraph`] with its component DAG.
#[derive(Clone, Debug)]
pub struct Condensation {
    component_of: Vec<usize>,
    components: Vec<Vec<ProcessId>>,
    dag: Vec<Vec<usize>>,
    sources: Vec<usize>,
}

impl Condensation {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn component_of(&self, i: ProcessId) -> usize {
        self.component_of[i.index()]
    }

    pub fn members(&self, component: usize) -> &[ProcessId] {
        &self.components[component]
    }

    pub fn components(&self) -> &[Vec<ProcessId>] {
        &self.components
    }

    pub fn dag_successors(&self, component: usize) -> &[usize] {
        &self.dag[component]
    }

    /// Components with no incoming DAG edge. Nonempty for any nonempty graph.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn is_single_component(&self) -> bool {
        self.components.len() == 1
    }
}

/// Tarjan's algorithm over an index adjacency list.
pub(crate) fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: usize,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, st: &mut State<'_>) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &st.adj[v] {
            if st.idx[w].is_none() {
                connect(w, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.idx[w].unwrap());
            }
        }
        if st.low[v] == st.idx[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("tarjan stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.comps.push(comp);
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, &mut st);
        }
    }
    st.comps
}
