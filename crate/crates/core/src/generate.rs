//! Seed-deterministic graph generators. Every generator is a pure function
//! of `(spec, seed)`, so any experiment built on one is replayable.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::digraph::{Digraph, GraphError};

/// Named graphs used by the impossibility constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// Figure 1(a): the directed 3-cycle a→b→c→a.
    SystemA,
    /// Figure 1(b): the 3-cycle plus the tail a→b′→c′.
    SystemB,
}

impl Fixture {
    pub fn name(self) -> &'static str {
        match self {
            Fixture::SystemA => "system-a",
            Fixture::SystemB => "system-b",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    DirectedCycle { n: usize },
    Path { n: usize },
    RandomDigraph { n: usize, edge_probability: f64 },
    RandomStronglyConnected { n: usize, extra_edges: usize },
    DagOfCliques { shape: Vec<usize> },
    Fixture(Fixture),
}

impl GeneratorSpec {
    fn validate(&self) -> Result<(), GraphError> {
        match self {
            GeneratorSpec::DirectedCycle { n } | GeneratorSpec::Path { n } => {
                if *n == 0 {
                    return Err(GraphError::Empty);
                }
            }
            GeneratorSpec::RandomDigraph {
                n,
                edge_probability,
            } => {
                if *n == 0 {
                    return Err(GraphError::Empty);
                }
                if !(0.0..=1.0).contains(edge_probability) || edge_probability.is_nan() {
                    return Err(GraphError::InvalidProbability(*edge_probability));
                }
            }
            GeneratorSpec::RandomStronglyConnected { n, .. } => {
                if *n == 0 {
                    return Err(GraphError::Empty);
                }
            }
            GeneratorSpec::DagOfCliques { shape } => {
                if shape.is_empty() || shape.contains(&0) {
                    return Err(GraphError::InvalidShape);
                }
            }
            GeneratorSpec::Fixture(_) => {}
        }
        Ok(())
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::DirectedCycle { n } => write!(f, "cycle:{n}"),
            GeneratorSpec::Path { n } => write!(f, "path:{n}"),
            GeneratorSpec::RandomDigraph {
                n,
                edge_probability,
            } => {
                write!(f, "random:{n}:{edge_probability}")
            }
            GeneratorSpec::RandomStronglyConnected { n, extra_edges } => {
                write!(f, "strong:{n}:{extra_edges}")
            }
            GeneratorSpec::DagOfCliques { shape } => {
                let parts: Vec<String> = shape.iter().map(|s| s.to_string()).collect();
                write!(f, "cliques:{}", parts.join(","))
            }
            GeneratorSpec::Fixture(fx) => write!(f, "fixture:{}", fx.name()),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = GraphError;

    /// Grammar: `cycle:N`, `path:N`, `random:N:P`, `strong:N:EXTRA`,
    /// `cliques:A,B,..`, `fixture:NAME`. Long aliases `directed-cycle`,
    /// `random-digraph`, `random-strongly-connected` and `dag-of-cliques`
    /// are accepted too.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::Parse(format!("bad generator spec `{s}`"));
        let mut parts = s.split(':');
        let head = parts.next().ok_or_else(bad)?;
        let rest: Vec<&str> = parts.collect();
        let parse_usize = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let spec = match (head, rest.as_slice()) {
            ("cycle" | "directed-cycle", [n]) => {
                GeneratorSpec::DirectedCycle { n: parse_usize(n)? }
            }
            ("path", [n]) => GeneratorSpec::Path { n: parse_usize(n)? },
            ("random" | "random-digraph", [n, p]) => GeneratorSpec::RandomDigraph {
                n: parse_usize(n)?,
                edge_probability: p.parse::<f64>().map_err(|_| bad())?,
            },
            ("strong" | "random-strongly-connected", [n, extra]) => {
                GeneratorSpec::RandomStronglyConnected {
                    n: parse_usize(n)?,
                    extra_edges: parse_usize(extra)?,
                }
            }
            ("cliques" | "dag-of-cliques", [shape]) => GeneratorSpec::DagOfCliques {
                shape: shape
                    .split(',')
                    .map(parse_usize)
                    .collect::<Result<Vec<_>, _>>()?,
            },
            ("fixture", [name]) => match *name {
                "system-a" => GeneratorSpec::Fixture(Fixture::SystemA),
                "system-b" => GeneratorSpec::Fixture(Fixture::SystemB),
                other => return Err(GraphError::UnknownFixture(other.to_string())),
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Builds the graph described by `spec`. Two calls with the same `(spec, seed)`
/// produce identical edge sets.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Digraph, GraphError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        GeneratorSpec::DirectedCycle { n } => {
            let edges: Vec<(usize, usize)> = if *n > 1 {
                (0..*n).map(|i| (i, (i + 1) % n)).collect()
            } else {
                Vec::new()
            };
            Digraph::new(*n, edges)
        }
        GeneratorSpec::Path { n } => Digraph::new(*n, (0..n.saturating_sub(1)).map(|i| (i, i + 1))),
        GeneratorSpec::RandomDigraph {
            n,
            edge_probability,
        } => {
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in 0..*n {
                    if i != j && rng.random_bool(*edge_probability) {
                        edges.push((i, j));
                    }
                }
            }
            Digraph::new(*n, edges)
        }
        GeneratorSpec::RandomStronglyConnected { n, extra_edges } => {
            // A random Hamiltonian cycle guarantees strong connectivity.
            let mut order: Vec<usize> = (0..*n).collect();
            order.shuffle(&mut rng);
            let mut edges: Vec<(usize, usize)> = if *n > 1 {
                (0..*n).map(|k| (order[k], order[(k + 1) % n])).collect()
            } else {
                Vec::new()
            };
            let mut added = 0;
            let mut attempts = 0;
            while added < *extra_edges && attempts < extra_edges * 20 + 100 {
                attempts += 1;
                if *n < 2 {
                    break;
                }
                let src = rng.random_range(0..*n);
                let dst = rng.random_range(0..*n);
                if src != dst && !edges.contains(&(src, dst)) {
                    edges.push((src, dst));
                    added += 1;
                }
            }
            let g = Digraph::new(*n, edges)?;
            assert!(
                g.condense().is_single_component(),
                "generator postcondition"
            );
            Ok(g)
        }
        GeneratorSpec::DagOfCliques { shape } => {
            let mut edges = Vec::new();
            let mut base = 0;
            let mut prev: Option<(usize, usize)> = None; // (base, size) of previous clique
            for &size in shape {
                for i in 0..size {
                    for j in 0..size {
                        if i != j {
                            edges.push((base + i, base + j));
                        }
                    }
                }
                if let Some((pbase, psize)) = prev {
                    let src = pbase + rng.random_range(0..psize);
                    let dst = base + rng.random_range(0..size);
                    edges.push((src, dst));
                }
                prev = Some((base, size));
                base += size;
            }
            Digraph::new(base, edges)
        }
        GeneratorSpec::Fixture(fx) => fixture(*fx),
    }
}

pub fn fixture(fx: Fixture) -> Result<Digraph, GraphError> {
    match fx {
        Fixture::SystemA => Digraph::new(3, [(0, 1), (1, 2), (2, 0)]),
        Fixture::SystemB => Digraph::new(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4)]),
    }
}
