//! Self-stabilizing maximal independent set protocols for unidirectional
//! networks, with the round-based simulation runtime used to validate them.
//!
//! A unidirectional network is a directed graph in which a process reads the
//! variables of its predecessors and cannot observe its successors. The UMIS
//! predicate asks every process to output true with all neighbors false, or
//! false with at least one true neighbor — neighbors being predecessors and
//! successors both.
//!
//! The crate provides:
//!
//! - [`digraph`]: the graph model, SCC condensation and seeded generators;
//! - [`runtime`]: guarded-command execution under synchronous, distributed
//!   weakly-fair and locally central schedulers, with round detection,
//!   replayable traces and output-stability detection;
//! - [`umis`]: the UMIS predicate checker and the priority-greedy UMIS
//!   construction shared by the identifier-based protocols;
//! - [`adversary`]: worst-case and randomized initial configurations with
//!   fake-identifier accounting;
//! - [`protocols`]: deterministic UMIS with identifiers, probabilistic UMIS
//!   via ever-growing bit-string identifiers, probabilistic local naming,
//!   and deterministic UMIS over locally-named networks together with the
//!   fair composition of the last two;
//! - [`impossibility`]: the silent- and deterministic-impossibility
//!   constructions as executable regression tests.
//!
//! A complete corrupted-start experiment:
//!
//! ```
//! use unimis::protocols::det::DetProtocol;
//! use unimis::{
//!     check_umis, generate, mis_outputs, run, Adversary, AdversarySpec, GeneratorSpec,
//!     SchedulerKind,
//! };
//!
//! let g = generate(&GeneratorSpec::RandomStronglyConnected { n: 12, extra_edges: 6 }, 1).unwrap();
//! let protocol = DetProtocol::permuted(&g, 42);
//! let adversary = AdversarySpec::corruption(4, 0.8, 7).unwrap();
//! let (start, _fakes) = protocol.initial_configuration(&g, &adversary).unwrap();
//! let trace = run(&protocol, &g, start, SchedulerKind::Synchronous, 99, g.diameter() + 2).unwrap();
//! let outputs = mis_outputs(&protocol, &g, trace.final_config());
//! assert!(check_umis(&g, &outputs).is_valid());
//! ```

pub mod adversary;
pub mod bitstring;
pub mod digraph;
pub mod generate;
pub mod impossibility;
pub mod protocols;
pub mod runtime;
pub mod umis;

pub use adversary::{Adversary, AdversaryError, AdversaryMode, AdversarySpec};
pub use bitstring::BitString;
pub use digraph::{Condensation, Digraph, Distance, GraphError, ProcessId};
pub use generate::{fixture, generate, Fixture, GeneratorSpec};
pub use runtime::{
    detect_stable_output, mark_rounds, mis_outputs, predecessor_states, run, step_with_activation,
    write_trace_text, Configuration, Protocol, RoundMarking, RuntimeError, SchedulerKind,
    Simulation, StepEvent, Trace,
};
pub use umis::{
    check_umis, greedy_umis_on_digraph, is_maximal_independent, priority_greedy_umis, MisVector,
    TopologyGraph, UmisVerdict,
};
