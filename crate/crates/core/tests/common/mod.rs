//! Shared helpers for the integration and acceptance suites.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use unimis::bitstring::BitString;
use unimis::digraph::{Digraph, ProcessId};
use unimis::protocols::naming::local_naming_holds;
use unimis::runtime::{mis_outputs, Configuration, Protocol, SchedulerKind, Simulation, Trace};
use unimis::umis::MisVector;

/// Random digraph on `n` nodes with edge probability `p`, deterministic in
/// the rng state.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Digraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Digraph::new(n, edges).expect("generated edges are valid")
}

/// Digraph decoded from a bitmask over the n(n-1) ordered non-diagonal
/// pairs, for exhaustive enumeration.
pub fn digraph_from_mask(n: usize, mask: u64) -> Digraph {
    let mut edges = Vec::new();
    let mut bit = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if mask & (1 << bit) != 0 {
                    edges.push((i, j));
                }
                bit += 1;
            }
        }
    }
    Digraph::new(n, edges).expect("mask edges are valid")
}

/// Distinct random bit strings of uniform length, long enough to be unique.
pub fn distinct_bitstrings(rng: &mut ChaCha8Rng, n: usize) -> Vec<BitString> {
    let len = (usize::BITS - n.leading_zeros()) as usize + 3;
    let mut out: Vec<BitString> = Vec::with_capacity(n);
    while out.len() < n {
        let candidate = BitString::from_bits((0..len).map(|_| rng.random_bool(0.5)));
        if !out.contains(&candidate) {
            out.push(candidate);
        }
    }
    out
}

/// A locally-named assignment: distinct ids, then deliberate collisions
/// injected across mutually unreachable pairs so the merging path is
/// exercised too. Each collision is kept only if the assignment still
/// satisfies local naming (a collision may conflict with an earlier one).
pub fn locally_named_ids(rng: &mut ChaCha8Rng, g: &Digraph) -> Vec<BitString> {
    let mut ids = distinct_bitstrings(rng, g.n());
    let mut unreachable_pairs = Vec::new();
    for i in g.process_ids() {
        let from_i = g.distances_from(i);
        for j in g.process_ids() {
            if j > i && !from_i[j.index()].is_finite() && !g.distance(j, i).is_finite() {
                unreachable_pairs.push((i, j));
            }
        }
    }
    for &(i, j) in unreachable_pairs.iter().take(4) {
        if rng.random_bool(0.5) {
            let saved = ids[j.index()].clone();
            ids[j.index()] = ids[i.index()].clone();
            if !local_naming_holds(g, &ids) {
                ids[j.index()] = saved;
            }
        }
    }
    ids
}

/// Incrementally extended run with window-based output-stability detection.
pub struct StableRun<S> {
    pub configs: Vec<Configuration<S>>,
    pub activations: Vec<Vec<ProcessId>>,
    pub boundaries: Vec<usize>,
    pub outputs: Vec<MisVector>,
    /// Earliest round whose output vector holds for `window` further rounds.
    pub stable_round: Option<usize>,
    pub rounds_run: usize,
    pub peak_state_bits: usize,
    pub seed: u64,
    pub scheduler: SchedulerKind,
}

impl<S: Clone + Eq + std::fmt::Debug> StableRun<S> {
    pub fn stable_outputs(&self) -> Option<&MisVector> {
        self.stable_round.map(|r| {
            let idx = if r == 0 { 0 } else { self.boundaries[r - 1] };
            &self.outputs[idx]
        })
    }

    pub fn into_trace(self) -> Trace<S> {
        Trace::from_parts(
            self.seed,
            self.scheduler,
            self.configs,
            self.activations,
            self.boundaries,
        )
    }
}

fn first_stable_round(
    outputs: &[MisVector],
    boundaries: &[usize],
    window: usize,
    accept: &dyn Fn(&MisVector) -> bool,
) -> Option<usize> {
    if boundaries.len() < window {
        return None;
    }
    let cfg_of = |r: usize| if r == 0 { 0 } else { boundaries[r - 1] };
    (0..=boundaries.len() - window).find(|&r| {
        let (lo, hi) = (cfg_of(r), cfg_of(r + window));
        accept(&outputs[lo]) && outputs[lo..=hi].iter().all(|v| *v == outputs[lo])
    })
}

/// Drives a simulation until the output vector has been identical for
/// `window` consecutive rounds (checked after every chunk of rounds) or
/// `max_rounds` rounds have run. Transient constant-but-illegal windows can
/// occur while identifiers are still disambiguating, so stability is only
/// declared on vectors the `accept` predicate blesses — pass the UMIS
/// validity check for convergence measurements.
#[allow(clippy::too_many_arguments)]
pub fn run_until_stable<P: Protocol>(
    protocol: &P,
    g: &Digraph,
    initial: Configuration<P::State>,
    scheduler: SchedulerKind,
    seed: u64,
    window: usize,
    max_rounds: usize,
    accept: impl Fn(&MisVector) -> bool,
) -> StableRun<P::State> {
    let mut sim = Simulation::new(protocol, g, initial.clone(), scheduler, seed)
        .expect("scheduler and protocol must be compatible");
    let per_process_bits = |c: &Configuration<P::State>| {
        c.states()
            .iter()
            .map(|s| protocol.state_size_bits(s))
            .max()
            .unwrap_or(0)
    };
    let mut configs = vec![initial.clone()];
    let mut activations = Vec::new();
    let mut boundaries = Vec::new();
    let mut outputs = vec![mis_outputs(protocol, g, &initial)];
    let mut peak = per_process_bits(&initial);
    let chunk = 16;
    let mut stable = None;
    while stable.is_none() && sim.rounds_completed() < max_rounds + window && !sim.is_terminal() {
        let target = (sim.rounds_completed() + chunk).min(max_rounds + window);
        while sim.rounds_completed() < target && !sim.is_terminal() {
            let ev = sim.step();
            if ev.activated.is_empty() {
                break;
            }
            configs.push(sim.current().clone());
            activations.push(ev.activated);
            outputs.push(mis_outputs(protocol, g, sim.current()));
            peak = peak.max(per_process_bits(sim.current()));
            if ev.completed_round {
                boundaries.push(configs.len() - 1);
            }
        }
        stable = first_stable_round(&outputs, &boundaries, window, &accept);
    }
    StableRun {
        configs,
        activations,
        boundaries,
        outputs,
        stable_round: stable,
        rounds_run: sim.rounds_completed(),
        peak_state_bits: peak,
        seed,
        scheduler,
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn log2(x: f64) -> f64 {
    x.log2()
}
