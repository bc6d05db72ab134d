//! Guarded-command execution engine.
//!
//! A protocol is a per-process state machine whose guard and command read
//! only the process's own state and its predecessors' states. The engine
//! advances configurations under one of three schedulers, detects round
//! boundaries, and records replayable traces: a run is a pure function of
//! `(protocol, graph, initial configuration, scheduler, seed)`.
//!
//! Within a step every activated process reads the pre-step configuration
//! and the new states are written simultaneously; the interleaved executions
//! of an asynchronous scheduler are recovered as singleton activation sets.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::digraph::{Digraph, ProcessId};
use crate::umis::MisVector;

/// A self-stabilizing protocol: per-process guard, command and mis output.
///
/// Predecessor states are passed in the same order as
/// [`Digraph::predecessors`], which is how identifier constants stored in a
/// protocol line up with them.
pub trait Protocol {
    type State: Clone + Eq + fmt::Debug;

    /// The all-clear state the `Zeroed` adversary hands out.
    fn zero_state(&self, i: ProcessId) -> Self::State;

    /// Guard: may read only `own` and `preds`.
    fn enabled(&self, i: ProcessId, own: &Self::State, preds: &[&Self::State]) -> bool;

    /// Command: computes the next state from the pre-step snapshot.
    fn execute(
        &self,
        i: ProcessId,
        own: &Self::State,
        preds: &[&Self::State],
        rng: &mut dyn RngCore,
    ) -> Self::State;

    /// The mis function: a pure function of own state, in-degree and
    /// predecessor states.
    fn mis_output(&self, i: ProcessId, own: &Self::State, preds: &[&Self::State]) -> bool;

    /// Measured size of a state under the documented bit accounting.
    fn state_size_bits(&self, state: &Self::State) -> usize;

    /// True for protocols analyzed only under the synchronous scheduler.
    fn requires_synchronous(&self) -> bool {
        false
    }

    /// True when every process of equal in-degree runs identical code with
    /// no identifier constants; such protocols are subject to the sibling
    /// constructions.
    fn uniform_anonymous(&self) -> bool {
        false
    }
}

/// Total assignment of a protocol state to every process.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Configuration<S> {
    states: Vec<S>,
}

impl<S> Configuration<S> {
    pub fn new(states: Vec<S>) -> Self {
        Configuration { states }
    }

    pub fn zeroed<P>(protocol: &P, g: &Digraph) -> Self
    where
        P: Protocol<State = S>,
    {
        Configuration {
            states: g.process_ids().map(|i| protocol.zero_state(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: ProcessId) -> &S {
        &self.states[i.index()]
    }

    /// Mutable access, used by adversaries and state-surgery tests.
    pub fn state_mut(&mut self, i: ProcessId) -> &mut S {
        &mut self.states[i.index()]
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }
}

/// Borrowed predecessor states of `i`, ordered like [`Digraph::predecessors`].
pub fn predecessor_states<'c, S>(g: &Digraph, c: &'c Configuration<S>, i: ProcessId) -> Vec<&'c S> {
    g.predecessors(i).iter().map(|&p| c.state(p)).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SchedulerKind {
    /// Every enabled process executes each step.
    Synchronous,
    /// A uniformly chosen nonempty subset of the enabled processes executes,
    /// with bounded-counter fairness enforcement.
    Distributed { fairness_bound: usize },
    /// As `Distributed`, then thinned so no two activated processes are
    /// neighbors.
    LocallyCentral { fairness_bound: usize },
}

impl SchedulerKind {
    /// Checks the scheduler against a graph. A locally central scheduler can
    /// leave a process unserved for up to max-neighbor-degree steps beyond
    /// the forcing threshold, so its bound must be at least that degree.
    pub fn validate(&self, g: &Digraph) -> Result<(), RuntimeError> {
        match *self {
            SchedulerKind::Synchronous => Ok(()),
            SchedulerKind::Distributed { fairness_bound } => {
                if fairness_bound == 0 {
                    Err(RuntimeError::ZeroFairnessBound)
                } else {
                    Ok(())
                }
            }
            SchedulerKind::LocallyCentral { fairness_bound } => {
                if fairness_bound == 0 {
                    return Err(RuntimeError::ZeroFairnessBound);
                }
                let required = g.max_neighbor_degree();
                if fairness_bound < required {
                    Err(RuntimeError::InfeasibleLocallyCentral {
                        bound: fairness_bound,
                        required,
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_synchronous(&self) -> bool {
        matches!(self, SchedulerKind::Synchronous)
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerKind::Synchronous => write!(f, "sync"),
            SchedulerKind::Distributed { fairness_bound } => write!(f, "dist:{fairness_bound}"),
            SchedulerKind::LocallyCentral { fairness_bound } => {
                write!(f, "local-central:{fairness_bound}")
            }
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("fairness bound must be at least 1")]
    ZeroFairnessBound,
    #[error(
        "locally central scheduling on this graph needs fairness bound >= {required}, got {bound}"
    )]
    InfeasibleLocallyCentral { bound: usize, required: usize },
    #[error("protocol requires the synchronous scheduler")]
    SynchronousRequired,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-(seed, step, lane) generator. Each process draws from its own lane,
/// so one process's consumption never shifts another's stream — that is
/// what makes state-surgery replay exact.
fn derived_rng(seed: u64, step: usize, lane: u64) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ step as u64) ^ lane);
    ChaCha8Rng::seed_from_u64(h)
}

const SCHEDULER_LANE: u64 = u64::MAX;

/// Applies one simultaneous-write step with an explicitly chosen activation
/// set: every activated process reads `c` and the results are installed
/// together. The sibling constructions drive the system with this directly.
pub fn step_with_activation<P: Protocol>(
    protocol: &P,
    g: &Digraph,
    c: &Configuration<P::State>,
    activated: &[ProcessId],
    seed: u64,
    step_index: usize,
) -> Configuration<P::State> {
    let mut states = c.states.clone();
    for &i in activated {
        let preds = predecessor_states(g, c, i);
        let mut rng = derived_rng(seed, step_index, i.index() as u64);
        states[i.index()] = protocol.execute(i, c.state(i), &preds, &mut rng);
    }
    Configuration { states }
}

/// What one call to [`Simulation::step`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEvent {
    /// Activated processes, ascending. Empty means the configuration is
    /// terminal and nothing moved.
    pub activated: Vec<ProcessId>,
    /// True when this step completed an asynchronous round.
    pub completed_round: bool,
}

/// Incremental stepper. Holds only the current configuration, so arbitrarily
/// long runs stay O(state) — [`run`] layers trace recording on top.
pub struct Simulation<'a, P: Protocol> {
    protocol: &'a P,
    graph: &'a Digraph,
    scheduler: SchedulerKind,
    seed: u64,
    config: Configuration<P::State>,
    step_index: usize,
    starve: Vec<usize>,
    force_threshold: usize,
    pending: BTreeSet<usize>,
    rounds_completed: usize,
    terminal: bool,
}

impl<'a, P: Protocol> Simulation<'a, P> {
    pub fn new(
        protocol: &'a P,
        graph: &'a Digraph,
        initial: Configuration<P::State>,
        scheduler: SchedulerKind,
        seed: u64,
    ) -> Result<Self, RuntimeError> {
        assert_eq!(
            initial.len(),
            graph.n(),
            "configuration must cover every process"
        );
        scheduler.validate(graph)?;
        if protocol.requires_synchronous() && !scheduler.is_synchronous() {
            return Err(RuntimeError::SynchronousRequired);
        }
        let force_threshold = match scheduler {
            SchedulerKind::Synchronous => usize::MAX,
            SchedulerKind::Distributed { fairness_bound } => fairness_bound,
            SchedulerKind::LocallyCentral { fairness_bound } => {
                fairness_bound - graph.max_neighbor_degree()
            }
        };
        let mut sim = Simulation {
            protocol,
            graph,
            scheduler,
            seed,
            config: initial,
            step_index: 0,
            starve: vec![0; graph.n()],
            force_threshold,
            pending: BTreeSet::new(),
            rounds_completed: 0,
            terminal: false,
        };
        sim.pending = sim.enabled_set(&sim.config);
        sim.terminal = sim.pending.is_empty();
        Ok(sim)
    }

    pub fn current(&self) -> &Configuration<P::State> {
        &self.config
    }

    pub fn scheduler(&self) -> SchedulerKind {
        self.scheduler
    }

    pub fn steps_taken(&self) -> usize {
        self.step_index
    }

    pub fn rounds_completed(&self) -> usize {
        self.rounds_completed
    }

    /// True once a configuration with no enabled process has been reached.
    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn enabled_set(&self, c: &Configuration<P::State>) -> BTreeSet<usize> {
        self.graph
            .process_ids()
            .filter(|&i| {
                let preds = predecessor_states(self.graph, c, i);
                self.protocol.enabled(i, c.state(i), &preds)
            })
            .map(|i| i.index())
            .collect()
    }

    fn choose_activated(&self, enabled: &BTreeSet<usize>) -> Vec<usize> {
        match self.scheduler {
            SchedulerKind::Synchronous => enabled.iter().copied().collect(),
            SchedulerKind::Distributed { .. } | SchedulerKind::LocallyCentral { .. } => {
                let mut rng = derived_rng(self.seed, self.step_index, SCHEDULER_LANE);
                let candidates = loop {
                    let picked: Vec<usize> = enabled
                        .iter()
                        .copied()
                        .filter(|&i| self.starve[i] >= self.force_threshold || rng.random_bool(0.5))
                        .collect();
                    if !picked.is_empty() {
                        break picked;
                    }
                };
                match self.scheduler {
                    SchedulerKind::LocallyCentral { .. } => self.thin_non_adjacent(candidates),
                    _ => candidates,
                }
            }
        }
    }

    /// Keeps a neighbor-free subset, serving the most-starved candidates
    /// first so the fairness bound survives the thinning.
    fn thin_non_adjacent(&self, mut candidates: Vec<usize>) -> Vec<usize> {
        candidates.sort_by(|&a, &b| self.starve[b].cmp(&self.starve[a]).then(a.cmp(&b)));
        let mut kept: Vec<usize> = Vec::new();
        for c in candidates {
            let adjacent = self
                .graph
                .neighbors(ProcessId::new(c))
                .iter()
                .any(|n| kept.contains(&n.index()));
            if !adjacent {
                kept.push(c);
            }
        }
        kept.sort_unstable();
        kept
    }

    /// Advances one step. All activated processes read the pre-step
    /// configuration; states are written simultaneously.
    pub fn step(&mut self) -> StepEvent {
        if self.terminal {
            return StepEvent {
                activated: Vec::new(),
                completed_round: false,
            };
        }
        let enabled = self.enabled_set(&self.config);
        if enabled.is_empty() {
            self.terminal = true;
            return StepEvent {
                activated: Vec::new(),
                completed_round: false,
            };
        }
        let activated = self.choose_activated(&enabled);
        let activated_ids: Vec<ProcessId> = activated.iter().copied().map(ProcessId::new).collect();
        let next = step_with_activation(
            self.protocol,
            self.graph,
            &self.config,
            &activated_ids,
            self.seed,
            self.step_index,
        );
        for i in 0..self.graph.n() {
            if enabled.contains(&i) && !activated.contains(&i) {
                self.starve[i] += 1;
            } else {
                self.starve[i] = 0;
            }
        }
        self.config = next;
        self.step_index += 1;

        // Round bookkeeping: drop pending processes that acted or are now
        // observed disabled; an empty pending set closes the round.
        for i in &activated {
            self.pending.remove(i);
        }
        let enabled_now = self.enabled_set(&self.config);
        self.pending.retain(|i| enabled_now.contains(i));
        let completed_round = if self.pending.is_empty() {
            self.rounds_completed += 1;
            self.pending = enabled_now;
            if self.pending.is_empty() {
                self.terminal = true;
            }
            true
        } else {
            false
        };
        StepEvent {
            activated: activated_ids,
            completed_round,
        }
    }
}

/// A recorded computation: the configuration sequence, per-step activation
/// sets and round boundaries, replayable from its seed.
#[derive(Clone, Debug)]
pub struct Trace<S> {
    seed: u64,
    scheduler: SchedulerKind,
    configs: Vec<Configuration<S>>,
    activations: Vec<Vec<ProcessId>>,
    round_boundaries: Vec<usize>,
}

impl<S> Trace<S> {
    pub fn from_parts(
        seed: u64,
        scheduler: SchedulerKind,
        configs: Vec<Configuration<S>>,
        activations: Vec<Vec<ProcessId>>,
        round_boundaries: Vec<usize>,
    ) -> Self {
        assert_eq!(configs.len(), activations.len() + 1);
        Trace {
            seed,
            scheduler,
            configs,
            activations,
            round_boundaries,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheduler(&self) -> SchedulerKind {
        self.scheduler
    }

    pub fn steps(&self) -> usize {
        self.activations.len()
    }

    pub fn configs(&self) -> &[Configuration<S>] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> &Configuration<S> {
        &self.configs[index]
    }

    pub fn initial(&self) -> &Configuration<S> {
        &self.configs[0]
    }

    pub fn final_config(&self) -> &Configuration<S> {
        self.configs
            .last()
            .expect("trace holds at least one configuration")
    }

    pub fn activations(&self) -> &[Vec<ProcessId>] {
        &self.activations
    }

    /// Configuration indices ending round 1, 2, ...
    pub fn round_boundaries(&self) -> &[usize] {
        &self.round_boundaries
    }

    /// Number of completed rounds.
    pub fn rounds(&self) -> usize {
        self.round_boundaries.len()
    }

    /// Configuration index at the end of round `r`; round 0 is the initial
    /// configuration.
    pub fn round_config_index(&self, r: usize) -> usize {
        if r == 0 {
            0
        } else {
            self.round_boundaries[r - 1]
        }
    }

    /// True when steps extend past the last completed round.
    pub fn ends_mid_round(&self) -> bool {
        self.round_boundaries.last().copied().unwrap_or(0) < self.steps()
    }

    pub fn into_parts(self) -> (Vec<Configuration<S>>, Vec<Vec<ProcessId>>) {
        (self.configs, self.activations)
    }
}

/// Runs `protocol` from `initial` until `max_rounds` rounds complete or a
/// terminal configuration is reached, recording the whole trace.
pub fn run<P: Protocol>(
    protocol: &P,
    g: &Digraph,
    initial: Configuration<P::State>,
    scheduler: SchedulerKind,
    seed: u64,
    max_rounds: usize,
) -> Result<Trace<P::State>, RuntimeError> {
    assert!(max_rounds >= 1, "max_rounds must be at least 1");
    let mut sim = Simulation::new(protocol, g, initial.clone(), scheduler, seed)?;
    let mut configs = vec![initial];
    let mut activations = Vec::new();
    let mut round_boundaries = Vec::new();
    while !sim.is_terminal() && sim.rounds_completed() < max_rounds {
        let event = sim.step();
        if event.activated.is_empty() {
            break;
        }
        configs.push(sim.current().clone());
        activations.push(event.activated);
        if event.completed_round {
            round_boundaries.push(configs.len() - 1);
        }
    }
    Ok(Trace {
        seed,
        scheduler,
        configs,
        activations,
        round_boundaries,
    })
}

/// Result of [`mark_rounds`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoundMarking {
    pub boundaries: Vec<usize>,
    /// True when the trace ends before the last round completes; callers
    /// extend the run when they need that round.
    pub unterminated: bool,
}

/// Recomputes round boundaries from a trace. Boundary k₁ ends the minimal
/// prefix in which every process enabled at the start has activated or been
/// observed disabled; later boundaries apply the same rule from the previous
/// boundary.
pub fn mark_rounds<P: Protocol>(
    trace: &Trace<P::State>,
    g: &Digraph,
    protocol: &P,
) -> RoundMarking {
    let enabled_at = |idx: usize, i: ProcessId| {
        let c = trace.config(idx);
        let preds = predecessor_states(g, c, i);
        protocol.enabled(i, c.state(i), &preds)
    };
    let steps = trace.steps();
    let mut boundaries = Vec::new();
    let mut start = 0;
    while start < steps {
        let mut pending: BTreeSet<ProcessId> =
            g.process_ids().filter(|&i| enabled_at(start, i)).collect();
        let mut boundary = None;
        for t in start..steps {
            for a in &trace.activations()[t] {
                pending.remove(a);
            }
            pending.retain(|&i| enabled_at(t + 1, i));
            if pending.is_empty() {
                boundary = Some(t + 1);
                break;
            }
        }
        match boundary {
            Some(end) => {
                boundaries.push(end);
                start = end;
            }
            None => {
                return RoundMarking {
                    boundaries,
                    unterminated: true,
                }
            }
        }
    }
    RoundMarking {
        boundaries,
        unterminated: false,
    }
}

/// Evaluates the mis function of every process on one configuration.
pub fn mis_outputs<P: Protocol>(
    protocol: &P,
    g: &Digraph,
    c: &Configuration<P::State>,
) -> MisVector {
    MisVector::new(
        g.process_ids()
            .map(|i| {
                let preds = predecessor_states(g, c, i);
                protocol.mis_output(i, c.state(i), &preds)
            })
            .collect(),
    )
}

/// Earliest round `r` whose mis-output vector is identical across every
/// configuration from round `r` through round `r + window`. Stabilization is
/// judged on outputs because the protocols here are not silent: internal
/// state may keep changing forever.
pub fn detect_stable_output<P: Protocol>(
    trace: &Trace<P::State>,
    window: usize,
    g: &Digraph,
    protocol: &P,
) -> Option<usize> {
    assert!(window >= 1, "window must be at least 1");
    if trace.rounds() < window {
        return None;
    }
    let outputs: Vec<MisVector> = trace
        .configs()
        .iter()
        .map(|c| mis_outputs(protocol, g, c))
        .collect();
    for r in 0..=trace.rounds() - window {
        let lo = trace.round_config_index(r);
        let hi = trace.round_config_index(r + window);
        if outputs[lo..=hi].iter().all(|v| *v == outputs[lo]) {
            return Some(r);
        }
    }
    None
}

/// Writes a trace as structured text: one record per step with the step
/// index, the activated set and the post-step mis outputs.
pub fn write_trace_text<P: Protocol, W: Write>(
    mut w: W,
    trace: &Trace<P::State>,
    g: &Digraph,
    protocol: &P,
) -> io::Result<()> {
    writeln!(
        w,
        "# seed={} scheduler={} processes={} steps={} rounds={}",
        trace.seed(),
        trace.scheduler(),
        g.n(),
        trace.steps(),
        trace.rounds()
    )?;
    writeln!(
        w,
        "# initial mis={}",
        mis_outputs(protocol, g, trace.initial())
    )?;
    writeln!(w, "step\tactivated\tmis")?;
    for t in 0..trace.steps() {
        let acts = &trace.activations()[t];
        let activated = if acts.is_empty() {
            "-".to_string()
        } else {
            acts.iter()
                .map(|p| p.index().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(
            w,
            "{}\t{}\t{}",
            t,
            activated,
            mis_outputs(protocol, g, trace.config(t + 1))
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::Digraph;

    /// Always-enabled counter protocol used to exercise the schedulers.
    struct Counter;

    impl Protocol for Counter {
        type State = u32;

        fn zero_state(&self, _i: ProcessId) -> u32 {
            0
        }

        fn enabled(&self, _i: ProcessId, _own: &u32, _preds: &[&u32]) -> bool {
            true
        }

        fn execute(
            &self,
            _i: ProcessId,
            own: &u32,
            _preds: &[&u32],
            _rng: &mut dyn RngCore,
        ) -> u32 {
            own + 1
        }

        fn mis_output(&self, _i: ProcessId, own: &u32, _preds: &[&u32]) -> bool {
            own.is_multiple_of(2)
        }

        fn state_size_bits(&self, _state: &u32) -> usize {
            32
        }
    }

    /// Counts up to a limit, then disables.
    struct Bounded(u32);

    impl Protocol for Bounded {
        type State = u32;

        fn zero_state(&self, _i: ProcessId) -> u32 {
            0
        }

        fn enabled(&self, _i: ProcessId, own: &u32, _preds: &[&u32]) -> bool {
            *own < self.0
        }

        fn execute(
            &self,
            _i: ProcessId,
            own: &u32,
            _preds: &[&u32],
            _rng: &mut dyn RngCore,
        ) -> u32 {
            own + 1
        }

        fn mis_output(&self, _i: ProcessId, own: &u32, _preds: &[&u32]) -> bool {
            *own == self.0
        }

        fn state_size_bits(&self, _state: &u32) -> usize {
            32
        }
    }

    fn pid(i: usize) -> ProcessId {
        ProcessId::new(i)
    }

    #[test]
    fn synchronous_activates_every_enabled_process() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let c0 = Configuration::zeroed(&Counter, &g);
        let mut sim = Simulation::new(&Counter, &g, c0, SchedulerKind::Synchronous, 1).unwrap();
        let ev = sim.step();
        assert_eq!(ev.activated, vec![pid(0), pid(1), pid(2)]);
        assert!(ev.completed_round);
    }

    #[test]
    fn terminal_configuration_returns_unchanged() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        let c0 = Configuration::new(vec![5u32, 5]);
        let mut sim =
            Simulation::new(&Bounded(5), &g, c0.clone(), SchedulerKind::Synchronous, 0).unwrap();
        assert!(sim.is_terminal());
        let ev = sim.step();
        assert!(ev.activated.is_empty());
        assert_eq!(sim.current(), &c0);
    }

    #[test]
    fn locally_central_on_three_cycle_activates_at_most_one() {
        // Every pair is neighboring in a 3-cycle, so N-adjacency leaves room
        // for exactly one activation per step.
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let c0 = Configuration::zeroed(&Counter, &g);
        let sched = SchedulerKind::LocallyCentral { fairness_bound: 2 };
        let mut sim = Simulation::new(&Counter, &g, c0, sched, 3).unwrap();
        for _ in 0..50 {
            let ev = sim.step();
            assert!(ev.activated.len() <= 1);
        }
    }

    #[test]
    fn locally_central_rejects_small_bound() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let sched = SchedulerKind::LocallyCentral { fairness_bound: 1 };
        assert_eq!(
            sched.validate(&g),
            Err(RuntimeError::InfeasibleLocallyCentral {
                bound: 1,
                required: 2
            })
        );
    }

    #[test]
    fn run_is_replayable() {
        let g = Digraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]).unwrap();
        let sched = SchedulerKind::Distributed { fairness_bound: 3 };
        let c0 = Configuration::zeroed(&Counter, &g);
        let a = run(&Counter, &g, c0.clone(), sched, 42, 6).unwrap();
        let b = run(&Counter, &g, c0, sched, 42, 6).unwrap();
        assert_eq!(a.configs(), b.configs());
        assert_eq!(a.activations(), b.activations());
        assert_eq!(a.round_boundaries(), b.round_boundaries());
    }

    #[test]
    fn synchronous_rounds_are_single_steps() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let c0 = Configuration::zeroed(&Counter, &g);
        let trace = run(&Counter, &g, c0, SchedulerKind::Synchronous, 0, 5).unwrap();
        assert_eq!(trace.steps(), 5);
        assert_eq!(trace.round_boundaries(), &[1, 2, 3, 4, 5]);
        let marking = mark_rounds(&trace, &g, &Counter);
        assert_eq!(marking.boundaries, trace.round_boundaries());
        assert!(!marking.unterminated);
    }

    #[test]
    fn hand_built_trace_round_boundary() {
        // path(2), both always enabled, activations [{1}, {0}]: the first
        // round ends once process 0 finally acts, at step 2.
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        let c0 = Configuration::new(vec![0u32, 0]);
        let c1 = step_with_activation(&Counter, &g, &c0, &[pid(1)], 0, 0);
        let c2 = step_with_activation(&Counter, &g, &c1, &[pid(0)], 0, 1);
        let trace = Trace::from_parts(
            0,
            SchedulerKind::Distributed { fairness_bound: 2 },
            vec![c0, c1, c2],
            vec![vec![pid(1)], vec![pid(0)]],
            vec![],
        );
        let marking = mark_rounds(&trace, &g, &Counter);
        assert_eq!(marking.boundaries, vec![2]);
        assert!(!marking.unterminated);
    }

    #[test]
    fn unterminated_round_is_flagged() {
        // Process 0 stays enabled but never activates: no boundary exists.
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        let c0 = Configuration::new(vec![0u32, 0]);
        let c1 = step_with_activation(&Counter, &g, &c0, &[pid(1)], 0, 0);
        let trace = Trace::from_parts(
            0,
            SchedulerKind::Distributed { fairness_bound: 9 },
            vec![c0, c1],
            vec![vec![pid(1)]],
            vec![],
        );
        let marking = mark_rounds(&trace, &g, &Counter);
        assert!(marking.boundaries.is_empty());
        assert!(marking.unterminated);
    }

    /// Always enabled, constant output.
    struct ConstOut;

    impl Protocol for ConstOut {
        type State = u32;

        fn zero_state(&self, _i: ProcessId) -> u32 {
            0
        }

        fn enabled(&self, _i: ProcessId, _own: &u32, _preds: &[&u32]) -> bool {
            true
        }

        fn execute(
            &self,
            _i: ProcessId,
            own: &u32,
            _preds: &[&u32],
            _rng: &mut dyn RngCore,
        ) -> u32 {
            own + 1
        }

        fn mis_output(&self, _i: ProcessId, _own: &u32, _preds: &[&u32]) -> bool {
            true
        }

        fn state_size_bits(&self, _state: &u32) -> usize {
            32
        }
    }

    #[test]
    fn detect_stable_output_constant_trace() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        let c0 = Configuration::new(vec![0u32, 0]);
        let trace = run(&ConstOut, &g, c0, SchedulerKind::Synchronous, 0, 6).unwrap();
        assert_eq!(detect_stable_output(&trace, 3, &g, &ConstOut), Some(0));
    }

    #[test]
    fn detect_stable_output_flipping_forever_is_none() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        let c0 = Configuration::new(vec![0u32, 0]);
        // Counter parity flips every synchronous step.
        let trace = run(&Counter, &g, c0, SchedulerKind::Synchronous, 0, 8).unwrap();
        assert_eq!(detect_stable_output(&trace, 3, &g, &Counter), None);
    }

    #[test]
    fn fairness_bound_is_respected() {
        let g = Digraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let bound = 2;
        let sched = SchedulerKind::Distributed {
            fairness_bound: bound,
        };
        let c0 = Configuration::zeroed(&Counter, &g);
        let trace = run(&Counter, &g, c0, sched, 9, 30).unwrap();
        // Longest run of enabled-but-inactive steps per process stays <= bound.
        for i in 0..4 {
            let mut streak = 0;
            for acts in trace.activations() {
                if acts.iter().any(|p| p.index() == i) {
                    streak = 0;
                } else {
                    streak += 1;
                    assert!(streak <= bound, "process {i} starved past {bound}");
                }
            }
        }
    }
}
