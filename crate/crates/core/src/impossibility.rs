//! Executable forms of the negative results for anonymous uniform networks.
//!
//! System A is the directed 3-cycle; System B adds a two-process tail off
//! the cycle, built so the tail processes have the same in-degree and
//! predecessor shape as their cycle counterparts. Any silent solution run on
//! System A extends to a terminal System B configuration whose UMIS
//! predicate fails at the tail end, and any deterministic uniform candidate
//! admits a sibling execution on System B where the tail mirrors the cycle
//! step for step and never forms a UMIS. Both constructions are regression
//! tests a wrong candidate must fail; the repo's own protocols escape them
//! by carrying identifiers or randomness, and by never falling silent.

use rand::RngCore;
use thiserror::Error;

use crate::digraph::{Digraph, ProcessId};
use crate::generate::{fixture, Fixture};
use crate::runtime::{
    mark_rounds, mis_outputs, predecessor_states, step_with_activation, Configuration, Protocol,
    SchedulerKind, Simulation, Trace,
};
use crate::umis::{check_umis, UmisVerdict};

/// Figure 1(a): the directed 3-cycle a→b→c→a with a=0, b=1, c=2.
pub fn system_a() -> Digraph {
    fixture(Fixture::SystemA).expect("fixture is valid")
}

/// Figure 1(b): the cycle plus tail a→b′ and b′→c′, with b′=3, c′=4. b′ has
/// the same in-degree and predecessor as b; c′ has in-degree 1 like c.
pub fn system_b() -> Digraph {
    fixture(Fixture::SystemB).expect("fixture is valid")
}

/// Index of c′ in System B, where the UMIS predicate breaks.
/// System B layout: a=0, b=1, c=2, b′=3, c′=4.
pub fn tail_end() -> ProcessId {
    ProcessId::new(4)
}

/// Mirror assignment from System B processes to System A processes:
/// b′ shadows b and c′ shadows c.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiblingMap {
    pairs: [(ProcessId, ProcessId); 5],
}

impl SiblingMap {
    pub fn figure1() -> Self {
        let pair = |b: usize, a: usize| (ProcessId::new(b), ProcessId::new(a));
        let map = SiblingMap {
            pairs: [pair(0, 0), pair(1, 1), pair(2, 2), pair(3, 1), pair(4, 2)],
        };
        debug_assert!(map.in_degrees_match());
        map
    }

    pub fn mirror_of(&self, b_process: ProcessId) -> ProcessId {
        self.pairs[b_process.index()].1
    }

    pub fn pairs(&self) -> &[(ProcessId, ProcessId)] {
        &self.pairs
    }

    /// Mapped processes must agree on in-degree, or the mirroring argument
    /// does not even typecheck operationally.
    pub fn in_degrees_match(&self) -> bool {
        let (ga, gb) = (system_a(), system_b());
        self.pairs
            .iter()
            .all(|&(b, a)| gb.predecessors(b).len() == ga.predecessors(a).len())
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SiblingError {
    #[error("sibling execution applies only to uniform anonymous protocols")]
    NotUniform,
    #[error("lockstep broke at step {step}: process {process} diverged from its mirror")]
    LockstepViolation { step: usize, process: usize },
}

/// Replays a System A trace as a System B execution: b′ and c′ start in b
/// and c's initial states and activate whenever their mirrors do. For a
/// deterministic uniform protocol the mirrored states stay bit-equal at
/// every step — this is checked, and the resulting trace is returned so the
/// caller can watch the UMIS predicate fail at c′.
pub fn sibling_execution<P: Protocol>(
    protocol: &P,
    trace_a: &Trace<P::State>,
) -> Result<Trace<P::State>, SiblingError> {
    if !protocol.uniform_anonymous() {
        return Err(SiblingError::NotUniform);
    }
    let gb = system_b();
    let map = SiblingMap::figure1();
    assert_eq!(trace_a.initial().len(), 3, "trace must come from System A");
    let initial: Configuration<P::State> = Configuration::new(
        gb.process_ids()
            .map(|x| trace_a.initial().state(map.mirror_of(x)).clone())
            .collect(),
    );
    let mut configs = vec![initial];
    let mut activations: Vec<Vec<ProcessId>> = Vec::new();
    for t in 0..trace_a.steps() {
        let acts_a = &trace_a.activations()[t];
        let acts_b: Vec<ProcessId> = gb
            .process_ids()
            .filter(|&x| acts_a.contains(&map.mirror_of(x)))
            .collect();
        let next = step_with_activation(
            protocol,
            &gb,
            configs.last().expect("nonempty"),
            &acts_b,
            trace_a.seed(),
            t,
        );
        for x in gb.process_ids() {
            if next.state(x) != trace_a.config(t + 1).state(map.mirror_of(x)) {
                return Err(SiblingError::LockstepViolation {
                    step: t,
                    process: x.index(),
                });
            }
        }
        configs.push(next);
        activations.push(acts_b);
    }
    let unmarked = Trace::from_parts(
        trace_a.seed(),
        trace_a.scheduler(),
        configs,
        activations,
        Vec::new(),
    );
    let marking = mark_rounds(&unmarked, &gb, protocol);
    let (seed, scheduler) = (unmarked.seed(), unmarked.scheduler());
    let (configs, activations) = unmarked.into_parts();
    Ok(Trace::from_parts(
        seed,
        scheduler,
        configs,
        activations,
        marking.boundaries,
    ))
}

/// Verdict of [`silence_witness`].
#[derive(Clone, Debug)]
pub enum SilenceWitness<S> {
    /// No terminal configuration within the horizon.
    NonSilent { steps: usize },
    /// The run fell silent but the protocol carries identifiers, so the
    /// tail extension does not apply.
    SilentNonUniform {
        steps: usize,
        terminal: Configuration<S>,
    },
    /// The run fell silent; the terminal states were extended to System B
    /// per the tail construction.
    SilentUniform {
        terminal_a: Configuration<S>,
        extended_b: Configuration<S>,
        b_terminal: bool,
        verdict: UmisVerdict,
        violated_at_tail_end: bool,
    },
}

impl<S> SilenceWitness<S> {
    pub fn is_non_silent(&self) -> bool {
        matches!(self, SilenceWitness::NonSilent { .. })
    }
}

/// Runs `protocol` on System A under the synchronous scheduler. If it never
/// falls silent within `horizon_steps`, that is the witness. If it reaches a
/// terminal configuration and is uniform, the states extend to System B with
/// b′ and c′ copying b and c; the extension is itself terminal and its UMIS
/// predicate fails at c′ — which is why no silent solution can exist.
pub fn silence_witness<P: Protocol>(
    protocol: &P,
    initial_a: Configuration<P::State>,
    horizon_steps: usize,
    seed: u64,
) -> SilenceWitness<P::State> {
    let ga = system_a();
    let mut sim = Simulation::new(protocol, &ga, initial_a, SchedulerKind::Synchronous, seed)
        .expect("synchronous scheduling is always valid");
    let mut steps = 0;
    while steps < horizon_steps && !sim.is_terminal() {
        if sim.step().activated.is_empty() {
            break;
        }
        steps += 1;
    }
    if !sim.is_terminal() {
        return SilenceWitness::NonSilent { steps };
    }
    let terminal = sim.current().clone();
    if !protocol.uniform_anonymous() {
        return SilenceWitness::SilentNonUniform { steps, terminal };
    }
    let gb = system_b();
    let map = SiblingMap::figure1();
    let extended: Configuration<P::State> = Configuration::new(
        gb.process_ids()
            .map(|x| terminal.state(map.mirror_of(x)).clone())
            .collect(),
    );
    let b_terminal = gb.process_ids().all(|i| {
        let preds = predecessor_states(&gb, &extended, i);
        !protocol.enabled(i, extended.state(i), &preds)
    });
    let outputs = mis_outputs(protocol, &gb, &extended);
    let verdict = check_umis(&gb, &outputs);
    let violated_at_tail_end = verdict.violations().contains(&tail_end());
    SilenceWitness::SilentUniform {
        terminal_a: terminal,
        extended_b: extended,
        b_terminal,
        verdict,
        violated_at_tail_end,
    }
}

/// Deliberately wrong uniform deterministic UMIS candidate, shipped as the
/// test double the constructions are exercised against. Each process chases
/// `(max predecessor state + 1) mod 3` and claims membership on state 0. On
/// System A it parks on a rotating labelling that looks like a perfect UMIS;
/// the sibling execution then exhibits the System B failure.
pub struct RotorCandidate {
    pub quiescent: bool,
}

impl RotorCandidate {
    pub fn new() -> Self {
        RotorCandidate { quiescent: false }
    }

    pub fn silent() -> Self {
        RotorCandidate { quiescent: true }
    }

    fn target(own: u8, preds: &[&u8]) -> u8 {
        match preds.iter().max() {
            Some(&&m) => (m + 1) % 3,
            None => own,
        }
    }
}

impl Default for RotorCandidate {
    fn default() -> Self {
        Self::new()
    }
}

impl Protocol for RotorCandidate {
    type State = u8;

    fn zero_state(&self, _i: ProcessId) -> u8 {
        0
    }

    fn enabled(&self, _i: ProcessId, own: &u8, preds: &[&u8]) -> bool {
        !self.quiescent || *own != Self::target(*own, preds)
    }

    fn execute(&self, _i: ProcessId, own: &u8, preds: &[&u8], _rng: &mut dyn RngCore) -> u8 {
        Self::target(*own, preds)
    }

    fn mis_output(&self, _i: ProcessId, own: &u8, _preds: &[&u8]) -> bool {
        *own == 0
    }

    fn state_size_bits(&self, _state: &u8) -> usize {
        2
    }

    fn uniform_anonymous(&self) -> bool {
        true
    }
}
