//! Self-stabilizing probabilistic local naming for synchronous anonymous
//! networks: every process ends with an identifier distinct from all of its
//! ancestors, using bounded memory.
//!
//! Each process disseminates `(id, rnd, dist)` tuples downstream. Seeing its
//! own identifier with a foreign nonce means a real ancestor shares the id,
//! so the process appends a random bit. Stale relays of the process's own
//! tuples would trigger false detections, which the distance pruning and the
//! timer spacing rule out: by the time the timer fires, any surviving tuple
//! is younger than the last nonce redraw.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{
    corrupt_live_bitstring, fresh_bitstring_pool, Adversary, AdversaryError, AdversaryMode,
    AdversarySpec,
};
use crate::bitstring::BitString;
use crate::digraph::{Digraph, ProcessId};
use crate::protocols::{significant_bits, ProtocolError};
use crate::runtime::{Configuration, Protocol};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct NameTuple {
    pub id: BitString,
    pub rnd: u32,
    pub dist: usize,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NamingState {
    pub id: BitString,
    /// Nonce in `1..=k`.
    pub rnd: u32,
    /// Incremented every activation; a naming check fires when it passes the
    /// number of distinct identifiers in view.
    pub timer: usize,
    pub ids: BTreeSet<NameTuple>,
}

impl NamingState {
    fn zero() -> Self {
        NamingState {
            id: BitString::empty(),
            rnd: 1,
            timer: 0,
            ids: BTreeSet::new(),
        }
    }
}

pub struct NamingProtocol {
    k: u32,
}

impl NamingProtocol {
    /// `k >= 2` is the nonce range constant; 2 is the minimum and default.
    pub fn new(k: u32) -> Result<Self, ProtocolError> {
        if k < 2 {
            return Err(ProtocolError::BadNamingConstant);
        }
        Ok(NamingProtocol { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }
}

impl Default for NamingProtocol {
    fn default() -> Self {
        NamingProtocol { k: 2 }
    }
}

pub fn distinct_id_count(ids: &BTreeSet<NameTuple>) -> usize {
    ids.iter().map(|t| &t.id).collect::<BTreeSet<_>>().len()
}

/// Removes tuples whose distance exceeds the number of distinct identifiers
/// in view; removals shrink the count, so iterate to a fixpoint.
fn prune_by_distance(ids: &mut BTreeSet<NameTuple>) {
    loop {
        let count = distinct_id_count(ids);
        let before = ids.len();
        ids.retain(|t| t.dist <= count);
        if ids.len() == before {
            break;
        }
    }
}

fn gather(id: &BitString, rnd: u32, pred_states: &[&NamingState]) -> BTreeSet<NameTuple> {
    let mut ids: BTreeSet<NameTuple> = pred_states
        .iter()
        .flat_map(|s| {
            s.ids.iter().map(|t| NameTuple {
                id: t.id.clone(),
                rnd: t.rnd,
                dist: t.dist + 1,
            })
        })
        .collect();
    ids.insert(NameTuple {
        id: id.clone(),
        rnd,
        dist: 0,
    });
    prune_by_distance(&mut ids);
    ids
}

/// One synchronous activation. The timer guard invokes the naming check:
/// a foreign nonce on the own identifier grows the id by one random bit,
/// the nonce is redrawn, the timer resets, and the tuple recomputation runs
/// once more — it cannot recurse, the timer is freshly zero.
pub fn naming_update(
    own: &NamingState,
    pred_states: &[&NamingState],
    rng: &mut dyn RngCore,
    k: u32,
) -> NamingState {
    let mut st = NamingState {
        id: own.id.clone(),
        rnd: own.rnd,
        timer: own.timer + 1,
        ids: gather(&own.id, own.rnd, pred_states),
    };
    if st.timer > distinct_id_count(&st.ids) {
        if st.ids.iter().any(|t| t.id == st.id && t.rnd != st.rnd) {
            st.id.push_random(rng);
        }
        st.rnd = rng.random_range(1..=k);
        st.timer = 0;
        st.ids = gather(&st.id, st.rnd, pred_states);
    }
    st
}

/// Local naming: every process's identifier differs from the identifier of
/// each of its ancestors (exact string comparison).
pub fn local_naming_holds(g: &Digraph, ids: &[BitString]) -> bool {
    assert_eq!(g.n(), ids.len());
    g.process_ids().all(|i| {
        g.ancestors(i)
            .iter()
            .all(|&j| ids[j.index()] != ids[i.index()])
    })
}

impl Protocol for NamingProtocol {
    type State = NamingState;

    fn zero_state(&self, _i: ProcessId) -> NamingState {
        NamingState::zero()
    }

    fn enabled(&self, _i: ProcessId, _own: &NamingState, _preds: &[&NamingState]) -> bool {
        true
    }

    fn execute(
        &self,
        _i: ProcessId,
        own: &NamingState,
        preds: &[&NamingState],
        rng: &mut dyn RngCore,
    ) -> NamingState {
        naming_update(own, preds, rng, self.k)
    }

    /// Naming has no mis semantics of its own; the composed protocol layers
    /// the UMIS computation on top.
    fn mis_output(&self, _i: ProcessId, _own: &NamingState, _preds: &[&NamingState]) -> bool {
        false
    }

    fn state_size_bits(&self, state: &NamingState) -> usize {
        state.id.len()
            + significant_bits(state.rnd as u64)
            + significant_bits(state.timer as u64)
            + state
                .ids
                .iter()
                .map(|t| {
                    t.id.len() + significant_bits(t.rnd as u64) + significant_bits(t.dist as u64)
                })
                .sum::<usize>()
    }

    fn requires_synchronous(&self) -> bool {
        true
    }

    fn uniform_anonymous(&self) -> bool {
        true
    }
}

impl Adversary for NamingProtocol {
    fn initial_configuration(
        &self,
        g: &Digraph,
        spec: &AdversarySpec,
    ) -> Result<(Configuration<NamingState>, usize), AdversaryError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        match &spec.mode {
            AdversaryMode::Zeroed => Ok((Configuration::zeroed(self, g), 0)),
            AdversaryMode::AllSameIdentifier { fake_id_budget } => {
                let shared = BitString::from_bits([false, rng.random_bool(0.5)]);
                let pool =
                    fresh_bitstring_pool(&mut rng, *fake_id_budget, std::slice::from_ref(&shared));
                let mut states: Vec<NamingState> = (0..g.n())
                    .map(|_| NamingState {
                        id: shared.clone(),
                        rnd: rng.random_range(1..=self.k),
                        timer: rng.random_range(0..=g.n()),
                        ids: BTreeSet::new(),
                    })
                    .collect();
                for (idx, fake) in pool.iter().enumerate() {
                    states[idx % g.n()].ids.insert(NameTuple {
                        id: fake.clone(),
                        rnd: rng.random_range(1..=self.k),
                        dist: rng.random_range(0..=2 * g.n()),
                    });
                }
                Ok((Configuration::new(states), pool.len()))
            }
            AdversaryMode::RandomizedCorruption {
                fake_id_budget,
                corruption_probability,
            } => {
                let live: Vec<BitString> = (0..g.n())
                    .map(|_| corrupt_live_bitstring(&mut rng))
                    .collect();
                let pool = fresh_bitstring_pool(&mut rng, *fake_id_budget, &live);
                let mut used: BTreeSet<BitString> = BTreeSet::new();
                let mut states = Vec::with_capacity(g.n());
                for i in 0..g.n() {
                    let mut ids = BTreeSet::new();
                    if rng.random_bool(*corruption_probability) {
                        for _ in 0..rng.random_range(1..=3) {
                            let id = if !pool.is_empty() && rng.random_bool(0.5) {
                                let f = pool[rng.random_range(0..pool.len())].clone();
                                used.insert(f.clone());
                                f
                            } else {
                                live[rng.random_range(0..live.len())].clone()
                            };
                            ids.insert(NameTuple {
                                id,
                                rnd: rng.random_range(1..=self.k),
                                dist: rng.random_range(0..=2 * g.n()),
                            });
                        }
                    }
                    states.push(NamingState {
                        id: live[i].clone(),
                        rnd: rng.random_range(1..=self.k),
                        timer: rng.random_range(0..=2 * g.n()),
                        ids,
                    });
                }
                Ok((Configuration::new(states), used.len()))
            }
        }
    }

    fn count_fake_identifiers(&self, _g: &Digraph, c: &Configuration<NamingState>) -> usize {
        let live: Vec<&BitString> = c.states().iter().map(|s| &s.id).collect();
        let mut fakes: BTreeSet<&BitString> = BTreeSet::new();
        for state in c.states() {
            for t in &state.ids {
                if !live.iter().any(|l| l.prefix_related(&t.id)) {
                    fakes.insert(&t.id);
                }
            }
        }
        fakes.len()
    }
}
