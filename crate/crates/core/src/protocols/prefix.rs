//! Probabilistic UMIS for asynchronous anonymous networks.
//!
//! Identifiers are bit strings that grow by one uniformly random bit at
//! every activation, so they are unbounded by design. Two identifiers are
//! treated as the same when one is a prefix of the other, and only the
//! longest representative of a class survives: stale relays of a live
//! process merge into its freshest identifier, while fake identifiers are
//! outgrown or disconnected. The UMIS function is the same priority-greedy
//! construction as the deterministic protocol, under lexicographic order.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{
    corrupt_live_bitstring, fresh_bitstring_pool, Adversary, AdversaryError, AdversaryMode,
    AdversarySpec,
};
use crate::bitstring::BitString;
use crate::digraph::{Digraph, ProcessId};
use crate::runtime::{Configuration, Protocol};
use crate::umis::{priority_greedy_umis, TopologyGraph};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PrefixTuple {
    pub id: BitString,
    pub preds: BTreeSet<BitString>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PrefixState {
    pub id: BitString,
    /// Predecessor identifiers as read at the last activation. Predecessor
    /// ids grow every step, so this is refreshed rather than kept stale.
    pub preds: BTreeSet<BitString>,
    pub topology: BTreeSet<PrefixTuple>,
    /// Sticky diagnostic: the configured id-length cap was hit and growth
    /// stopped. Trials observing this are aborted, never silently truncated.
    pub overflow: bool,
}

pub struct PrefixProtocol {
    max_id_len: usize,
}

impl Default for PrefixProtocol {
    fn default() -> Self {
        PrefixProtocol { max_id_len: 512 }
    }
}

impl PrefixProtocol {
    pub fn new() -> Self {
        Self::default()
    }

    /// Desk-scale safety valve on identifier growth.
    pub fn with_max_id_len(max_id_len: usize) -> Self {
        PrefixProtocol { max_id_len }
    }

    pub fn max_id_len(&self) -> usize {
        self.max_id_len
    }
}

/// Every identifier mentioned anywhere in the tuple set.
pub fn identifier_universe(topology: &BTreeSet<PrefixTuple>) -> BTreeSet<BitString> {
    let mut u = BTreeSet::new();
    for t in topology {
        u.insert(t.id.clone());
        for p in &t.preds {
            u.insert(p.clone());
        }
    }
    u
}

/// Canonical representative of `x` under prefix-equivalence: the
/// lexicographically greatest extension of `x` present in the universe
/// (which is the longest along any prefix chain), or `x` itself.
pub fn canonical(universe: &BTreeSet<BitString>, x: &BitString) -> BitString {
    universe
        .iter()
        .filter(|y| x.is_prefix_of(y))
        .max()
        .cloned()
        .unwrap_or_else(|| x.clone())
}

/// Tuple-induced graph with prefix-equivalence applied to every endpoint.
pub fn prefix_topology_graph(topology: &BTreeSet<PrefixTuple>) -> TopologyGraph<BitString> {
    let universe = identifier_universe(topology);
    TopologyGraph::from_tuples(topology.iter().map(|t| {
        (
            canonical(&universe, &t.id),
            t.preds.iter().map(|p| canonical(&universe, p)).collect(),
        )
    }))
}

/// One activation: extend the id by a random bit, refresh the predecessor
/// snapshot, merge the predecessors' topologies, drop tuples whose id is a
/// proper prefix of another tuple's id, then drop tuples that cannot reach
/// this process in the merged graph.
pub fn prefix_update(
    own: &PrefixState,
    pred_states: &[&PrefixState],
    rng: &mut dyn RngCore,
    max_id_len: usize,
) -> PrefixState {
    let mut id = own.id.clone();
    let mut overflow = own.overflow;
    if id.len() < max_id_len {
        id.push_random(rng);
    } else {
        overflow = true;
    }
    let preds: BTreeSet<BitString> = pred_states.iter().map(|s| s.id.clone()).collect();
    let mut topology: BTreeSet<PrefixTuple> = pred_states
        .iter()
        .flat_map(|s| s.topology.iter().cloned())
        .collect();
    topology.insert(PrefixTuple {
        id: id.clone(),
        preds: preds.clone(),
    });

    // Prefix rule: the longest representative of each chain survives.
    let ids: Vec<BitString> = topology.iter().map(|t| t.id.clone()).collect();
    topology.retain(|t| !ids.iter().any(|other| t.id.is_proper_prefix_of(other)));

    // Reachability pruning to a fixpoint, over the prefix-merged graph.
    loop {
        let universe = identifier_universe(&topology);
        let graph = prefix_topology_graph(&topology);
        let reach = graph.reachable_to(&canonical(&universe, &id));
        let before = topology.len();
        topology.retain(|t| reach.contains(&canonical(&universe, &t.id)));
        if topology.len() == before {
            break;
        }
    }
    PrefixState {
        id,
        preds,
        topology,
        overflow,
    }
}

pub fn prefix_mis_output(own: &PrefixState) -> bool {
    if own.topology.is_empty() {
        return false;
    }
    let universe = identifier_universe(&own.topology);
    let graph = prefix_topology_graph(&own.topology);
    let me = canonical(&universe, &own.id);
    priority_greedy_umis(&graph).contains(&me)
}

impl Protocol for PrefixProtocol {
    type State = PrefixState;

    fn zero_state(&self, _i: ProcessId) -> PrefixState {
        PrefixState::default()
    }

    fn enabled(&self, _i: ProcessId, _own: &PrefixState, _preds: &[&PrefixState]) -> bool {
        true
    }

    fn execute(
        &self,
        _i: ProcessId,
        own: &PrefixState,
        preds: &[&PrefixState],
        rng: &mut dyn RngCore,
    ) -> PrefixState {
        prefix_update(own, preds, rng, self.max_id_len)
    }

    fn mis_output(&self, _i: ProcessId, own: &PrefixState, _preds: &[&PrefixState]) -> bool {
        prefix_mis_output(own)
    }

    fn state_size_bits(&self, state: &PrefixState) -> usize {
        state.id.len()
            + state.preds.iter().map(BitString::len).sum::<usize>()
            + state
                .topology
                .iter()
                .map(|t| t.id.len() + t.preds.iter().map(BitString::len).sum::<usize>())
                .sum::<usize>()
            + 1
    }

    fn uniform_anonymous(&self) -> bool {
        true
    }
}

impl Adversary for PrefixProtocol {
    fn initial_configuration(
        &self,
        g: &Digraph,
        spec: &AdversarySpec,
    ) -> Result<(Configuration<PrefixState>, usize), AdversaryError> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        match &spec.mode {
            AdversaryMode::Zeroed => Ok((Configuration::zeroed(self, g), 0)),
            AdversaryMode::AllSameIdentifier { fake_id_budget } => {
                let shared = BitString::from_bits([false, rng.random_bool(0.5)]);
                let pool =
                    fresh_bitstring_pool(&mut rng, *fake_id_budget, std::slice::from_ref(&shared));
                let mut states: Vec<PrefixState> = (0..g.n())
                    .map(|_| PrefixState {
                        id: shared.clone(),
                        ..Default::default()
                    })
                    .collect();
                for (k, fake) in pool.iter().enumerate() {
                    let victim = k % g.n();
                    let other = if pool.len() > 1 && rng.random_bool(0.5) {
                        pool[rng.random_range(0..pool.len())].clone()
                    } else {
                        shared.clone()
                    };
                    states[victim].topology.insert(PrefixTuple {
                        id: fake.clone(),
                        preds: BTreeSet::from([other]),
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
                    let mut st = PrefixState {
                        id: live[i].clone(),
                        ..Default::default()
                    };
                    if rng.random_bool(*corruption_probability) {
                        for _ in 0..rng.random_range(1..=3) {
                            let id = if !pool.is_empty() && rng.random_bool(0.5) {
                                let f = pool[rng.random_range(0..pool.len())].clone();
                                used.insert(f.clone());
                                f
                            } else {
                                live[rng.random_range(0..live.len())].clone()
                            };
                            let mut preds = BTreeSet::new();
                            for _ in 0..rng.random_range(0..=2) {
                                if !pool.is_empty() && rng.random_bool(0.3) {
                                    let f = pool[rng.random_range(0..pool.len())].clone();
                                    used.insert(f.clone());
                                    preds.insert(f);
                                } else {
                                    preds.insert(live[rng.random_range(0..live.len())].clone());
                                }
                            }
                            st.topology.insert(PrefixTuple { id, preds });
                        }
                    }
                    states.push(st);
                }
                Ok((Configuration::new(states), used.len()))
            }
        }
    }

    fn count_fake_identifiers(&self, _g: &Digraph, c: &Configuration<PrefixState>) -> usize {
        let live: Vec<&BitString> = c.states().iter().map(|s| &s.id).collect();
        let mut fakes: BTreeSet<&BitString> = BTreeSet::new();
        for state in c.states() {
            for t in &state.topology {
                for id in std::iter::once(&t.id).chain(t.preds.iter()) {
                    if !live.iter().any(|l| l.prefix_related(id)) {
                        fakes.insert(id);
                    }
                }
            }
        }
        fakes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorSpec};
    use crate::runtime::{mis_outputs, run, SchedulerKind};
    use crate::umis::check_umis;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn tuple(id: &str, preds: &[&str]) -> PrefixTuple {
        PrefixTuple {
            id: bs(id),
            preds: preds.iter().map(|p| bs(p)).collect(),
        }
    }

    #[test]
    fn lone_process_grows_one_bit() {
        let own = PrefixState::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = prefix_update(&own, &[], &mut rng, 512);
        assert_eq!(next.id.len(), 1);
        assert_eq!(next.topology.len(), 1);
        let t = next.topology.iter().next().unwrap();
        assert_eq!(t.id, next.id);
        assert!(t.preds.is_empty());
    }

    #[test]
    fn shorter_prefix_tuple_is_dropped() {
        // {("10", X), ("1", Y)} → ("1", Y) removed.
        let pred = PrefixState {
            id: bs("10"),
            preds: BTreeSet::new(),
            topology: BTreeSet::from([tuple("10", &[]), tuple("1", &["0"])]),
            overflow: false,
        };
        let own = PrefixState {
            id: bs("0"),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = prefix_update(&own, &[&pred], &mut rng, 512);
        assert!(!next.topology.iter().any(|t| t.id == bs("1")));
        assert!(next.topology.iter().any(|t| t.id == bs("10")));
    }

    #[test]
    fn canonical_picks_longest_extension() {
        let universe: BTreeSet<BitString> = ["0", "0110", "10"].iter().map(|s| bs(s)).collect();
        assert_eq!(canonical(&universe, &bs("01")), bs("0110"));
        assert_eq!(canonical(&universe, &bs("10")), bs("10"));
        assert_eq!(canonical(&universe, &bs("111")), bs("111"));
    }

    #[test]
    fn mis_output_self_only_is_true() {
        let own = PrefixState {
            id: bs("01"),
            preds: BTreeSet::new(),
            topology: BTreeSet::from([tuple("01", &[])]),
            overflow: false,
        };
        assert!(prefix_mis_output(&own));
    }

    #[test]
    fn two_cycle_larger_id_wins() {
        // Mutual cycle with exact topologies: only the lexicographically
        // larger identifier outputs true.
        let topo = BTreeSet::from([tuple("10", &["01"]), tuple("01", &["10"])]);
        let hi = PrefixState {
            id: bs("10"),
            preds: BTreeSet::from([bs("01")]),
            topology: topo.clone(),
            overflow: false,
        };
        let lo = PrefixState {
            id: bs("01"),
            preds: BTreeSet::from([bs("10")]),
            topology: topo,
            overflow: false,
        };
        assert!(prefix_mis_output(&hi));
        assert!(!prefix_mis_output(&lo));
    }

    #[test]
    fn prefix_equivalent_topologies_agree() {
        // The same topology up to identifier extension merges to the same
        // graph and the same output.
        let a = PrefixState {
            id: bs("10"),
            preds: BTreeSet::from([bs("01")]),
            topology: BTreeSet::from([tuple("10", &["01"]), tuple("011", &["10"])]),
            overflow: false,
        };
        let b = PrefixState {
            id: bs("10"),
            preds: BTreeSet::from([bs("011")]),
            topology: BTreeSet::from([tuple("10", &["011"]), tuple("011", &["1"])]),
            overflow: false,
        };
        assert_eq!(prefix_mis_output(&a), prefix_mis_output(&b));
    }

    #[test]
    fn stabilizes_from_all_same_on_cycle() {
        let g = generate(&GeneratorSpec::DirectedCycle { n: 4 }, 0).unwrap();
        let p = PrefixProtocol::new();
        let spec = AdversarySpec::all_same(2, 5);
        let (c0, ell) = p.initial_configuration(&g, &spec).unwrap();
        assert_eq!(ell, 2);
        assert_eq!(ell, p.count_fake_identifiers(&g, &c0));
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 9, 40).unwrap();
        let outputs = mis_outputs(&p, &g, trace.final_config());
        assert!(check_umis(&g, &outputs).is_valid());
    }

    #[test]
    fn overflow_flag_is_sticky_not_silent() {
        let p = PrefixProtocol::with_max_id_len(2);
        let g = generate(&GeneratorSpec::Path { n: 1 }, 0).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 3, 5).unwrap();
        let last = trace.final_config().state(ProcessId::new(0));
        assert_eq!(last.id.len(), 2);
        assert!(last.overflow);
    }
}
