//! Deterministic UMIS over locally-named networks, and the fair composition
//! with the naming layer that solves UMIS in synchronous anonymous networks.
//!
//! With local naming, the identifiers reachable from a process inside its
//! collected ancestor topology are exactly its strongly connected component:
//! equal identifiers can only belong to mutually unreachable processes, and
//! merging those never affects reachability *from* the process. A process
//! outputs false exactly when some predecessor outside its component, or
//! some adjacent larger-identifier component member, claims membership —
//! the fixed point is the descending-identifier greedy independent set,
//! settled component by component with upstream priority. Since a process
//! cannot read its successors directly, each topology tuple piggybacks its
//! originator's latest umis flag, refreshed hop by hop.

use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{
    fresh_bitstring_pool, Adversary, AdversaryError, AdversaryMode, AdversarySpec,
};
use crate::bitstring::BitString;
use crate::digraph::{Digraph, ProcessId};
use crate::protocols::naming::{naming_update, NamingProtocol, NamingState};
use crate::protocols::{significant_bits, ProtocolError};
use crate::runtime::{Configuration, Protocol};
use crate::umis::TopologyGraph;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct LocalTuple {
    pub id: BitString,
    pub preds: BTreeSet<BitString>,
    /// Originator's umis flag as of the round the tuple was relayed.
    pub umis_flag: bool,
    /// Hop count from the originator, used for fake-information pruning.
    pub dist: usize,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LocalUmisState {
    pub umis: bool,
    pub topology: BTreeSet<LocalTuple>,
    /// Cached component membership: identifiers reachable from this process
    /// in its collected topology.
    pub comp: BTreeSet<BitString>,
}

/// Constants-mode instance: a fixed locally-named identifier assignment.
pub struct LocalUmisProtocol {
    ids: Vec<BitString>,
    pred_ids: Vec<Vec<BitString>>,
}

impl LocalUmisProtocol {
    /// Requires local naming: every process's identifier must differ from
    /// each of its ancestors' (unreachable processes may collide).
    pub fn new(g: &Digraph, ids: Vec<BitString>) -> Result<Self, ProtocolError> {
        if ids.len() != g.n() {
            return Err(ProtocolError::BadIdentifiers);
        }
        for i in g.process_ids() {
            if g.ancestors(i)
                .iter()
                .any(|&j| ids[j.index()] == ids[i.index()])
            {
                return Err(ProtocolError::NotLocallyNamed { process: i.index() });
            }
        }
        let pred_ids = g
            .process_ids()
            .map(|i| {
                g.predecessors(i)
                    .iter()
                    .map(|&p| ids[p.index()].clone())
                    .collect()
            })
            .collect();
        Ok(LocalUmisProtocol { ids, pred_ids })
    }

    pub fn id_of(&self, i: ProcessId) -> &BitString {
        &self.ids[i.index()]
    }

    pub fn ids(&self) -> &[BitString] {
        &self.ids
    }
}

fn distinct_id_count(topology: &BTreeSet<LocalTuple>) -> usize {
    topology
        .iter()
        .map(|t| &t.id)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Rebuilds the tuple set from the self tuple and the predecessors' views.
/// The set is keyed by `(id, preds)` as in the plain `(id, ID)` tuple model;
/// when the same row arrives over several paths, the shortest relay wins and
/// carries the freshest umis flag (a flag claiming membership wins distance
/// ties). Rows whose distance exceeds the distinct-identifier count cannot
/// belong to a live relay and are pruned, which is what removes fake
/// initial information.
pub fn local_update(
    id_i: &BitString,
    preds_of_i: &BTreeSet<BitString>,
    own_umis: bool,
    pred_states: &[&LocalUmisState],
) -> BTreeSet<LocalTuple> {
    let mut rows: std::collections::BTreeMap<(BitString, BTreeSet<BitString>), (usize, bool)> =
        std::collections::BTreeMap::new();
    let mut consider = |id: &BitString, preds: &BTreeSet<BitString>, dist: usize, flag: bool| {
        rows.entry((id.clone(), preds.clone()))
            .and_modify(|(d, f)| {
                if dist < *d {
                    *d = dist;
                    *f = flag;
                } else if dist == *d {
                    *f |= flag;
                }
            })
            .or_insert((dist, flag));
    };
    consider(id_i, preds_of_i, 0, own_umis);
    for s in pred_states {
        for t in &s.topology {
            consider(&t.id, &t.preds, t.dist + 1, t.umis_flag);
        }
    }
    let mut topology: BTreeSet<LocalTuple> = rows
        .into_iter()
        .map(|((id, preds), (dist, umis_flag))| LocalTuple {
            id,
            preds,
            umis_flag,
            dist,
        })
        .collect();
    loop {
        let count = distinct_id_count(&topology);
        let before = topology.len();
        topology.retain(|t| t.dist <= count);
        if topology.len() == before {
            break;
        }
    }
    topology
}

fn exact_id_graph(topology: &BTreeSet<LocalTuple>) -> TopologyGraph<BitString> {
    TopologyGraph::from_tuples(
        topology
            .iter()
            .map(|t| (t.id.clone(), t.preds.iter().cloned().collect())),
    )
}

/// Identifiers reachable from `id_i` in the tuple-induced graph. Since the
/// topology holds only ancestors, these are the strongly connected component
/// of the process.
pub fn component_of(topology: &BTreeSet<LocalTuple>, id_i: &BitString) -> BTreeSet<BitString> {
    exact_id_graph(topology).reachable_from(id_i)
}

/// The UMIS decision: false iff some predecessor outside the component
/// claims membership, or some *adjacent* component member with a
/// lexicographically greater identifier does. Predecessors are read
/// directly; in-component successors are read from the piggybacked flags
/// (their tuples list this process among their predecessors). Restricting
/// the in-component deferral to adjacent members is what makes the fixed
/// point the descending-identifier greedy independent set of the component
/// rather than a single member per component.
pub fn local_umis_decide(
    id_i: &BitString,
    comp: &BTreeSet<BitString>,
    topology: &BTreeSet<LocalTuple>,
    pred_ids: &[BitString],
    pred_states: &[&LocalUmisState],
) -> bool {
    let pred_outside = pred_ids
        .iter()
        .zip(pred_states)
        .any(|(pid, ps)| !comp.contains(pid) && ps.umis);
    let pred_in_comp_greater = pred_ids
        .iter()
        .zip(pred_states)
        .any(|(pid, ps)| comp.contains(pid) && pid > id_i && ps.umis);
    let flagged = |x: &BitString| topology.iter().any(|t| t.id == *x && t.umis_flag);
    // Local naming makes id_i unique among the collected ancestors, so a
    // tuple listing it as a predecessor belongs to a direct successor.
    let succ_in_comp_greater = topology
        .iter()
        .any(|t| t.preds.contains(id_i) && t.id > *id_i && comp.contains(&t.id) && flagged(&t.id));
    !(pred_outside || pred_in_comp_greater || succ_in_comp_greater)
}

/// Full activation: update, recompute the component, decide.
pub fn local_transition(
    id_i: &BitString,
    pred_ids: &[BitString],
    own: &LocalUmisState,
    pred_states: &[&LocalUmisState],
) -> LocalUmisState {
    let preds_of_i: BTreeSet<BitString> = pred_ids.iter().cloned().collect();
    let topology = local_update(id_i, &preds_of_i, own.umis, pred_states);
    let comp = component_of(&topology, id_i);
    let umis = local_umis_decide(id_i, &comp, &topology, pred_ids, pred_states);
    LocalUmisState {
        umis,
        topology,
        comp,
    }
}

fn local_state_bits(state: &LocalUmisState) -> usize {
    1 + state
        .topology
        .iter()
        .map(|t| {
            t.id.len()
                + t.preds.iter().map(BitString::len).sum::<usize>()
                + 1
                + significant_bits(t.dist as u64)
        })
        .sum::<usize>()
        + state.comp.iter().map(BitString::len).sum::<usize>()
}

impl Protocol for LocalUmisProtocol {
    type State = LocalUmisState;

    fn zero_state(&self, _i: ProcessId) -> LocalUmisState {
        LocalUmisState::default()
    }

    fn enabled(&self, _i: ProcessId, _own: &LocalUmisState, _preds: &[&LocalUmisState]) -> bool {
        true
    }

    fn execute(
        &self,
        i: ProcessId,
        own: &LocalUmisState,
        preds: &[&LocalUmisState],
        _rng: &mut dyn RngCore,
    ) -> LocalUmisState {
        local_transition(&self.ids[i.index()], &self.pred_ids[i.index()], own, preds)
    }

    fn mis_output(&self, _i: ProcessId, own: &LocalUmisState, _preds: &[&LocalUmisState]) -> bool {
        own.umis
    }

    fn state_size_bits(&self, state: &LocalUmisState) -> usize {
        local_state_bits(state)
    }
}

impl Adversary for LocalUmisProtocol {
    fn initial_configuration(
        &self,
        g: &Digraph,
        spec: &AdversarySpec,
    ) -> Result<(Configuration<LocalUmisState>, usize), AdversaryError> {
        match &spec.mode {
            AdversaryMode::Zeroed => Ok((Configuration::zeroed(self, g), 0)),
            AdversaryMode::AllSameIdentifier { .. } => Err(AdversaryError::IncompatibleMode {
                protocol: "local-umis",
                mode: spec.mode.to_string(),
            }),
            AdversaryMode::RandomizedCorruption {
                fake_id_budget,
                corruption_probability,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let pool = fresh_bitstring_pool(&mut rng, *fake_id_budget, &self.ids);
                let mut used: BTreeSet<BitString> = BTreeSet::new();
                let mut states = Vec::with_capacity(g.n());
                for _ in g.process_ids() {
                    let mut st = LocalUmisState {
                        umis: rng.random_bool(0.5),
                        ..Default::default()
                    };
                    if rng.random_bool(*corruption_probability) {
                        for _ in 0..rng.random_range(1..=3) {
                            let id = if !pool.is_empty() && rng.random_bool(0.5) {
                                let f = pool[rng.random_range(0..pool.len())].clone();
                                used.insert(f.clone());
                                f
                            } else {
                                self.ids[rng.random_range(0..self.ids.len())].clone()
                            };
                            let mut preds = BTreeSet::new();
                            for _ in 0..rng.random_range(0..=2) {
                                if !pool.is_empty() && rng.random_bool(0.3) {
                                    let f = pool[rng.random_range(0..pool.len())].clone();
                                    used.insert(f.clone());
                                    preds.insert(f);
                                } else {
                                    preds.insert(
                                        self.ids[rng.random_range(0..self.ids.len())].clone(),
                                    );
                                }
                            }
                            st.topology.insert(LocalTuple {
                                id,
                                preds,
                                umis_flag: rng.random_bool(0.5),
                                dist: rng.random_range(0..=2 * g.n()),
                            });
                        }
                        for _ in 0..rng.random_range(0..=2) {
                            st.comp
                                .insert(self.ids[rng.random_range(0..self.ids.len())].clone());
                        }
                    }
                    states.push(st);
                }
                Ok((Configuration::new(states), used.len()))
            }
        }
    }

    fn count_fake_identifiers(&self, _g: &Digraph, c: &Configuration<LocalUmisState>) -> usize {
        let mut fakes: BTreeSet<&BitString> = BTreeSet::new();
        for state in c.states() {
            for t in &state.topology {
                for id in std::iter::once(&t.id).chain(t.preds.iter()) {
                    if !self.ids.iter().any(|l| l.prefix_related(id)) {
                        fakes.insert(id);
                    }
                }
            }
        }
        fakes.len()
    }
}

/// Fair composition of the naming layer with the UMIS layer: each activation
/// runs the naming transition, then the UMIS transition reading the naming
/// layer's current identifiers as its constants. Once naming stabilizes the
/// composite behaves exactly like [`LocalUmisProtocol`] with those ids.
pub struct CompositeProtocol {
    naming: NamingProtocol,
}

impl CompositeProtocol {
    pub fn new(naming: NamingProtocol) -> Self {
        CompositeProtocol { naming }
    }

    pub fn k(&self) -> u32 {
        self.naming.k()
    }
}

/// Spec-level constructor name for the fair composition.
pub fn compose(naming: NamingProtocol) -> CompositeProtocol {
    CompositeProtocol::new(naming)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompositeState {
    pub naming: NamingState,
    pub umis: LocalUmisState,
}

impl Protocol for CompositeProtocol {
    type State = CompositeState;

    fn zero_state(&self, i: ProcessId) -> CompositeState {
        CompositeState {
            naming: self.naming.zero_state(i),
            umis: LocalUmisState::default(),
        }
    }

    fn enabled(&self, _i: ProcessId, _own: &CompositeState, _preds: &[&CompositeState]) -> bool {
        true
    }

    fn execute(
        &self,
        _i: ProcessId,
        own: &CompositeState,
        preds: &[&CompositeState],
        rng: &mut dyn RngCore,
    ) -> CompositeState {
        let pred_naming: Vec<&NamingState> = preds.iter().map(|s| &s.naming).collect();
        let naming = naming_update(&own.naming, &pred_naming, rng, self.naming.k());
        // The UMIS layer reads the naming layer's ids: its own fresh one and
        // the predecessors' snapshot ones.
        let id_i = naming.id.clone();
        let pred_ids: Vec<BitString> = preds.iter().map(|s| s.naming.id.clone()).collect();
        let pred_umis: Vec<&LocalUmisState> = preds.iter().map(|s| &s.umis).collect();
        let umis = local_transition(&id_i, &pred_ids, &own.umis, &pred_umis);
        CompositeState { naming, umis }
    }

    fn mis_output(&self, _i: ProcessId, own: &CompositeState, _preds: &[&CompositeState]) -> bool {
        own.umis.umis
    }

    fn state_size_bits(&self, state: &CompositeState) -> usize {
        self.naming.state_size_bits(&state.naming) + local_state_bits(&state.umis)
    }

    fn requires_synchronous(&self) -> bool {
        true
    }

    fn uniform_anonymous(&self) -> bool {
        true
    }
}

impl Adversary for CompositeProtocol {
    fn initial_configuration(
        &self,
        g: &Digraph,
        spec: &AdversarySpec,
    ) -> Result<(Configuration<CompositeState>, usize), AdversaryError> {
        // Corrupt the naming layer first; its fake pool then seeds the UMIS
        // layer so ℓ counts distinct fakes across both layers.
        let (naming_cfg, _) = self.naming.initial_configuration(g, spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
        let live: Vec<BitString> = naming_cfg.states().iter().map(|s| s.id.clone()).collect();
        let mut states = Vec::with_capacity(g.n());
        for i in g.process_ids() {
            let naming = naming_cfg.state(i).clone();
            let mut umis = LocalUmisState::default();
            if !matches!(spec.mode, AdversaryMode::Zeroed) {
                umis.umis = rng.random_bool(0.5);
                // Relay the naming layer's corrupted tuples into the UMIS
                // layer so both layers start inconsistent.
                for t in &naming.ids {
                    if rng.random_bool(0.5) {
                        umis.topology.insert(LocalTuple {
                            id: t.id.clone(),
                            preds: BTreeSet::from([live[rng.random_range(0..live.len())].clone()]),
                            umis_flag: rng.random_bool(0.5),
                            dist: t.dist,
                        });
                    }
                }
            }
            states.push(CompositeState { naming, umis });
        }
        let cfg = Configuration::new(states);
        let ell = self.count_fake_identifiers(g, &cfg);
        Ok((cfg, ell))
    }

    fn count_fake_identifiers(&self, _g: &Digraph, c: &Configuration<CompositeState>) -> usize {
        let live: Vec<&BitString> = c.states().iter().map(|s| &s.naming.id).collect();
        let mut fakes: BTreeSet<&BitString> = BTreeSet::new();
        for state in c.states() {
            for t in &state.naming.ids {
                if !live.iter().any(|l| l.prefix_related(&t.id)) {
                    fakes.insert(&t.id);
                }
            }
            for t in &state.umis.topology {
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
    use crate::protocols::naming::local_naming_holds;
    use crate::runtime::{mis_outputs, run, SchedulerKind};
    use crate::umis::check_umis;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn ids(v: &[&str]) -> Vec<BitString> {
        v.iter().map(|s| bs(s)).collect()
    }

    #[test]
    fn lone_process_topology_and_comp() {
        let g = generate(&GeneratorSpec::Path { n: 1 }, 0).unwrap();
        let p = LocalUmisProtocol::new(&g, ids(&["0"])).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 0, 2).unwrap();
        let st = trace.final_config().state(ProcessId::new(0));
        assert_eq!(st.topology.len(), 1);
        assert_eq!(st.comp, BTreeSet::from([bs("0")]));
        assert!(st.umis);
    }

    #[test]
    fn path_two_topology_and_comp() {
        let g = generate(&GeneratorSpec::Path { n: 2 }, 0).unwrap();
        let p = LocalUmisProtocol::new(&g, ids(&["0", "1"])).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 0, 4).unwrap();
        let st = trace.final_config().state(ProcessId::new(1));
        let tuple_ids: BTreeSet<&BitString> = st.topology.iter().map(|t| &t.id).collect();
        assert_eq!(tuple_ids.len(), 2);
        // Nothing is reachable from the tail of a path.
        assert_eq!(st.comp, BTreeSet::from([bs("1")]));
    }

    #[test]
    fn three_cycle_comp_is_everyone() {
        let g = generate(&GeneratorSpec::DirectedCycle { n: 3 }, 0).unwrap();
        let p = LocalUmisProtocol::new(&g, ids(&["0", "10", "11"])).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 0, 6).unwrap();
        for i in g.process_ids() {
            let st = trace.final_config().state(i);
            assert_eq!(st.comp.len(), 3, "process {i} sees the whole component");
        }
    }

    #[test]
    fn decide_examples() {
        // No predecessors, singleton component: both existentials are empty.
        let topo = BTreeSet::from([LocalTuple {
            id: bs("0"),
            preds: BTreeSet::new(),
            umis_flag: false,
            dist: 0,
        }]);
        let comp = BTreeSet::from([bs("0")]);
        assert!(local_umis_decide(&bs("0"), &comp, &topo, &[], &[]));

        // A predecessor outside the component with umis = true forces false.
        let pred_state = LocalUmisState {
            umis: true,
            ..Default::default()
        };
        let pred_ids = vec![bs("111")];
        assert!(!local_umis_decide(
            &bs("0"),
            &comp,
            &topo,
            &pred_ids,
            &[&pred_state]
        ));
    }

    #[test]
    fn three_cycle_cascade_settles_on_max_id() {
        let g = generate(&GeneratorSpec::DirectedCycle { n: 3 }, 0).unwrap();
        let p = LocalUmisProtocol::new(&g, ids(&["0", "10", "11"])).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 0, 30).unwrap();
        let outputs = mis_outputs(&p, &g, trace.final_config());
        assert_eq!(outputs.as_slice(), &[false, false, true]);
        assert!(check_umis(&g, &outputs).is_valid());
    }

    #[test]
    fn constructor_rejects_ancestor_collision() {
        let g = generate(&GeneratorSpec::Path { n: 2 }, 0).unwrap();
        assert!(matches!(
            LocalUmisProtocol::new(&g, ids(&["0", "0"])),
            Err(ProtocolError::NotLocallyNamed { process: 1 })
        ));
    }

    #[test]
    fn collisions_across_unreachable_branches_are_fine() {
        // Two tails hanging off a 2-cycle may share an identifier.
        let g = Digraph::new(4, [(0, 1), (1, 0), (0, 2), (1, 3)]).unwrap();
        let p = LocalUmisProtocol::new(&g, ids(&["0", "1", "00", "00"])).unwrap();
        let c0 = Configuration::zeroed(&p, &g);
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 0, 20).unwrap();
        let outputs = mis_outputs(&p, &g, trace.final_config());
        assert!(check_umis(&g, &outputs).is_valid());
    }

    #[test]
    fn composite_stabilizes_from_all_same_on_cycle() {
        let g = generate(&GeneratorSpec::DirectedCycle { n: 3 }, 0).unwrap();
        let p = compose(NamingProtocol::default());
        let spec = AdversarySpec::all_same(2, 3);
        let (c0, ell) = p.initial_configuration(&g, &spec).unwrap();
        assert!(ell >= 2);
        assert_eq!(ell, p.count_fake_identifiers(&g, &c0));
        let trace = run(&p, &g, c0, SchedulerKind::Synchronous, 21, 600).unwrap();
        let outputs = mis_outputs(&p, &g, trace.final_config());
        assert!(check_umis(&g, &outputs).is_valid(), "outputs {outputs}");
        let naming_ids: Vec<BitString> = trace
            .final_config()
            .states()
            .iter()
            .map(|s| s.naming.id.clone())
            .collect();
        assert!(local_naming_holds(&g, &naming_ids));
    }

    #[test]
    fn composite_requires_synchronous() {
        let g = generate(&GeneratorSpec::DirectedCycle { n: 3 }, 0).unwrap();
        let p = compose(NamingProtocol::default());
        let c0 = Configuration::zeroed(&p, &g);
        assert!(run(
            &p,
            &g,
            c0,
            SchedulerKind::Distributed { fairness_bound: 2 },
            0,
            5
        )
        .is_err());
    }
}
