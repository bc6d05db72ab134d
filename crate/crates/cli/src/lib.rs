//! Campaign machinery behind the `unimis` binary: builds graphs and
//! adversary configurations, runs seeded trials across protocols and
//! schedulers, and aggregates convergence statistics with bound-ratio
//! columns. Reports are deterministic functions of the experiment spec:
//! seeds may run concurrently but rows are emitted in seed order.

use std::fmt;
use std::io::{self, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use unimis::adversary::{Adversary, AdversaryError, AdversaryMode, AdversarySpec};
use unimis::bitstring::BitString;
use unimis::digraph::{Digraph, GraphError};
use unimis::generate::{generate, GeneratorSpec};
use unimis::protocols::det::DetProtocol;
use unimis::protocols::local_umis::{compose, LocalUmisProtocol};
use unimis::protocols::naming::{local_naming_holds, NamingProtocol, NamingState};
use unimis::protocols::prefix::PrefixProtocol;
use unimis::protocols::ProtocolError;
use unimis::runtime::{
    mis_outputs, Configuration, Protocol, RuntimeError, SchedulerKind, Simulation,
};
use unimis::umis::{check_umis, MisVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    Det,
    Prefix,
    Naming,
    LocalUmis,
    Composite,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Det => "det",
            ProtocolKind::Prefix => "prefix",
            ProtocolKind::Naming => "naming",
            ProtocolKind::LocalUmis => "local-umis",
            ProtocolKind::Composite => "composite",
        }
    }

    pub fn requires_synchronous(self) -> bool {
        matches!(self, ProtocolKind::Naming | ProtocolKind::Composite)
    }

    fn rejects_all_same(self) -> bool {
        matches!(self, ProtocolKind::Det | ProtocolKind::LocalUmis)
    }
}

impl FromStr for ProtocolKind {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "det" => Ok(ProtocolKind::Det),
            "prefix" => Ok(ProtocolKind::Prefix),
            "naming" => Ok(ProtocolKind::Naming),
            "local-umis" => Ok(ProtocolKind::LocalUmis),
            "composite" => Ok(ProtocolKind::Composite),
            other => Err(CampaignError::Parse(format!("unknown protocol `{other}`"))),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scheduler request as given on the command line; the fairness bound of a
/// locally central run defaults per graph to its max neighbor degree plus
/// two when unspecified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerChoice {
    Synchronous,
    Distributed { bound: Option<usize> },
    LocallyCentral { bound: Option<usize> },
}

impl SchedulerChoice {
    pub fn resolve(self, g: &Digraph) -> Result<SchedulerKind, CampaignError> {
        let kind = match self {
            SchedulerChoice::Synchronous => SchedulerKind::Synchronous,
            SchedulerChoice::Distributed { bound } => SchedulerKind::Distributed {
                fairness_bound: bound.unwrap_or(4),
            },
            SchedulerChoice::LocallyCentral { bound } => SchedulerKind::LocallyCentral {
                fairness_bound: bound.unwrap_or(g.max_neighbor_degree() + 2),
            },
        };
        kind.validate(g)?;
        Ok(kind)
    }

    pub fn is_synchronous(self) -> bool {
        matches!(self, SchedulerChoice::Synchronous)
    }
}

impl FromStr for SchedulerChoice {
    type Err = CampaignError;

    /// Accepts `sync`, `dist`, `dist:BOUND`, `local-central` and
    /// `local-central:BOUND`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CampaignError::Parse(format!("unknown scheduler `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let parse_bound = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["sync"] => Ok(SchedulerChoice::Synchronous),
            ["dist"] => Ok(SchedulerChoice::Distributed { bound: None }),
            ["dist", b] => Ok(SchedulerChoice::Distributed {
                bound: Some(parse_bound(b)?),
            }),
            ["local-central"] => Ok(SchedulerChoice::LocallyCentral { bound: None }),
            ["local-central", b] => Ok(SchedulerChoice::LocallyCentral {
                bound: Some(parse_bound(b)?),
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SchedulerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerChoice::Synchronous => write!(f, "sync"),
            SchedulerChoice::Distributed { bound: None } => write!(f, "dist"),
            SchedulerChoice::Distributed { bound: Some(b) } => write!(f, "dist:{b}"),
            SchedulerChoice::LocallyCentral { bound: None } => write!(f, "local-central"),
            SchedulerChoice::LocallyCentral { bound: Some(b) } => write!(f, "local-central:{b}"),
        }
    }
}

/// Inclusive-exclusive seed range, written `a..b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedRange(pub Range<u64>);

impl FromStr for SeedRange {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CampaignError::Parse(format!("bad seed range `{s}` (expected a..b)"));
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let lo: u64 = lo.parse().map_err(|_| bad())?;
        let hi: u64 = hi.parse().map_err(|_| bad())?;
        Ok(SeedRange(lo..hi))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub protocol: ProtocolKind,
    pub graph: GeneratorSpec,
    pub scheduler: SchedulerChoice,
    pub adversary: AdversaryMode,
    pub seeds: Range<u64>,
    pub max_rounds: usize,
    /// Output-stability window in rounds; defaults to diameter + 2.
    pub window: Option<usize>,
    /// Nonce range for the naming layer.
    pub k: u32,
}

#[derive(Error, Debug)]
pub enum CampaignError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("protocol {protocol} runs only under the synchronous scheduler")]
    SchedulerMismatch { protocol: &'static str },
    #[error("adversary mode {mode} does not apply to protocol {protocol}")]
    AdversaryMismatch {
        protocol: &'static str,
        mode: String,
    },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// One seed's outcome; `rounds` is the earliest stability round when the
/// trial converged, and a timeout is data, not an error.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub diameter: usize,
    pub ell: usize,
    pub converged: bool,
    pub rounds: Option<usize>,
    pub valid: bool,
    pub peak_state_bits: usize,
}

impl TrialRecord {
    /// rounds / (D + 1)
    pub fn ratio_diameter(&self) -> Option<f64> {
        self.rounds.map(|r| r as f64 / (self.diameter as f64 + 1.0))
    }

    /// rounds / (log2 n + log2(ell + 2) + D)
    pub fn ratio_log(&self) -> Option<f64> {
        self.rounds.map(|r| {
            r as f64
                / ((self.n as f64).log2() + ((self.ell + 2) as f64).log2() + self.diameter as f64)
        })
    }

    /// rounds / ((n + ell) * log2(n + 2))
    pub fn ratio_nlog(&self) -> Option<f64> {
        self.rounds
            .map(|r| r as f64 / ((self.n + self.ell) as f64 * ((self.n + 2) as f64).log2()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub protocol: String,
    pub graph: String,
    pub scheduler: String,
    pub adversary: String,
    pub trials: usize,
    pub converged: usize,
    pub timeouts: usize,
    pub median_rounds: Option<f64>,
    pub p90_rounds: Option<f64>,
    pub median_ratio_diameter: Option<f64>,
    pub median_ratio_log: Option<f64>,
    pub median_ratio_nlog: Option<f64>,
    pub max_peak_state_bits: usize,
}

#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn median_of(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn quantile_of(mut values: Vec<f64>, q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((values.len() - 1) as f64 * q).round() as usize;
    Some(values[idx])
}

/// Distinct per-process identifiers for constants-mode runs, seeded.
pub fn distinct_identifiers(n: usize, seed: u64) -> Vec<BitString> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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

struct TrialOutcome {
    ell: usize,
    converged_round: Option<usize>,
    valid: bool,
    peak_state_bits: usize,
}

/// Generic output-stability trial: runs until the mis-output vector has been
/// constant and UMIS-valid for `window` consecutive rounds, or `max_rounds`
/// rounds elapsed.
fn output_trial<P: Protocol + Adversary>(
    protocol: &P,
    g: &Digraph,
    adversary: &AdversarySpec,
    scheduler: SchedulerKind,
    seed: u64,
    window: usize,
    max_rounds: usize,
) -> Result<TrialOutcome, CampaignError> {
    let (initial, ell) = protocol.initial_configuration(g, adversary)?;
    let mut sim = Simulation::new(protocol, g, initial.clone(), scheduler, seed)?;
    let per_process_bits = |c: &Configuration<P::State>| {
        c.states()
            .iter()
            .map(|s| protocol.state_size_bits(s))
            .max()
            .unwrap_or(0)
    };
    let mut outputs: Vec<MisVector> = vec![mis_outputs(protocol, g, &initial)];
    let mut boundaries: Vec<usize> = Vec::new();
    let mut peak = per_process_bits(&initial);
    let cfg_of = |boundaries: &[usize], r: usize| if r == 0 { 0 } else { boundaries[r - 1] };
    let mut stable: Option<usize> = None;
    'outer: while sim.rounds_completed() < max_rounds + window && !sim.is_terminal() {
        let target = (sim.rounds_completed() + 16).min(max_rounds + window);
        while sim.rounds_completed() < target && !sim.is_terminal() {
            let ev = sim.step();
            if ev.activated.is_empty() {
                break;
            }
            outputs.push(mis_outputs(protocol, g, sim.current()));
            peak = peak.max(per_process_bits(sim.current()));
            if ev.completed_round {
                boundaries.push(outputs.len() - 1);
            }
        }
        if boundaries.len() >= window {
            for r in 0..=boundaries.len() - window {
                let (lo, hi) = (cfg_of(&boundaries, r), cfg_of(&boundaries, r + window));
                if check_umis(g, &outputs[lo]).is_valid()
                    && outputs[lo..=hi].iter().all(|v| *v == outputs[lo])
                {
                    stable = Some(r);
                    break 'outer;
                }
            }
        }
    }
    let valid = match stable {
        Some(r) => check_umis(g, &outputs[cfg_of(&boundaries, r)]).is_valid(),
        None => check_umis(g, outputs.last().expect("nonempty")).is_valid(),
    };
    Ok(TrialOutcome {
        ell,
        converged_round: stable.filter(|&r| r <= max_rounds),
        valid,
        peak_state_bits: peak,
    })
}

/// Naming trial: convergence is the local-naming predicate holding for
/// `window` consecutive rounds; there is no mis output to stabilize.
fn naming_trial(
    protocol: &NamingProtocol,
    g: &Digraph,
    adversary: &AdversarySpec,
    seed: u64,
    window: usize,
    max_rounds: usize,
) -> Result<TrialOutcome, CampaignError> {
    let (initial, ell) = protocol.initial_configuration(g, adversary)?;
    let mut sim = Simulation::new(
        protocol,
        g,
        initial.clone(),
        SchedulerKind::Synchronous,
        seed,
    )?;
    let named = |c: &Configuration<NamingState>| {
        let ids: Vec<BitString> = c.states().iter().map(|s| s.id.clone()).collect();
        local_naming_holds(g, &ids)
    };
    let per_process_bits = |c: &Configuration<NamingState>| {
        c.states()
            .iter()
            .map(|s| protocol.state_size_bits(s))
            .max()
            .unwrap_or(0)
    };
    let mut peak = per_process_bits(&initial);
    let mut last_violation: Option<usize> = if named(&initial) { None } else { Some(0) };
    loop {
        let rounds = sim.rounds_completed();
        let candidate = last_violation.unwrap_or(0);
        if rounds >= candidate + window && candidate <= max_rounds {
            break;
        }
        if rounds >= max_rounds + window {
            break;
        }
        let ev = sim.step();
        if ev.activated.is_empty() {
            break;
        }
        peak = peak.max(per_process_bits(sim.current()));
        if ev.completed_round && !named(sim.current()) {
            last_violation = Some(sim.rounds_completed());
        }
    }
    let converged = named(sim.current()) && last_violation.unwrap_or(0) <= max_rounds;
    Ok(TrialOutcome {
        ell,
        converged_round: converged.then(|| last_violation.unwrap_or(0)),
        valid: named(sim.current()),
        peak_state_bits: peak,
    })
}

fn run_trial(spec: &ExperimentSpec, seed: u64) -> Result<TrialRecord, CampaignError> {
    let g = generate(&spec.graph, seed)?;
    let scheduler = spec.scheduler.resolve(&g)?;
    let adversary = AdversarySpec {
        mode: spec.adversary.clone(),
        seed: seed.wrapping_mul(0x9E37_79B9),
    };
    let window = spec.window.unwrap_or(g.diameter() + 2).max(1);
    let max_rounds = spec.max_rounds;
    let outcome = match spec.protocol {
        ProtocolKind::Det => {
            let p = DetProtocol::permuted(&g, seed);
            output_trial(&p, &g, &adversary, scheduler, seed, window, max_rounds)?
        }
        ProtocolKind::Prefix => {
            // Identifiers grow one bit per activation; budget for the whole
            // horizon so the overflow diagnostic never fires spuriously.
            let cap = 512.max((max_rounds + window) * 2 + 64);
            let p = PrefixProtocol::with_max_id_len(cap);
            output_trial(&p, &g, &adversary, scheduler, seed, window, max_rounds)?
        }
        ProtocolKind::Naming => {
            let p = NamingProtocol::new(spec.k)?;
            naming_trial(&p, &g, &adversary, seed, window, max_rounds)?
        }
        ProtocolKind::LocalUmis => {
            let p = LocalUmisProtocol::new(&g, distinct_identifiers(g.n(), seed))?;
            output_trial(&p, &g, &adversary, scheduler, seed, window, max_rounds)?
        }
        ProtocolKind::Composite => {
            let p = compose(NamingProtocol::new(spec.k)?);
            output_trial(&p, &g, &adversary, scheduler, seed, window, max_rounds)?
        }
    };
    Ok(TrialRecord {
        seed,
        n: g.n(),
        m: g.edge_count(),
        diameter: g.diameter(),
        ell: outcome.ell,
        converged: outcome.converged_round.is_some(),
        rounds: outcome.converged_round,
        valid: outcome.valid,
        peak_state_bits: outcome.peak_state_bits,
    })
}

fn validate(spec: &ExperimentSpec) -> Result<(), CampaignError> {
    if spec.protocol.requires_synchronous() && !spec.scheduler.is_synchronous() {
        return Err(CampaignError::SchedulerMismatch {
            protocol: spec.protocol.name(),
        });
    }
    if spec.protocol.rejects_all_same()
        && matches!(spec.adversary, AdversaryMode::AllSameIdentifier { .. })
    {
        return Err(CampaignError::AdversaryMismatch {
            protocol: spec.protocol.name(),
            mode: spec.adversary.to_string(),
        });
    }
    if spec.max_rounds == 0 {
        return Err(CampaignError::Parse("max-rounds must be at least 1".into()));
    }
    Ok(())
}

/// Runs every seed (concurrently) and aggregates. Configuration problems
/// surface before any trial runs; a timed-out trial is a row, not an error.
pub fn run_campaign(spec: &ExperimentSpec) -> Result<CampaignReport, CampaignError> {
    validate(spec)?;
    let seeds: Vec<u64> = spec.seeds.clone().collect();
    // Probe the first seed's configuration synchronously so setup errors
    // (graph spec, scheduler bound, adversary mode) reject the campaign.
    if let Some(&first) = seeds.first() {
        let g = generate(&spec.graph, first)?;
        spec.scheduler.resolve(&g)?;
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(8);
    let mut results: Vec<(u64, Result<TrialRecord, CampaignError>)> =
        Vec::with_capacity(seeds.len());
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<u64>> = seeds
            .chunks(seeds.len().div_ceil(workers).max(1))
            .map(|c| c.to_vec())
            .collect();
        let mut handles = Vec::new();
        for chunk in chunks {
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|seed| (seed, run_trial(spec, seed)))
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            results.extend(handle.join().expect("trial worker panicked"));
        }
    });
    results.sort_by_key(|(seed, _)| *seed);
    let mut records = Vec::with_capacity(results.len());
    for (_, result) in results {
        records.push(result?);
    }
    let summary = summarize(spec, &records);
    Ok(CampaignReport { records, summary })
}

fn summarize(spec: &ExperimentSpec, records: &[TrialRecord]) -> Summary {
    let converged: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
    let rounds: Vec<f64> = converged
        .iter()
        .filter_map(|r| r.rounds)
        .map(|r| r as f64)
        .collect();
    Summary {
        protocol: spec.protocol.to_string(),
        graph: spec.graph.to_string(),
        scheduler: spec.scheduler.to_string(),
        adversary: spec.adversary.to_string(),
        trials: records.len(),
        converged: converged.len(),
        timeouts: records.len() - converged.len(),
        median_rounds: median_of(rounds.clone()),
        p90_rounds: quantile_of(rounds, 0.9),
        median_ratio_diameter: median_of(
            converged
                .iter()
                .filter_map(|r| r.ratio_diameter())
                .collect(),
        ),
        median_ratio_log: median_of(converged.iter().filter_map(|r| r.ratio_log()).collect()),
        median_ratio_nlog: median_of(converged.iter().filter_map(|r| r.ratio_nlog()).collect()),
        max_peak_state_bits: records.iter().map(|r| r.peak_state_bits).max().unwrap_or(0),
    }
}

/// CSV with a header row; ratio columns are empty for timed-out trials.
pub fn write_csv<W: Write>(mut w: W, report: &CampaignReport) -> io::Result<()> {
    writeln!(
        w,
        "seed,n,m,diameter,ell,converged,rounds,valid,peak_state_bits,ratio_diameter_bound,ratio_log_bound,ratio_nlog_bound"
    )?;
    let fmt_ratio = |r: Option<f64>| r.map_or(String::new(), |v| format!("{v:.4}"));
    for r in &report.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.n,
            r.m,
            r.diameter,
            r.ell,
            r.converged,
            r.rounds.map_or(String::new(), |x| x.to_string()),
            r.valid,
            r.peak_state_bits,
            fmt_ratio(r.ratio_diameter()),
            fmt_ratio(r.ratio_log()),
            fmt_ratio(r.ratio_nlog()),
        )?;
    }
    Ok(())
}

pub fn summary_json(report: &CampaignReport) -> String {
    serde_json::to_string_pretty(&report.summary).expect("summary serializes")
}

/// Builds the per-protocol objects needed by the `trace` subcommand and
/// writes the trace text export for one seeded run.
pub fn write_single_trace<W: Write>(
    w: W,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<(), CampaignError> {
    validate(spec)?;
    let g = generate(&spec.graph, seed)?;
    let scheduler = spec.scheduler.resolve(&g)?;
    let adversary = AdversarySpec {
        mode: spec.adversary.clone(),
        seed: seed.wrapping_mul(0x9E37_79B9),
    };
    match spec.protocol {
        ProtocolKind::Det => {
            let p = DetProtocol::permuted(&g, seed);
            let (c0, _) = p.initial_configuration(&g, &adversary)?;
            let trace = unimis::runtime::run(&p, &g, c0, scheduler, seed, spec.max_rounds)?;
            unimis::runtime::write_trace_text(w, &trace, &g, &p)?;
        }
        ProtocolKind::Prefix => {
            let cap = 512.max(spec.max_rounds * 2 + 64);
            let p = PrefixProtocol::with_max_id_len(cap);
            let (c0, _) = p.initial_configuration(&g, &adversary)?;
            let trace = unimis::runtime::run(&p, &g, c0, scheduler, seed, spec.max_rounds)?;
            unimis::runtime::write_trace_text(w, &trace, &g, &p)?;
        }
        ProtocolKind::Naming => {
            let p = NamingProtocol::new(spec.k)?;
            let (c0, _) = p.initial_configuration(&g, &adversary)?;
            let trace = unimis::runtime::run(&p, &g, c0, scheduler, seed, spec.max_rounds)?;
            unimis::runtime::write_trace_text(w, &trace, &g, &p)?;
        }
        ProtocolKind::LocalUmis => {
            let p = LocalUmisProtocol::new(&g, distinct_identifiers(g.n(), seed))?;
            let (c0, _) = p.initial_configuration(&g, &adversary)?;
            let trace = unimis::runtime::run(&p, &g, c0, scheduler, seed, spec.max_rounds)?;
            unimis::runtime::write_trace_text(w, &trace, &g, &p)?;
        }
        ProtocolKind::Composite => {
            let p = compose(NamingProtocol::new(spec.k)?);
            let (c0, _) = p.initial_configuration(&g, &adversary)?;
            let trace = unimis::runtime::run(&p, &g, c0, scheduler, seed, spec.max_rounds)?;
            unimis::runtime::write_trace_text(w, &trace, &g, &p)?;
        }
    }
    Ok(())
}
