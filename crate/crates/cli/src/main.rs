//! `unimis` — batch experiment runner for the self-stabilizing UMIS
//! protocols. `campaign` sweeps seeds and writes CSV plus a JSON summary;
//! `trace` exports one run as structured text; `graph` emits a generated
//! graph in the line-oriented text format.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use unimis::adversary::AdversaryMode;
use unimis::generate::{generate, GeneratorSpec};
use unimis_cli::{
    run_campaign, summary_json, write_csv, write_single_trace, ExperimentSpec, ProtocolKind,
    SchedulerChoice, SeedRange,
};

const SEED_BASE_ENV: &str = "UNIMIS_SEED_BASE";

#[derive(Parser)]
#[command(
    name = "unimis",
    version,
    about = "Self-stabilizing UMIS protocol experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded campaign and emit convergence statistics.
    Campaign(CampaignArgs),
    /// Run a single trial and export its trace as text.
    Trace(TraceArgs),
    /// Generate a graph and emit the line-oriented text format.
    Graph(GraphArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Protocol: det, prefix, naming, local-umis, composite
    #[arg(long)]
    protocol: ProtocolKind,
    /// Graph spec, e.g. cycle:8, path:4, random:20:0.2, strong:16:8,
    /// cliques:3,2,4, fixture:system-a
    #[arg(long)]
    graph: GeneratorSpec,
    /// Scheduler: sync, dist, dist:BOUND, local-central, local-central:BOUND
    #[arg(long, default_value = "sync")]
    scheduler: SchedulerChoice,
    /// Adversary: zero, corrupt:BUDGET:PROB, same-id, same-id:BUDGET
    #[arg(long, default_value = "zero")]
    adversary: AdversaryMode,
    /// Round budget per trial.
    #[arg(long, default_value_t = 200)]
    max_rounds: usize,
    /// Output-stability window in rounds (default: diameter + 2).
    #[arg(long)]
    window: Option<usize>,
    /// Nonce range constant for the naming layer (k >= 2).
    #[arg(long, default_value_t = 2)]
    k: u32,
}

impl ExperimentArgs {
    fn into_spec(self, seeds: std::ops::Range<u64>) -> ExperimentSpec {
        ExperimentSpec {
            protocol: self.protocol,
            graph: self.graph,
            scheduler: self.scheduler,
            adversary: self.adversary,
            seeds,
            max_rounds: self.max_rounds,
            window: self.window,
            k: self.k,
        }
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Seed range a..b (default: base..base+10 with base from
    /// UNIMIS_SEED_BASE, or 0).
    #[arg(long)]
    seeds: Option<SeedRange>,
    /// CSV output path; a JSON summary lands next to it with a .json
    /// extension. Without --out the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Seed for the single trial.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Graph spec (same grammar as campaign --graph).
    #[arg(long)]
    graph: GeneratorSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_seeds() -> std::ops::Range<u64> {
    let base = std::env::var(SEED_BASE_ENV)
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
        .unwrap_or(0);
    base..base + 10
}

fn campaign(args: CampaignArgs) -> Result<(), String> {
    let seeds = args.seeds.map_or_else(default_seeds, |r| r.0);
    let out = args.out;
    let spec = args.experiment.into_spec(seeds);
    let report = run_campaign(&spec).map_err(|e| e.to_string())?;
    match &out {
        Some(path) => {
            let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_csv(file, &report).map_err(|e| e.to_string())?;
            let json_path = path.with_extension("json");
            let mut json =
                File::create(&json_path).map_err(|e| format!("{}: {e}", json_path.display()))?;
            writeln!(json, "{}", summary_json(&report)).map_err(|e| e.to_string())?;
            eprintln!("wrote {} and {}", path.display(), json_path.display());
        }
        None => {
            write_csv(io::stdout().lock(), &report).map_err(|e| e.to_string())?;
        }
    }
    println!("{}", summary_json(&report));
    Ok(())
}

fn trace(args: TraceArgs) -> Result<(), String> {
    let seed = args.seed;
    let out = args.out;
    let spec = args.experiment.into_spec(seed..seed + 1);
    match &out {
        Some(path) => {
            let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_single_trace(file, &spec, seed).map_err(|e| e.to_string())
        }
        None => write_single_trace(io::stdout().lock(), &spec, seed).map_err(|e| e.to_string()),
    }
}

fn graph(args: GraphArgs) -> Result<(), String> {
    let g = generate(&args.graph, args.seed).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => {
            let mut file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            file.write_all(g.to_text().as_bytes())
                .map_err(|e| e.to_string())
        }
        None => {
            print!("{}", g.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Campaign(args) => campaign(args),
        Command::Trace(args) => trace(args),
        Command::Graph(args) => graph(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
