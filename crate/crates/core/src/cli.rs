//! Command-line front end. Exit codes: 0 success, 1 scenario or usage error,
//! 2 invariant breach, 3 I/O.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::plan_request;
use crate::baselines::oracle::{oracle_optimal_cost, OracleInstance, OracleSolution};
use crate::error::{Error, Result};
use crate::ranges::RangeScheme;
use crate::scenario::{Scenario, VerifyMode};
use crate::shadow::ShadowLedger;
use crate::sim::{run_workload, RunOptions, RunOutput, StrategyKind};

#[derive(Debug, Parser)]
#[command(name = "reshare", version, about = "Online multi-VNF service embedding simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VerifyArg {
    Full,
    Sampled,
    Off,
}

impl From<VerifyArg> for VerifyMode {
    fn from(v: VerifyArg) -> Self {
        match v {
            VerifyArg::Full => VerifyMode::Full,
            VerifyArg::Sampled => VerifyMode::Sampled,
            VerifyArg::Off => VerifyMode::Off,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and report every problem found.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one strategy (or the whole sweep) and write metrics.csv and summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// reshare | c-reshare:EPS | relax-sota | shadow-only[:EPS]
        #[arg(long)]
        strategy: Option<String>,
        /// epsilon* for reshare, or the fixed epsilon for c-reshare and shadow-only.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        verify: Option<VerifyArg>,
        /// Run every strategy, one subdirectory each.
        #[arg(long)]
        sweep: bool,
    },
    /// Run several strategies on the same workload and report cost ratios.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated list; the first entry is the one savings are reported for.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        strategy: Vec<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        verify: Option<VerifyArg>,
    },
    /// Exact optimum of the scenario's requests taken as simultaneously active.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 6)]
        max_jobs: usize,
        /// Let jobs of one request use different layers.
        #[arg(long)]
        free_layers: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Strategies of a sweep, in output order.
pub fn sweep_strategies() -> Vec<StrategyKind> {
    vec![
        StrategyKind::Reshare,
        StrategyKind::CReshare(1.0),
        StrategyKind::CReshare(0.5),
        StrategyKind::CReshare(0.25),
        StrategyKind::CReshare(0.125),
        StrategyKind::RelaxSota,
        StrategyKind::ShadowOnly(None),
    ]
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invariant(_) => 2,
        Error::Io(_) => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        _ => 1,
    }
}

fn parse_strategy(s: &str, epsilon: Option<f64>) -> Result<StrategyKind> {
    match (s, epsilon) {
        ("c-reshare", Some(e)) => format!("c-reshare:{e}").parse(),
        ("shadow-only", Some(e)) => format!("shadow-only:{e}").parse(),
        _ => s.parse(),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        )));
    }
    Scenario::load(path)
}

#[derive(Serialize)]
struct CompareRow {
    strategy: String,
    label: String,
    cumulative_cost: f64,
    ratio_to_first: f64,
    /// Percentage saved by the first strategy relative to this one.
    savings_of_first_pct: f64,
    normalized_to_shadow: f64,
}

#[derive(Serialize)]
struct Comparison {
    scenario: String,
    seed: u64,
    reference: String,
    strategies: Vec<CompareRow>,
}

#[derive(Serialize)]
struct OracleReport {
    scenario: String,
    jobs: usize,
    per_request_layers: bool,
    shadow_lower_bound: f64,
    #[serde(flatten)]
    solution: OracleSolution,
}

fn run_many(scenario: &Scenario, strategies: &[StrategyKind], opts: &RunOptions) -> Result<Vec<RunOutput>> {
    let seed = opts.seed.unwrap_or(scenario.seed());
    let workload = scenario.workload(seed)?;
    strategies
        .par_iter()
        .map(|s| run_workload(scenario, &workload, *s, seed, opts))
        .collect()
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Validate { scenario } => {
            let sc = load(&scenario)?;
            writeln!(
                out,
                "{}: ok ({} layers, {} vnfs, {} services)",
                sc.name(),
                sc.model.topology.num_layers(),
                sc.model.catalog.vnfs.len(),
                sc.model.catalog.services.len()
            )?;
        }
        Command::Run { scenario, strategy, epsilon, seed, out: dir, verify, sweep } => {
            let sc = load(&scenario)?;
            let dir = dir.or_else(|| sc.file.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let mut opts = RunOptions { seed, verify: verify.map(Into::into), ..Default::default() };
            if sweep {
                opts.epsilon_star = epsilon;
                let strategies = sweep_strategies();
                let outputs = run_many(&sc, &strategies, &opts)?;
                for (s, o) in strategies.iter().zip(&outputs) {
                    o.write(&dir.join(s.slug()))?;
                    writeln!(out, "{:<20} cumulative cost {:.6}", s.slug(), o.summary.cumulative_cost)?;
                }
            } else {
                let kind = strategy.unwrap_or_else(|| sc.file.strategy.kind.clone());
                let strategy = parse_strategy(&kind, epsilon)?;
                if strategy == StrategyKind::Reshare {
                    opts.epsilon_star = epsilon;
                }
                opts.strategy = Some(strategy);
                let o = crate::sim::run(&sc, &opts)?;
                o.write(&dir)?;
                writeln!(
                    out,
                    "{}: {} events, cumulative cost {:.6}, {} transitions -> {}",
                    strategy,
                    o.summary.events,
                    o.summary.cumulative_cost,
                    o.summary.transitions.len(),
                    dir.display()
                )?;
            }
        }
        Command::Compare { scenario, strategy, epsilon, seed, out: dir, verify } => {
            if strategy.len() < 2 {
                return Err(Error::Usage("compare needs at least two strategies".into()));
            }
            let sc = load(&scenario)?;
            let mut kinds = strategy.iter().map(|s| parse_strategy(s, None)).collect::<Result<Vec<_>>>()?;
            if !kinds.iter().any(|k| matches!(k, StrategyKind::ShadowOnly(_))) {
                kinds.push(StrategyKind::ShadowOnly(None));
            }
            let opts = RunOptions {
                seed,
                verify: verify.map(Into::into),
                epsilon_star: epsilon,
                no_metrics: true,
                ..Default::default()
            };
            let outputs = run_many(&sc, &kinds, &opts)?;
            let first = outputs[0].summary.cumulative_cost;
            let shadow = outputs
                .iter()
                .find(|o| o.summary.strategy.starts_with("shadow-only"))
                .map(|o| o.summary.cumulative_cost)
                .unwrap_or(f64::NAN);
            let rows = outputs
                .iter()
                .map(|o| {
                    let c = o.summary.cumulative_cost;
                    CompareRow {
                        strategy: o.summary.strategy.clone(),
                        label: o.summary.label.clone(),
                        cumulative_cost: c,
                        ratio_to_first: c / first,
                        savings_of_first_pct: if c > 0.0 { (c - first) / c * 100.0 } else { 0.0 },
                        normalized_to_shadow: c / shadow,
                    }
                })
                .collect();
            let report = Comparison {
                scenario: sc.name().to_string(),
                seed: seed.unwrap_or(sc.seed()),
                reference: kinds[0].to_string(),
                strategies: rows,
            };
            let json = serde_json::to_string_pretty(&report)? + "\n";
            if let Some(dir) = dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("comparison.json"), &json)?;
            }
            out.write_all(json.as_bytes())?;
        }
        Command::Oracle { scenario, seed, max_jobs, free_layers, out: dir } => {
            let sc = load(&scenario)?;
            let w = sc.workload(seed.unwrap_or(sc.seed()))?;
            let mut inst = OracleInstance::from_requests(&sc.model, &w.requests)?;
            inst.max_jobs = max_jobs;
            inst.per_request_layers = !free_layers;
            let solution = oracle_optimal_cost(&inst)?;
            let p = sc.model.params;
            let mut ledger = ShadowLedger::new(
                Arc::clone(&sc.model),
                1,
                RangeScheme::new(sc.epsilon_star(), p.mu_bar, p.lambda_min)?,
            );
            for r in &w.requests {
                let m = &sc.model;
                let plan = plan_request(r, m.catalog.service(r.service), &m.catalog, &m.topology, &m.params)?;
                ledger.add(&plan, r.load);
            }
            let report = OracleReport {
                scenario: sc.name().to_string(),
                jobs: inst.jobs.len(),
                per_request_layers: inst.per_request_layers,
                shadow_lower_bound: ledger.full_cost(),
                solution,
            };
            let json = serde_json::to_string_pretty(&report)? + "\n";
            if let Some(dir) = dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("oracle.json"), &json)?;
            }
            out.write_all(json.as_bytes())?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
