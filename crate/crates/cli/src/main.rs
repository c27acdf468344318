use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqdiag_core::bench::{run_benchmark, write_report, BenchError, Suite};
use seqdiag_core::dpi::{ComponentSet, Dpi};
use seqdiag_core::query::{CandidatePool, Heuristic, Query};
use seqdiag_core::session::{
    run_session, Engine, Oracle, Outcome, SessionConfig, SessionError, SimulatedOracle, Status,
};
use seqdiag_service::store::{StoreConfig, DEFAULT_IDLE_TIMEOUT};
use seqdiag_service::ServeOptions;

#[derive(Parser)]
#[command(name = "seqdiag", version, about = "Sequential model-based diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a diagnosis session against a simulated or interactive oracle.
    Run(RunArgs),
    /// Print all minimal diagnoses and minimal conflicts by enumeration.
    Oracle {
        #[arg(long)]
        dpi: PathBuf,
    },
    /// Compare both engines over a benchmark suite.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory with static files served besides the API.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Directory for per-session snapshot files.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        /// Seconds of inactivity after which a session is dropped.
        #[arg(long, default_value_t = DEFAULT_IDLE_TIMEOUT.as_secs())]
        idle_timeout: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dpi: PathBuf,
    #[arg(long, default_value = "dynamichs")]
    engine: Engine,
    #[arg(long, default_value_t = 5)]
    ld: usize,
    #[arg(long, default_value = "ent")]
    heuristic: Heuristic,
    /// Target diagnosis as comma-separated component ids; drawn at random when absent.
    #[arg(long, conflicts_with = "interactive")]
    target: Option<String>,
    /// Ask the measurement queries on the terminal.
    #[arg(long)]
    interactive: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the session report document here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = seqdiag_core::session::DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    /// Offer only literals as measurements.
    #[arg(long)]
    literals_only: bool,
}

enum CliError {
    Input(String),
    Engine(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 3,
            CliError::Engine(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Engine(m) => m,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> CliError {
        match e {
            BenchError::Mismatch { .. } | BenchError::Session { .. } | BenchError::Generator(_) => {
                CliError::Engine(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn load_dpi(path: &Path) -> Result<Dpi, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Dpi::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn show(dpi: &Dpi, set: &ComponentSet) -> String {
    dpi.names(set).join(",")
}

fn oracle(path: &Path) -> Result<(), CliError> {
    let dpi = load_dpi(path)?;
    let err = |e: seqdiag_core::dpi::DpiError| CliError::Input(e.to_string());
    let diagnoses = dpi.brute_force_min_diagnoses().map_err(err)?;
    let conflicts = dpi.brute_force_min_conflicts().map_err(err)?;
    println!("minimal diagnoses ({}):", diagnoses.len());
    for d in &diagnoses {
        println!("  [{}]", show(&dpi, d));
    }
    println!("minimal conflicts ({}):", conflicts.len());
    for c in &conflicts {
        println!("  <{}>", show(&dpi, c));
    }
    Ok(())
}

struct TerminalOracle;

impl Oracle for TerminalOracle {
    fn answer(&mut self, query: &Query, _dpi: &Dpi) -> Option<Outcome> {
        let stdin = io::stdin();
        loop {
            print!("Must it be true that {}? [y/n/q] ", query.text);
            io::stdout().flush().ok();
            let mut line = String::new();
            if stdin.lock().read_line(&mut line).ok()? == 0 {
                return None;
            }
            match line.trim() {
                "q" | "quit" => return None,
                other => match other.parse() {
                    Ok(outcome) => return Some(outcome),
                    Err(_) => println!("please answer y, n or q"),
                },
            }
        }
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let dpi = load_dpi(&args.dpi)?;
    if dpi.is_diagnosis(&ComponentSet::empty()) {
        return Err(CliError::Input(SessionError::FaultFreeDpi.to_string()));
    }
    let mut config = SessionConfig::new(dpi.clone(), args.ld, args.heuristic, args.engine);
    config.seed = args.seed;
    config.max_iterations = args.max_iterations;
    config.pool = CandidatePool {
        implications: !args.literals_only,
    };

    let mut oracle: Box<dyn Oracle> = if args.interactive {
        Box::new(TerminalOracle)
    } else {
        let target = match &args.target {
            Some(t) => dpi.parse_set(t).map_err(|e| CliError::Input(e.to_string()))?,
            None => {
                let all = dpi
                    .brute_force_min_diagnoses()
                    .map_err(|e| CliError::Input(e.to_string()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                all.choose(&mut rng)
                    .cloned()
                    .ok_or_else(|| CliError::Input("the instance has no diagnosis".into()))?
            }
        };
        if !dpi
            .brute_force_min_diagnoses()
            .map(|all| all.contains(&target))
            .unwrap_or(true)
        {
            return Err(CliError::Input(format!(
                "target {} is no minimal diagnosis",
                show(&dpi, &target)
            )));
        }
        println!("target: {}", show(&dpi, &target));
        Box::new(SimulatedOracle { target })
    };

    let session = run_session(config, oracle.as_mut()).map_err(|e| CliError::Input(e.to_string()))?;
    for r in session.history() {
        let leading: Vec<String> = r
            .leading_diagnoses
            .iter()
            .map(|d| format!("[{}]", d.join(",")))
            .collect();
        println!("iteration {}: {}", r.iteration, leading.join(" "));
        if let (Some(q), Some(o)) = (&r.query, r.outcome) {
            let answer = match o {
                Outcome::Positive => "positive",
                Outcome::Negative => "negative",
            };
            println!("  query {q}: {answer}");
        }
    }
    let calls = session.calls();
    let tree = session.tree_stats();
    println!(
        "calls: hard {}, medium {}, easy {}; nodes generated {}, processed {}",
        calls.hard_calls, calls.medium_calls, calls.easy_calls, tree.nodes_generated, tree.nodes_processed
    );
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&session.result()).expect("report serializes");
        fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    match session.status() {
        Status::Final(d) => {
            println!("final diagnosis: {}", show(session.dpi(), d));
            Ok(())
        }
        Status::Stopped => {
            println!("stopped");
            Ok(())
        }
        other => Err(CliError::Engine(format!("session ended with status {}", other.name()))),
    }
}

fn bench(suite: &Path, out: &Path) -> Result<(), CliError> {
    let suite = Suite::from_file(suite)?;
    let report = run_benchmark(&suite)?;
    write_report(&report, out)?;
    let agg = report.aggregate().overall;
    println!("paired runs: {}", agg.runs);
    println!("fewer hard calls: {:.1}%", 100.0 * agg.hard_call_win_fraction);
    println!("fewer processed nodes: {:.1}%", 100.0 * agg.node_win_fraction);
    println!("median hard-call savings: {:.1}%", 100.0 * agg.median_hard_call_savings);
    println!("median node savings: {:.1}%", 100.0 * agg.median_node_savings);
    println!("median time savings: {:.1}%", 100.0 * agg.median_time_savings);
    println!("report written to {}", out.display());
    Ok(())
}

fn serve(options: ServeOptions) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Engine(e.to_string()))?;
    runtime
        .block_on(seqdiag_service::serve(options))
        .map_err(|e| CliError::Input(format!("server: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle { dpi } => oracle(&dpi),
        Command::Bench { suite, out } => bench(&suite, &out),
        Command::Serve {
            port,
            static_dir,
            snapshot_dir,
            idle_timeout,
        } => serve(ServeOptions {
            port,
            static_dir,
            store: StoreConfig {
                idle_timeout: Duration::from_secs(idle_timeout),
                snapshot_dir,
            },
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
