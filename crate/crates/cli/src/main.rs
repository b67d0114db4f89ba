//! Command-line entry point: run benchmark scenarios and sweeps, verify
//! chain dumps, and solve standalone admission instances.
//!
//! Exit codes are a stable contract:
//! 0 success, 1 configuration error, 2 runtime error, 3 verification failure.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slicechain::admission::{
    brute_force_oracle, import_instance, solve_exact, solve_greedy, AdmissionDecision,
};
use slicechain::ledger::{read_chain_dump, verify_dumped_chain, ChainVerifyError, DumpError};
use slicechain::metrics::{export_report, ExportFormat};
use slicechain::sim::derive_seed;
use slicechain::workload::{run_scenario, RunOutput, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "slicechain",
    version,
    about = "Deterministic simulator for a permissioned slice-brokerage ledger"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark scenario, optionally sweeping one config axis over
    /// several seeds.
    Run(RunArgs),
    /// Verify a chain dump: hash-chain integrity plus conservation of the
    /// replayed final state.
    Verify {
        /// Path to a newline-delimited chain dump.
        dump: PathBuf,
    },
    /// Solve an admission instance from its text form.
    Solve {
        /// Instance file: `types requests`, capacity row, demand rows, price
        /// rows.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Greedy,
    Brute,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config file (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, repeatable: --set consensus.batch_size=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sweep one axis: --sweep consensus.service=solo,raft,kafka
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,
    /// Repetitions per sweep point, each with a derived child seed.
    #[arg(long, default_value_t = 1)]
    seeds: u32,
    /// Output directory for reports and chain dumps.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Shorthand for --set consensus.service=...
    #[arg(long, value_name = "solo|raft|kafka")]
    consensus: Option<String>,
    /// Export the ordering-layer event trace per channel.
    #[arg(long)]
    trace: bool,
}

enum CliError {
    Config(String),
    Runtime(String),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Verify(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify { dump } => cmd_verify(&dump),
        Command::Solve { instance, method } => cmd_solve(&instance, method),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

/// `consensus` is accepted as shorthand for the service field, so
/// `--set consensus=raft` and `--sweep consensus=solo,raft,kafka` work.
fn normalize_key(key: &str) -> String {
    if key == "consensus" {
        "consensus.service".into()
    } else {
        key.to_string()
    }
}

fn parse_set(raw: &str) -> Result<(String, String), CliError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((normalize_key(k.trim()), v.trim().to_string())),
        _ => Err(CliError::Config(format!(
            "--set expects KEY=VALUE, got {raw:?}"
        ))),
    }
}

fn base_overrides(args: &RunArgs) -> Result<Vec<(String, String)>, CliError> {
    let mut overrides = Vec::new();
    for raw in &args.set {
        overrides.push(parse_set(raw)?);
    }
    if let Some(consensus) = &args.consensus {
        overrides.push(("consensus.service".into(), consensus.clone()));
    }
    if args.trace {
        overrides.push(("trace".into(), "true".into()));
    }
    Ok(overrides)
}

struct SweepPoint {
    /// Human-readable label, also the subdirectory name stem.
    label: String,
    overrides: Vec<(String, String)>,
}

fn sweep_points(args: &RunArgs, base: &[(String, String)]) -> Result<Vec<SweepPoint>, CliError> {
    match &args.sweep {
        None => Ok(vec![SweepPoint {
            label: "base".into(),
            overrides: base.to_vec(),
        }]),
        Some(spec) => {
            let (key, values) = spec.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--sweep expects KEY=V1,V2,..., got {spec:?}"))
            })?;
            let key = normalize_key(key.trim());
            let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(CliError::Config("--sweep has no values".into()));
            }
            Ok(values
                .iter()
                .map(|v| {
                    let mut overrides = base.to_vec();
                    overrides.push((key.clone(), v.to_string()));
                    SweepPoint {
                        label: sanitize(&format!("{key}={v}")),
                        overrides,
                    }
                })
                .collect())
        }
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '=' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_run_artifacts(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    export_report(&out.report, dir, &[ExportFormat::Json, ExportFormat::Csv])
        .map_err(|e| CliError::Runtime(format!("writing reports under {}: {e}", dir.display())))?;
    for (ch, chain) in out.chains.iter().enumerate() {
        let path = dir.join(format!("chain-{ch}.jsonl"));
        let mut f = File::create(&path)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
        slicechain::ledger::write_chain_dump(&mut f, chain.blocks())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    for (ch, trace) in out.traces.iter().enumerate() {
        if trace.is_empty() {
            continue;
        }
        let path = dir.join(format!("trace-{ch}.log"));
        let mut f = File::create(&path)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
        for ev in trace {
            writeln!(f, "{ev}")
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let base = base_overrides(&args)?;
    let points = sweep_points(&args, &base)?;
    let multi = points.len() > 1 || args.seeds > 1;

    // Configuration problems abort before any output is written.
    let mut configs: Vec<(String, ScenarioConfig)> = Vec::new();
    for point in &points {
        let cfg = ScenarioConfig::load(args.config.as_deref(), &point.overrides)
            .map_err(|e| CliError::Config(e.to_string()))?;
        configs.push((point.label.clone(), cfg));
    }

    let mut summary_rows = Vec::new();
    let mut failures = 0usize;
    for (point_index, (label, base_cfg)) in configs.iter().enumerate() {
        for rep in 0..args.seeds {
            let mut cfg = base_cfg.clone();
            if multi {
                // Reproducible but decorrelated stream per (point, rep).
                cfg.seed = derive_seed(base_cfg.seed, &format!("sweep/{label}/rep-{rep}"));
            }
            let dir = if multi {
                args.out
                    .join(format!("point-{point_index}-{label}"))
                    .join(format!("seed-{rep}"))
            } else {
                args.out.clone()
            };
            match run_scenario(&cfg) {
                Ok(out) => {
                    std::fs::create_dir_all(&dir).map_err(|e| {
                        CliError::Runtime(format!("creating {}: {e}", dir.display()))
                    })?;
                    write_run_artifacts(&out, &dir)?;
                    let r = &out.report;
                    println!(
                        "{label} rep {rep}: submitted {} committed {} rw_conflict {} \
                         sr_collision {} -> {}",
                        r.submitted,
                        r.committed,
                        r.rw_conflict,
                        r.sr_collision,
                        dir.display()
                    );
                    summary_rows.push(serde_json::json!({
                        "point": label,
                        "rep": rep,
                        "seed": cfg.seed,
                        "dir": dir.display().to_string(),
                        "submitted": r.submitted,
                        "committed": r.committed,
                        "rw_conflict": r.rw_conflict,
                        "sr_collision": r.sr_collision,
                        "committed_throughput_per_s": r.committed_throughput_per_s,
                        "p50_latency_ms": r.latency.as_ref().map(|l| l.p50_ms),
                        "growth_slope_bytes_per_s": r.growth_slope_bytes_per_s,
                        "status": "ok",
                    }));
                }
                Err(e) => {
                    // One failing point must not sink the rest of the sweep.
                    eprintln!("{label} rep {rep} failed: {e}");
                    failures += 1;
                    summary_rows.push(serde_json::json!({
                        "point": label,
                        "rep": rep,
                        "seed": cfg.seed,
                        "status": "failed",
                        "error": e.to_string(),
                    }));
                }
            }
        }
    }

    if multi {
        std::fs::create_dir_all(&args.out)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", args.out.display())))?;
        let path = args.out.join("sweep_summary.json");
        let mut f = File::create(&path)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))?;
        let json = serde_json::to_string_pretty(&summary_rows).expect("rows serialize");
        f.write_all(json.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        println!("sweep summary: {}", path.display());
    }

    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} run(s) failed")));
    }
    Ok(())
}

fn cmd_verify(dump: &Path) -> Result<(), CliError> {
    let file = File::open(dump)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", dump.display())))?;
    let chain = match read_chain_dump(BufReader::new(file)) {
        Ok(chain) => chain,
        Err(DumpError::Empty) => {
            return Err(CliError::Runtime(format!("{} is empty", dump.display())));
        }
        Err(DumpError::Parse { line, source }) => {
            return Err(CliError::Verify(format!(
                "unparseable record at line {line} (block height {}): {source}",
                line.saturating_sub(1)
            )));
        }
        Err(DumpError::Io(e)) => {
            return Err(CliError::Runtime(format!(
                "reading {}: {e}",
                dump.display()
            )));
        }
    };
    match verify_dumped_chain(&chain) {
        Ok(summary) => {
            println!(
                "ok: {} blocks, {} committed, {} rw-conflict, {} sr-collision, {} bad-signature; \
                 conservation holds over capacities {:?}",
                summary.blocks,
                summary.committed,
                summary.rw_conflict,
                summary.sr_collision,
                summary.bad_signature,
                summary.capacities
            );
            Ok(())
        }
        Err(ChainVerifyError::Integrity { height, defect }) => Err(CliError::Verify(format!(
            "chain invalid at height {height}: {defect:?}"
        ))),
        Err(ChainVerifyError::Conservation(msg)) => {
            Err(CliError::Verify(format!("conservation violated: {msg}")))
        }
    }
}

fn format_decision(decision: &AdmissionDecision) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "objective {}", decision.objective);
    let accepted: Vec<String> = decision.accepted.iter().map(|a| a.to_string()).collect();
    let _ = writeln!(out, "accepted {}", accepted.join(" "));
    out
}

fn cmd_solve(instance: &Path, method: Method) -> Result<(), CliError> {
    let text = std::fs::read_to_string(instance)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", instance.display())))?;
    let inst = import_instance(&text).map_err(|e| CliError::Config(e.to_string()))?;
    match method {
        Method::Exact => print!("{}", format_decision(&solve_exact(&inst))),
        Method::Greedy => print!("{}", format_decision(&solve_greedy(&inst))),
        Method::Brute => {
            let objective =
                brute_force_oracle(&inst).map_err(|e| CliError::Config(e.to_string()))?;
            println!("objective {objective}");
        }
    }
    Ok(())
}
