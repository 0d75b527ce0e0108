//! Experiment runner: single verified runs, formula-vs-measured sweeps, and
//! message-level trace dumps.
//!
//! Exit codes: 0 on success (including annotated padding warnings), 1 on
//! usage errors, 2 when a run's outputs disagree with the oracle, 3 when the
//! measured load misses the closed form without padding to explain it.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccdc::{
    analysis, formula_load, oracle_outputs, schemes, AggregationGroup, LoadReport, SchemeKind,
    SystemConfig, Workload, WorkloadFamily,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INCORRECT: u8 = 2;
const EXIT_LOAD_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ccdc",
    about = "Simulate pre-combined and coded shuffle schemes with exact load accounting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scheme, verify it, and print a load report.
    Run(RunArgs),
    /// Emit a formula-vs-measured CSV table over ranges of K and r.
    Sweep(SweepArgs),
    /// Execute one scheme and dump its message trace as CSV.
    Trace(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file mirroring the flag names; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of nodes.
    #[arg(short = 'K')]
    k: Option<u32>,
    /// Replication degree mu*K.
    #[arg(short = 'r')]
    r: Option<u32>,
    /// Files per job.
    #[arg(short = 'N')]
    n: Option<u32>,
    /// Output functions per job.
    #[arg(short = 'Q')]
    q: Option<u32>,
    /// Intermediate-value size in bits.
    #[arg(short = 'T')]
    t: Option<u32>,
    /// Job-batch multiplier (J = gamma * C(K, r+1)).
    #[arg(long)]
    gamma: Option<u32>,
    /// Workload seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Aggregation group: xor, add8, or add32.
    #[arg(long)]
    group: Option<String>,
    /// Workload family: prf or linear.
    #[arg(long)]
    workload: Option<String>,
    /// Shuffle scheme: uncoded, compression, cdc, or ccdc.
    #[arg(long)]
    scheme: Option<String>,
    /// Report format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
    /// Write the report (or trace) here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Additionally write the message trace CSV to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// K value or inclusive range, e.g. `4` or `3:6`.
    #[arg(short = 'K')]
    k: String,
    /// r value or inclusive range; defaults to `1:K-1` for each K.
    #[arg(short = 'r')]
    r: Option<String>,
    /// Files per job (must satisfy each scheme's divisibility per cell).
    #[arg(short = 'N')]
    n: u32,
    /// Output functions per job; defaults to K for each cell.
    #[arg(short = 'Q')]
    q: Option<u32>,
    /// Intermediate-value size in bits.
    #[arg(short = 'T', default_value_t = 960)]
    t: u32,
    /// Comma-separated scheme list.
    #[arg(long, default_value = "uncoded,compression,cdc,ccdc")]
    schemes: String,
    #[arg(long, default_value_t = 1)]
    gamma: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Aggregation group: xor, add8, or add32.
    #[arg(long, default_value = "add8")]
    group: String,
    /// Workload family: prf or linear.
    #[arg(long, default_value = "prf")]
    workload: String,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Trace(args) => cmd_trace(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Merge CLI flags over an optional JSON config file.
fn resolve_config(args: &RunArgs) -> Result<SystemConfig, String> {
    let base: Option<SystemConfig> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| format!("invalid config {}: {e}", path.display()))?,
            )
        }
        None => None,
    };
    let field = |flag: Option<u32>, from_file: Option<u32>, name: &str| {
        flag.or(from_file)
            .ok_or_else(|| format!("missing required parameter {name}"))
    };
    let group = match &args.group {
        Some(s) => s.parse::<AggregationGroup>().map_err(|e| e.to_string())?,
        None => base.as_ref().map_or(AggregationGroup::Add8, |c| c.group),
    };
    let workload = match &args.workload {
        Some(s) => s.parse::<WorkloadFamily>().map_err(|e| e.to_string())?,
        None => base.as_ref().map_or(WorkloadFamily::Prf, |c| c.workload),
    };
    let scheme = match &args.scheme {
        Some(s) => s.parse::<SchemeKind>().map_err(|e| e.to_string())?,
        None => base
            .as_ref()
            .map(|c| c.scheme)
            .ok_or("missing required parameter --scheme")?,
    };
    let cfg = SystemConfig {
        k: field(args.k, base.as_ref().map(|c| c.k), "-K")?,
        r: field(args.r, base.as_ref().map(|c| c.r), "-r")?,
        n: field(args.n, base.as_ref().map(|c| c.n), "-N")?,
        q: field(args.q, base.as_ref().map(|c| c.q), "-Q")?,
        t: field(args.t, base.as_ref().map(|c| c.t), "-T")?,
        gamma: args.gamma.or(base.as_ref().map(|c| c.gamma)).unwrap_or(1),
        seed: args.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0),
        group,
        workload,
        scheme,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn execute_report(cfg: &SystemConfig) -> Result<(LoadReport, schemes::Outcome), String> {
    let workload = Workload::from_config(cfg);
    let outcome = schemes::run_with(cfg, &workload).map_err(|e| e.to_string())?;
    let oracle = oracle_outputs(cfg, &workload).map_err(|e| e.to_string())?;
    let formula = formula_load(cfg.scheme, cfg.k, cfg.r, cfg.n).map_err(|e| e.to_string())?;
    let report = analysis::verify(cfg, &outcome, &oracle, formula).map_err(|e| e.to_string())?;
    Ok((report, outcome))
}

fn report_exit(report: &LoadReport) -> u8 {
    if !report.correctness {
        EXIT_INCORRECT
    } else if !report.load_match && !report.padding {
        EXIT_LOAD_MISMATCH
    } else {
        EXIT_OK
    }
}

fn cmd_run(args: &RunArgs) -> Result<u8, String> {
    let cfg = resolve_config(args)?;
    let (report, outcome) = execute_report(&cfg)?;
    let rendered = match args.format.as_str() {
        "text" => report.render_text(),
        "json" => format!("{}\n", report.to_json()),
        other => return Err(format!("unknown format `{other}` (expected text or json)")),
    };
    write_out(&args.output, &rendered)?;
    if let Some(path) = &args.trace {
        let mut csv = Vec::new();
        outcome.trace.write_csv(&mut csv).map_err(|e| e.to_string())?;
        fs::write(path, csv).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(report_exit(&report))
}

fn cmd_trace(args: &RunArgs) -> Result<u8, String> {
    let cfg = resolve_config(args)?;
    let (report, outcome) = execute_report(&cfg)?;
    let mut csv = Vec::new();
    outcome.trace.write_csv(&mut csv).map_err(|e| e.to_string())?;
    write_out(&args.output, &String::from_utf8(csv).expect("trace CSV is UTF-8"))?;
    Ok(report_exit(&report))
}

/// Parse `a` or `a:b` into an inclusive range.
fn parse_range(text: &str, name: &str) -> Result<(u32, u32), String> {
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| format!("invalid {name} range `{text}`"))
    };
    match text.split_once(':') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(format!("empty {name} range `{text}`"));
            }
            Ok((lo, hi))
        }
        None => {
            let v = parse(text)?;
            Ok((v, v))
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, String> {
    let (k_lo, k_hi) = parse_range(&args.k, "-K")?;
    let schemes_list: Vec<SchemeKind> = args
        .schemes
        .split(',')
        .map(|s| s.trim().parse::<SchemeKind>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let group = args.group.parse::<AggregationGroup>().map_err(|e| e.to_string())?;
    let workload = args.workload.parse::<WorkloadFamily>().map_err(|e| e.to_string())?;

    let mut csv = String::new();
    writeln!(csv, "{}", LoadReport::CSV_HEADER).unwrap();
    let mut exit = EXIT_OK;
    for k in k_lo..=k_hi {
        let (r_lo, r_hi) = match &args.r {
            Some(text) => parse_range(text, "-r")?,
            None => (1, k.saturating_sub(1).max(1)),
        };
        for r in r_lo..=r_hi.min(k.saturating_sub(1)) {
            for &scheme in &schemes_list {
                let cfg = SystemConfig {
                    k,
                    r,
                    n: args.n,
                    q: args.q.unwrap_or(k),
                    t: args.t,
                    gamma: args.gamma,
                    seed: args.seed,
                    group,
                    workload,
                    scheme,
                };
                if let Err(e) = cfg.validate() {
                    eprintln!("skip scheme={scheme} K={k} r={r}: {e}");
                    continue;
                }
                let (report, _) = execute_report(&cfg)?;
                writeln!(csv, "{}", report.csv_row()).unwrap();
                exit = exit.max(report_exit(&report));
            }
        }
    }
    write_out(&args.output, &csv)?;
    Ok(exit)
}
