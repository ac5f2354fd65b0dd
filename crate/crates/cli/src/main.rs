//! `mrlab`: reproducible experiments for weighted trace, extension and heat maximal regularity.

mod commands;
mod config;
mod error;
mod plot;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mrlab_core::MrError;
use serde_json::json;

use commands::{Command, Ctx};
use config::ExperimentConfig;
use error::CliError;
use report::{config_hash, write_bundle, Report, SCHEMA};

#[derive(Parser)]
#[command(name = "mrlab", version, about = "Weighted trace, extension and heat maximal-regularity experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Family seed; overrides `family.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the report bundle.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a named threshold, `NAME=VALUE`; repeatable.
    #[arg(long = "tolerance", global = true, value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    /// Number of refinement levels.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Worker threads; falls back to `MRLAB_THREADS`.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check admissibility of the configured parameters.
    Validate,
    /// Telescoping and reconstruction of the LP decomposition.
    LpCheck,
    /// Norm axioms and Besov/Triebel-Lizorkin agreement on the diagonal.
    NormCheck,
    /// Two-sided bracket of the intersection representation under refinement.
    IntersectionCheck,
    /// Trace against restriction, and trace continuity brackets.
    TraceCheck,
    /// Biorthogonality of the extension operators.
    ExtCheck {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Pullback contract, distance comparability and non-tangentiality.
    PullbackCheck,
    /// Domain trace/extension round trip and chart independence.
    BoundaryNormCheck {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Heat solver convergence and boundary consistency.
    HeatSolve {
        /// `manufactured-1`, `manufactured-line` or `random`.
        #[arg(long)]
        case: Option<String>,
    },
    /// Maximal-regularity ratio over a random family and refinements.
    MrStudy,
}

fn parse_overrides(cmd: Command, items: &[String], mut tol: BTreeMap<String, f64>, source: &str) -> Result<BTreeMap<String, f64>, CliError> {
    let known = cmd.default_tolerances();
    let unknown = |name: &str| CliError::UnknownTolerance {
        name: format!("{name} ({source})"),
        command: cmd.name().into(),
        known: known.keys().cloned().collect::<Vec<_>>().join(", "),
    };
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::BadOverride(item.clone()))?;
        let v: f64 = v.trim().parse().map_err(|_| CliError::BadOverride(item.clone()))?;
        if !known.contains_key(k.trim()) {
            return Err(unknown(k.trim()));
        }
        tol.insert(k.trim().to_string(), v);
    }
    Ok(tol)
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let started = Instant::now();
    let (cmd, m, case) = match cli.cmd {
        Cmd::Validate => (Command::Validate, None, None),
        Cmd::LpCheck => (Command::LpCheck, None, None),
        Cmd::NormCheck => (Command::NormCheck, None, None),
        Cmd::IntersectionCheck => (Command::IntersectionCheck, None, None),
        Cmd::TraceCheck => (Command::TraceCheck, None, None),
        Cmd::ExtCheck { m } => (Command::ExtCheck, m, None),
        Cmd::PullbackCheck => (Command::PullbackCheck, None, None),
        Cmd::BoundaryNormCheck { m } => (Command::BoundaryNormCheck, m, None),
        Cmd::HeatSolve { case } => (Command::HeatSolve, None, case),
        Cmd::MrStudy => (Command::MrStudy, None, None),
    };
    let c = cli.common;
    let threads = match c.threads {
        Some(t) => Some(t),
        None => match std::env::var("MRLAB_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| CliError::Config(format!("MRLAB_THREADS must be a positive integer, got '{v}'")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let from_cfg: Vec<String> = cfg.tolerances.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let tol = parse_overrides(cmd, &from_cfg, cmd.default_tolerances(), "config")?;
    let tol = parse_overrides(cmd, &c.tolerances, tol, "--tolerance")?;
    let seed = c.seed.or(cfg.family.seed).unwrap_or(0);
    let ctx = Ctx { cfg: &cfg, seed, levels: c.levels, m, case: case.clone(), tol: tol.clone() };
    let outcome = commands::run(cmd, &ctx)?;

    let config = serde_json::to_value(&cfg)?;
    let hashed = json!({ "subcommand": cmd.name(), "config": config, "seed": seed, "levels": c.levels, "m": m, "case": case, "tolerances": tol });
    let report = Report {
        schema: SCHEMA,
        subcommand: cmd.name(),
        config_hash: config_hash(&hashed),
        seed,
        levels: c.levels,
        config: &config,
        tolerances: &tol,
        pass: outcome.passed(),
        checks: &outcome.checks,
        data: &outcome.data,
        tables: outcome.tables.iter().map(|t| format!("tables/{}.csv", t.name)).collect(),
        plots: outcome.plots.iter().map(|p| format!("plots/{}.svg", p.name)).collect(),
    };
    let meta = json!({
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_bundle(&c.out, &report, &outcome, &meta)?;
    for ch in &outcome.checks {
        eprintln!("{} {} = {:e} (threshold {:e})", if ch.pass { "PASS" } else { "FAIL" }, ch.name, ch.value, ch.threshold);
    }
    for n in &outcome.notes {
        eprintln!("violation {n}");
    }
    Ok(outcome.passed())
}

/// Machine-readable refusal on stderr.
fn refusal(e: &CliError) -> serde_json::Value {
    let kind = match e {
        CliError::Core(MrError::Inadmissible { .. }) => "inadmissible",
        CliError::Core(MrError::CriticalCompatibility) => "critical_compatibility",
        CliError::Core(_) => "core",
        CliError::Config(_) | CliError::UnknownTolerance { .. } | CliError::BadOverride(_) => "config",
        CliError::Io(..) => "io",
        CliError::Plot(_) | CliError::Json(_) | CliError::Csv(_) => "output",
    };
    json!({ "error": kind, "message": e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", refusal(&e));
            ExitCode::from(2)
        }
    }
}
