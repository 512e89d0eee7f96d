mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use imlkit::experiments::Figure;
use imlkit::RngSeed;

use commands::{CliError, Command};
use config::{Config, ConfigError};
use output::{OutputDir, Report, Status};

const SEED_ENV: &str = "IML_TOOLKIT_SEED";

#[derive(Parser, Debug)]
#[command(name = "imlkit", version, about = "Model-agnostic interpretation experiments with pitfall audits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment configuration (flat `key = value` file).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file and the IML_TOOLKIT_SEED variable.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (default: `output.dir` from the config, else `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// PDP, ICE, ALE, M-plot, derivative ICE or a two-feature PDP.
    Effect,
    /// Permutation, conditional, grouped, SHAP or SAGE importance.
    Importance,
    /// Friedman H-statistics.
    Interaction,
    /// Pairwise dependence tests and perturbation extrapolation.
    Dependence,
    /// PIMP importance tests with multiple-comparison correction.
    Test,
    /// Pitfall audit of a configured method without running it.
    Audit,
    /// Re-run a registered study and check its expected pattern.
    Reproduce {
        /// One of: fig2, fig3, fig4_cond, fig5, fig6, fig8, assoc, sampling, scm8.
        figure: String,
    },
}

fn resolve_seed(flag: Option<u64>, cfg: &Config) -> Result<(u64, &'static str), ConfigError> {
    if let Some(s) = flag {
        // still mark the config key as read
        let _ = cfg.get::<u64>("seed")?;
        return Ok((s, "flag"));
    }
    if let Some(s) = cfg.get::<u64>("seed")? {
        return Ok((s, "config"));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, "env"))
            .map_err(|_| ConfigError::general(format!("{SEED_ENV}='{v}' is not a non-negative integer"))),
        Err(_) => Ok((0, "default")),
    }
}

fn execute(cli: Cli) -> Result<Status, CliError> {
    let started = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError::general("--threads must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(format!("cannot start thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let (seed, seed_source) = resolve_seed(cli.seed, &cfg)?;
    let out_path = match (&cli.out, cfg.raw("output.dir")) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("out"),
    };

    let (name, command, figure) = match &cli.command {
        Cmd::Reproduce { figure } => {
            let f = Figure::parse(figure).ok_or_else(|| {
                let names: Vec<&str> = Figure::ALL.iter().map(|f| f.name()).collect();
                ConfigError::general(format!("unknown figure '{figure}' (expected one of: {})", names.join(", ")))
            })?;
            cfg.check_all_used("reproduce")?;
            ("reproduce", None, Some(f))
        }
        Cmd::Effect => ("effect", Some(Command::Effect), None),
        Cmd::Importance => ("importance", Some(Command::Importance), None),
        Cmd::Interaction => ("interaction", Some(Command::Interaction), None),
        Cmd::Dependence => ("dependence", Some(Command::Dependence), None),
        Cmd::Test => ("test", Some(Command::Test), None),
        Cmd::Audit => ("audit", Some(Command::Audit), None),
    };
    debug_assert!(command.is_none_or(|c| c.name() == name));
    if command.is_some() && cli.config.is_none() {
        return Err(ConfigError::general(format!("'{name}' needs --config")).into());
    }

    let mut report = Report::new(name, seed, seed_source);
    report.config_path = cfg.source().map(|p| p.display().to_string());
    report.config = cfg.echo();
    report.threads = cli.threads;
    let mut out = OutputDir::open(&out_path)
        .map_err(|e| CliError::Run(format!("cannot create output directory {}: {e}", out_path.display())))?;
    let result = match (command, figure) {
        (Some(c), _) => commands::run(c, &cfg, RngSeed(seed), &mut out, &mut report),
        (None, Some(f)) => {
            report.command = format!("reproduce {}", f.name());
            commands::reproduce(f, RngSeed(seed), &mut out, &mut report)
        }
        (None, None) => unreachable!("every subcommand maps to a command or figure"),
    };
    if let Err(e) = result {
        out.roll_back();
        return Err(e);
    }
    let status = commands::finish(&mut report);
    report.outputs = out.files();
    report.outputs.push("report.json".into());
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = out.write("report.json", json.as_bytes()) {
        out.roll_back();
        return Err(e.into());
    }
    log::info!("{} finished with status {:?} in {:.1}s", report.command, status, report.wall_clock_seconds);
    if status == Status::Fail {
        eprintln!("{}: failing checks: {}", report.command, report.failing_metrics.join(", "));
    }
    Ok(status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
