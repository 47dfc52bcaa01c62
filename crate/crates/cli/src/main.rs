use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use quasistat_cli::commands;
use quasistat_cli::config::{ExperimentConfig, Overrides, SEED_ENV};

#[derive(Parser)]
#[command(name = "quasistat", version, about = "Quasi-stationary competing particle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Flat TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then QUASISTAT_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    tau: Option<usize>,
    #[arg(long, global = true)]
    topk: Option<usize>,
    #[arg(long = "trunc-n", global = true)]
    trunc_n: Option<usize>,
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample partitions or point configurations.
    Sample,
    /// Evolve sampled ensembles.
    Evolve,
    /// Compare an ensemble before and after evolution.
    TestInvariance,
    /// Check the front bounds for tail-normalized starts.
    VerifyLemma,
    /// Monte Carlo vs closed-form gap generating functional.
    GenFunctional,
    /// Cross-check the PD(α, 0) samplers.
    CompareOracles,
}

const EXIT_PASS: u8 = 0;
const EXIT_REJECTED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn resolve(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        replicas: cli.replicas,
        alpha: cli.alpha,
        rho: cli.rho,
        beta: cli.beta,
        tau: cli.tau,
        topk: cli.topk,
        trunc_n: cli.trunc_n,
        level: cli.level,
    };
    cfg.apply(&overrides, std::env::var(SEED_ENV).ok().as_deref())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if cli.show_config {
        print!("{}", cfg.to_toml());
        return ExitCode::from(EXIT_PASS);
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given (try --help)");
        return ExitCode::from(EXIT_USAGE);
    };
    let started = Instant::now();
    let result = match command {
        Command::Sample => commands::cmd_sample(&cfg),
        Command::Evolve => commands::cmd_evolve(&cfg),
        Command::TestInvariance => commands::cmd_test_invariance(&cfg),
        Command::VerifyLemma => commands::cmd_verify_lemma(&cfg),
        Command::GenFunctional => commands::cmd_gen_functional(&cfg),
        Command::CompareOracles => commands::cmd_compare_oracles(&cfg),
    };
    match result {
        Ok(record) => {
            eprintln!("{}: {:.2}s", record.id, started.elapsed().as_secs_f64());
            print!("{}", record.to_json());
            if record.all_pass() {
                ExitCode::from(EXIT_PASS)
            } else {
                let failed: Vec<&str> =
                    record.pass.iter().filter(|(_, &ok)| !ok).map(|(k, _)| k.as_str()).collect();
                eprintln!("failed: {}", failed.join(", "));
                ExitCode::from(EXIT_REJECTED)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
