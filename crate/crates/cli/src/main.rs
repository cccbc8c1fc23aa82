//! `seqids` command line: synthesize or ingest traffic, train, evaluate,
//! attack, score robustness, explain and harden, one subcommand per stage.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "seqids", version, about = "Recurrent per-packet flow IDS workbench")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; flags override it.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory all artifacts are written to.
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    /// Dataset cache to read.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Model file to read.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress (-v) or details (-vv) to stderr.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble a packet CSV into a dataset cache.
    Ingest {
        /// Packet CSV with one row per packet.
        input: PathBuf,
    },
    /// Generate the synthetic dataset.
    Synth,
    /// Train a classifier on the training split.
    Train {
        /// Train with per-flow feature dropout and missing indicators.
        #[arg(long)]
        feature_dropout: bool,
        #[arg(long)]
        epochs: Option<u32>,
    },
    /// Packet and flow metrics on the test split.
    Eval,
    /// Attack every attack flow of the test split.
    Attack {
        #[arg(long, value_enum)]
        method: AttackChoice,
        /// CW tradeoff.
        #[arg(long)]
        kappa: Option<f64>,
        /// L-infinity budget for pgd and fgsm.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Adversarial Robustness Score on held-out attack flows.
    Ars {
        /// Number of attack flows; 0 for all.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Feature importance, sensitivity and dependence reports.
    Explain {
        #[arg(long, value_enum)]
        method: ExplainChoice,
        #[arg(long)]
        feature: Option<String>,
        /// `all`, `benign`, `attack` or an attack type.
        #[arg(long)]
        class: Option<String>,
        /// 0-based step for seqpdp.
        #[arg(long)]
        step: Option<usize>,
    },
    /// Retrain with a defense and measure it.
    Defend {
        #[arg(long, value_enum)]
        mode: DefenseChoice,
    },
    /// Write gnuplot scripts for the CSV artifacts in the output directory.
    ExportPlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackChoice {
    Cw,
    Pgd,
    Fgsm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExplainChoice {
    Weights,
    Perturb,
    Dropout,
    Shared,
    Mi,
    Pdp,
    Seqpdp,
    Confidence,
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DefenseChoice {
    ReduceBoth,
    ReduceForward,
    Advtrain,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Synth => "synth",
            Command::Train { .. } => "train",
            Command::Eval => "eval",
            Command::Attack { method, .. } => match method {
                AttackChoice::Cw => "attack_cw",
                AttackChoice::Pgd => "attack_pgd",
                AttackChoice::Fgsm => "attack_fgsm",
            },
            Command::Ars { .. } => "ars",
            Command::Explain { method, .. } => match method {
                ExplainChoice::Weights => "explain_weights",
                ExplainChoice::Perturb => "explain_perturb",
                ExplainChoice::Dropout => "explain_dropout",
                ExplainChoice::Shared => "explain_shared",
                ExplainChoice::Mi => "explain_mi",
                ExplainChoice::Pdp => "explain_pdp",
                ExplainChoice::Seqpdp => "explain_seqpdp",
                ExplainChoice::Confidence => "explain_confidence",
                ExplainChoice::Profile => "explain_profile",
            },
            Command::Defend { mode } => match mode {
                DefenseChoice::ReduceBoth => "defend_reduce_both",
                DefenseChoice::ReduceForward => "defend_reduce_forward",
                DefenseChoice::Advtrain => "defend_advtrain",
            },
            Command::ExportPlot => "export_plot",
        }
    }
}

/// Config file, then flags.
fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(d) = &g.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(d) = &g.dataset {
        cfg.paths.dataset = Some(d.clone());
    }
    if let Some(m) = &g.model {
        cfg.paths.model = Some(m.clone());
    }
    match &cli.command {
        Command::Train { epochs: Some(e), .. } => cfg.train.epochs = *e,
        Command::Attack { kappa, epsilon, .. } => {
            if let Some(k) = kappa {
                cfg.attack.cw.kappa = *k;
            }
            if let Some(e) = epsilon {
                cfg.attack.pgd.epsilon = *e;
                cfg.attack.fgsm_epsilon = *e;
            }
        }
        Command::Ars { samples: Some(n) } => cfg.ars.samples = *n,
        Command::Explain {
            feature,
            class,
            step,
            ..
        } => {
            if let Some(f) = feature {
                cfg.explain.feature = Some(f.clone());
            }
            if let Some(c) = class {
                cfg.explain.class = c.clone();
            }
            if let Some(s) = step {
                cfg.explain.step = *s;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(config::config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = effective_config(&cli)?;
    let name = cli.command.name();
    let artifacts = commands::execute(&cli.command, &cfg)?;
    let written = artifacts.commit(&cfg.paths.output_dir, name, &cfg)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

/// 1 for usage and configuration problems, 2 for bad or missing data,
/// 3 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<seqids::Error>() {
            use seqids::Error as E;
            return match e {
                E::InvalidArgument(_) | E::UnsupportedModel(_) => 1,
                E::NonFinite(_) => 3,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
