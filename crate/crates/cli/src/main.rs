mod layout;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use einv::config::ExperimentConfig;
use einv::ident::Framework;

use layout::Layout;
use stages::Ctx;

/// Emotion-invariant speaker identification experiments.
#[derive(Parser)]
#[command(name = "einv", version)]
struct Cli {
    /// Experiment directory holding every artifact.
    #[arg(long, global = true, default_value = "einv_out")]
    out: PathBuf,

    /// Configuration file; defaults to <out>/experiment.cfg when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Extra `key=value` configuration overrides.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus (features, or audio with --audio).
    SynthGen {
        #[arg(long)]
        audio: bool,
    },
    /// Extract features for every manifest entry.
    Featurize {
        /// Manifest to read; audio paths are relative to its directory.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Fit the universal background model on background utterances.
    TrainUbm,
    /// Baum-Welch statistics for background, train, test and segments.
    AccumulateStats,
    /// Train the total variability matrix.
    TrainTv,
    /// Extract i-vectors for every set.
    ExtractIvectors,
    /// Fit LDA and WCCN and write compensated embeddings.
    TrainBackend,
    /// Train the emotion-invariant extractor.
    TrainEinv,
    /// Build speaker models for the given frameworks.
    Enroll {
        #[arg(long = "framework", value_name = "NAME", num_args = 1.., default_values = ["baseline", "avg-ivec", "einv-test", "einv-pair"])]
        frameworks: Vec<Framework>,
    },
    /// Identify test utterances and write report.txt and report.csv.
    Evaluate {
        #[arg(long = "framework", value_name = "NAME", num_args = 1.., default_values = ["baseline", "avg-ivec", "einv-test", "einv-pair"])]
        frameworks: Vec<Framework>,
    },
    /// Accuracy for every (train emotion, test emotion) pair.
    GridEval,
    /// Every stage on a fresh synthetic corpus.
    Run,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let stored = Layout::new(&cli.out).config();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None if stored.exists() => ExperimentConfig::load(&stored).with_context(|| format!("loading {}", stored.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| einv::Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let ctx = Ctx {
        layout: Layout::new(&cli.out),
        cfg,
    };
    let lines = match &cli.command {
        Command::SynthGen { audio } => vec![stages::synth_gen(&ctx, *audio)?],
        Command::Featurize { manifest } => vec![stages::featurize(&ctx, manifest.as_deref())?],
        Command::TrainUbm => vec![stages::train_ubm(&ctx)?],
        Command::AccumulateStats => vec![stages::accumulate_stats(&ctx)?],
        Command::TrainTv => vec![stages::train_tv(&ctx)?],
        Command::ExtractIvectors => vec![stages::extract_ivectors(&ctx)?],
        Command::TrainBackend => vec![stages::train_backend(&ctx)?],
        Command::TrainEinv => vec![stages::train_einv_stage(&ctx)?],
        Command::Enroll { frameworks } => vec![stages::enroll(&ctx, frameworks)?],
        Command::Evaluate { frameworks } => vec![stages::evaluate_stage(&ctx, frameworks)?],
        Command::GridEval => vec![stages::grid_eval(&ctx)?],
        Command::Run => stages::run_all(&ctx)?,
    };
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

/// Exit status by error category; 2 is left to clap for usage errors.
fn exit_code(err: &anyhow::Error) -> u8 {
    use einv::Error as E;
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<E>()) else {
        return 1;
    };
    match e {
        E::Config(_) => 3,
        E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 4,
        E::Io { .. } => 1,
        E::Format { .. } | E::Wav { .. } => 5,
        E::Version { .. } => 6,
        E::InvalidInput(_) | E::TooShort { .. } | E::DimensionMismatch { .. } | E::InsufficientData(_) => 7,
        E::Numerical(_) | E::ZeroNorm => 8,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
