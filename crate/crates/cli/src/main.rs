//! `modeforge`: run pipeline stages from one TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modeforge_core::config::PipelineConfig;
use modeforge_core::par;
use modeforge_core::pipeline::{self, Stage};

#[derive(Parser, Debug)]
#[command(name = "modeforge", version, about = "Travel-mode imputation pipeline for location data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Drop inaccurate fixes and implausible jumps.
    Filter,
    /// Cut filtered points into trips.
    Segment,
    /// Compute trip features and attach ground-truth labels.
    Features,
    /// Fit the configured model on labelled trips.
    Train,
    /// Cross-validate the configured models.
    Evaluate,
    /// Label every trip with the saved model.
    Impute,
    /// Mode shares and trip time/length distributions.
    Report,
    /// Generate synthetic points, ground truth and networks.
    Synth,
    /// Filter through report in one go.
    Run,
}

impl Command {
    fn stages(self) -> Vec<Stage> {
        match self {
            Command::Filter => vec![Stage::Filter],
            Command::Segment => vec![Stage::Segment],
            Command::Features => vec![Stage::Features],
            Command::Train => vec![Stage::Train],
            Command::Evaluate => vec![Stage::Evaluate],
            Command::Impute => vec![Stage::Impute],
            Command::Report => vec![Stage::Report],
            Command::Synth => vec![Stage::Synth],
            Command::Run => Stage::RUN.to_vec(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MODEFORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let Some(config_path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let cfg = match PipelineConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    let result = par::with_threads(cli.threads, || {
        for stage in cli.command.stages() {
            let written = pipeline::run_stage(stage, &cfg)?;
            for path in written {
                log::info!("wrote {}", path.display());
            }
        }
        Ok::<_, pipeline::PipelineError>(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
