use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lplab_cli::{config_hash, parse_config, run_stage, run_zoo, stages, RunManifest};

#[derive(Parser)]
#[command(name = "lplab", about = "Latent-planning lab experiment pipeline")]
struct Cli {
    /// Path to the experiment configuration file.
    #[arg(long, global = true, default_value = "experiment.cfg")]
    config: PathBuf,
    /// Overwrite a workdir produced by a different configuration.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the trajectory dataset.
    GenData,
    /// Train one generative model.
    TrainGen {
        #[arg(long)]
        model: String,
    },
    /// Evaluate one trained generative model.
    EvalGen {
        #[arg(long)]
        model: String,
    },
    /// Train one policy on a trained model's latent space.
    TrainPolicy {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the correlation tables from reports and policy labels.
    Analyze,
    /// Run the full pipeline over every configured model.
    Zoo {
        /// Number of worker threads for per-model stages.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> lplab_cli::Result<bool> {
    let text = std::fs::read_to_string(&cli.config)?;
    let config = parse_config(&text)?;
    let workdir = config.resolved_workdir();
    std::fs::create_dir_all(&workdir)?;
    let hash = config_hash(&text);
    let mut manifest = RunManifest::open(&workdir, &hash, cli.force)?;

    let entries = match &cli.command {
        Command::GenData => {
            let (entry, _) = run_stage(|| stages::cmd_gen_data(&config, &workdir));
            vec![("gen-data".to_string(), entry)]
        }
        Command::TrainGen { model } => {
            let (entry, _) = run_stage(|| stages::cmd_train_gen(&config, &workdir, model));
            vec![(format!("train-gen:{model}"), entry)]
        }
        Command::EvalGen { model } => {
            let (entry, _) = run_stage(|| stages::cmd_eval_gen(&config, &workdir, model));
            vec![(format!("eval-gen:{model}"), entry)]
        }
        Command::TrainPolicy { model, seed } => {
            let (entry, _) =
                run_stage(|| stages::cmd_train_policy(&config, &workdir, model, *seed));
            vec![(format!("train-policy:{model}:{seed}"), entry)]
        }
        Command::Analyze => {
            let (entry, _) = run_stage(|| stages::cmd_analyze(&config, &workdir));
            vec![("analyze".to_string(), entry)]
        }
        Command::Zoo { jobs } => run_zoo(&config, &workdir, *jobs),
    };

    let mut all_ok = true;
    for (key, entry) in entries {
        println!("{key}: {} ({:.1}s)", entry.status, entry.wall_time_secs);
        all_ok &= entry.is_success();
        let (status, wall) = (entry.status.clone(), entry.wall_time_secs);
        manifest.record(
            &key,
            status,
            wall,
            entry.artifacts.iter().map(PathBuf::from).collect(),
        );
    }
    manifest.save(&workdir)?;
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
