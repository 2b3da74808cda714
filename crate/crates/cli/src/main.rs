//! Command-line entry point for the annotation trust pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "skywatch",
    version,
    about = "Trust scoring and disaster-level evaluation for crowdsourced satellite image annotation",
    arg_required_else_help = true
)]
struct Cli {
    /// Config file (defaults to ./skywatch.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bootstrap the stores from seed player records and a predefined tag list.
    Init {
        /// Seed annotations: a player-database JSON document.
        #[arg(long)]
        seeds: PathBuf,
        /// Comma-separated predefined tags, e.g. "fire,smoke,flood".
        #[arg(long)]
        predefined: String,
        /// Also write the summary JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut a region into base tiles plus the half-shifted seam layer.
    Tile {
        #[arg(long)]
        region: String,
        #[arg(long)]
        width: u32,
        #[arg(long)]
        height: u32,
        #[arg(long)]
        tile_width: u32,
        #[arg(long)]
        tile_height: u32,
        /// Seed for tile id generation.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a 2n-image task for a player (prints the player view).
    GenTask {
        #[arg(long)]
        player: String,
        /// Task half-size; defaults to task.n from the config.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate a player's task round and promote it when reliable.
    Rate {
        #[arg(long)]
        player: String,
        #[arg(long)]
        task: String,
        /// Acceptance threshold override.
        #[arg(long)]
        theta: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the disaster level of a region from reliable annotations.
    Disaster {
        #[arg(long)]
        region: String,
        /// Evaluation timestamp override ("YYYY-MM-DD HH:MM:SS"); defaults to now.
        #[arg(long)]
        timestamp: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the synthetic honest/malicious evaluation and write ROC outputs.
    Simulate {
        #[arg(long, default_value_t = 100)]
        honest: usize,
        #[arg(long, default_value_t = 100)]
        malicious: usize,
        /// Gaussian noise applied to honest ROI coordinates, in pixels.
        #[arg(long, default_value_t = 3.2)]
        sigma: f64,
        /// Task half-size; defaults to task.n from the config.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 10)]
        tagged_images: usize,
        #[arg(long, default_value_t = 10)]
        fresh_images: usize,
        #[arg(long, default_value_t = 3)]
        seed_players: usize,
        /// ROC sweep mode: "theta" or "margin".
        #[arg(long, default_value = "theta")]
        mode: String,
        #[arg(long)]
        seed: u64,
        /// Directory for roc.csv and summary.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn run(config: &RunConfig, cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Init {
            seeds,
            predefined,
            out,
        } => commands::cmd_init(config, seeds, predefined, commands::output_path(out)),
        Command::Tile {
            region,
            width,
            height,
            tile_width,
            tile_height,
            seed,
            out,
        } => commands::cmd_tile(
            region,
            *width,
            *height,
            *tile_width,
            *tile_height,
            *seed,
            commands::output_path(out),
        ),
        Command::GenTask {
            player,
            n,
            seed,
            out,
        } => commands::cmd_gen_task(config, player, *n, *seed, commands::output_path(out)),
        Command::Rate {
            player,
            task,
            theta,
            out,
        } => commands::cmd_rate(config, player, task, *theta, commands::output_path(out)),
        Command::Disaster {
            region,
            timestamp,
            out,
        } => commands::cmd_disaster(
            config,
            region,
            timestamp.as_deref(),
            commands::output_path(out),
        ),
        Command::Simulate {
            honest,
            malicious,
            sigma,
            n,
            tagged_images,
            fresh_images,
            seed_players,
            mode,
            seed,
            out_dir,
        } => commands::cmd_simulate(
            config,
            *honest,
            *malicious,
            *sigma,
            *n,
            *tagged_images,
            *fresh_images,
            *seed_players,
            mode,
            *seed,
            out_dir,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match RunConfig::load(cli.config.as_deref()) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err:#}");
            eprintln!("run 'skywatch --help' for usage");
            return ExitCode::from(2);
        }
    };
    match run(&config, &cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
