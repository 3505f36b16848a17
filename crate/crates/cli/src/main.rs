use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kspace_cli::commands;
use kspace_cli::ModeSelection;

#[derive(Parser)]
#[command(name = "kspace", version, about = "Train and compare spatial vs. spatial+k-space MRI classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic class-directory tree of PNG images.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one or both arms once per configured seed.
    Train {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root directory with one subdirectory per class.
        #[arg(long)]
        data: PathBuf,
        /// Overrides the configured mode.
        #[arg(long, value_enum)]
        mode: Option<ModeSelection>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Confusion matrix and metrics of a saved checkpoint.
    Evaluate {
        /// A `<out>/<mode>/seed<k>` directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        epoch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// UMAP projection of a checkpoint's validation latents.
    Embed {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        epoch: usize,
        /// JSON UMAP settings; the run's configuration is used when omitted.
        #[arg(long)]
        umap_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge averaged results of both arms at the checkpoint epochs.
    Report {
        /// Output directory of `train`.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preview one image next to its k-space planes.
    Spectrum {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SynthData { out, n, size, noise, seed } => {
            commands::synth_data(out, *n, *size, *noise, *seed)
        }
        Command::Train { config, data, mode, out } => {
            commands::train(config.as_deref(), data, *mode, out)
        }
        Command::Evaluate { run, epoch, out } => commands::evaluate_cmd(run, *epoch, out),
        Command::Embed { run, epoch, umap_config, out } => {
            commands::embed(run, *epoch, umap_config.as_deref(), out)
        }
        Command::Report { runs, out } => commands::report(runs, out),
        Command::Spectrum { image, size, out } => commands::spectrum(image, *size, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
