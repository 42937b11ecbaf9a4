use std::path::PathBuf;
use std::process::ExitCode;

use capglove_pipeline::commands::{evaluate, export_csv, simulate, train_model};
use capglove_pipeline::stream::stream;
use capglove_pipeline::{PipelineConfig, PipelineError, Result, Task};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "capglove", version, about = "Capacitive glove digital twin: simulate, train, evaluate, stream")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Simulate(Common),
    /// Fit preprocessing and train the task model
    Train(Common),
    /// Score the test partition and write a report
    Eval(Common),
    /// Replay the dataset in real time through the model
    Stream {
        #[command(flatten)]
        common: Common,
        /// Replay without wall-clock pacing
        #[arg(long)]
        offline: bool,
    },
    /// Write the dataset as CSV
    ExportCsv(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// gesture or recon
    #[arg(long)]
    task: Option<String>,
    /// Output directory (simulate, train, eval) or CSV file (export-csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, out_is_dir: bool) -> Result<PipelineConfig> {
        let task: Option<Task> = self.task.as_deref().map(str::parse).transpose()?;
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => {
                let task = task.ok_or_else(|| PipelineError::Config("either --config or --task is required".into()))?;
                let dir = match (&self.out, out_is_dir) {
                    (Some(d), true) => d.clone(),
                    _ => PathBuf::from("out"),
                };
                PipelineConfig::desk(task, &dir, 0)
            }
        };
        if let Some(t) = task {
            if t != cfg.task {
                return Err(PipelineError::Config(format!("--task {t:?} conflicts with config task {:?}", cfg.task)));
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let (Some(dir), true, Some(_)) = (&self.out, out_is_dir, &self.config) {
            let paths = capglove_pipeline::config::Paths::under(dir, cfg.task);
            cfg.paths = capglove_pipeline::config::Paths { gesture_library: cfg.paths.gesture_library, channel_map: cfg.paths.channel_map, ..paths };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.resolve(true)?;
            let summary = simulate(&cfg)?;
            println!("wrote {}", cfg.paths.dataset.display());
            print!("{}", summary.to_text());
        }
        Command::Train(c) => {
            let cfg = c.resolve(true)?;
            let run = train_model(&cfg)?;
            let o = &run.outcome;
            println!(
                "trained {} epochs, best epoch {} (validation loss {:.6}){}",
                o.history.len(),
                o.best_epoch,
                o.best_val_loss,
                if o.stopped_early { ", stopped early" } else { "" }
            );
            println!("wrote {} and {}", cfg.paths.weights.display(), cfg.paths.history.display());
        }
        Command::Eval(c) => {
            let cfg = c.resolve(true)?;
            print!("{}", evaluate(&cfg)?);
            println!("wrote {}", cfg.paths.report.display());
        }
        Command::Stream { common, offline } => {
            let mut cfg = common.resolve(true)?;
            if offline {
                cfg.stream.paced = false;
            }
            let (stats, _) = stream(&cfg)?;
            print!("{}", stats.to_text());
        }
        Command::ExportCsv(c) => {
            let cfg = c.resolve(false)?;
            let out = c.out.clone().unwrap_or_else(|| cfg.paths.dataset.with_extension("csv"));
            let n = export_csv(&cfg, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
