//! `nocs-pose` command-line harness.
//!
//! Every subcommand works inside one experiment directory (`--out`, or
//! `output_dir` from the config):
//!
//! ```text
//! <out>/dataset/      generate
//! <out>/sweep.csv     sweep
//! <out>/report/       report
//! <out>/timing.csv    time
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use nocs_pose::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "nocs-pose", version, about = "Dense-correspondence pose estimation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset of NOCS maps, masks, crops and sidecars.
    Generate(Common),
    /// Degrade every sample per sweep spec, solve the pose and write sweep.csv.
    Sweep(Common),
    /// Summarize a sweep CSV into tables and SVG plots.
    Report {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV to read; defaults to <out>/sweep.csv.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time correspondence extraction and RANSAC+PnP on the stored crops.
    Time(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_ref().context("--config is required for this subcommand")?;
        let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
        match (&self.out, cfg.and_then(|c| c.output_dir.clone())) {
            (Some(o), _) => Ok(o.clone()),
            (None, Some(o)) => Ok(o),
            (None, None) => bail!("no output directory: pass --out or set output_dir in the config"),
        }
    }
}

fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(Some(&cfg))?;
            let index = harness::generate_dataset(&cfg, &dataset_dir(&out))?;
            println!("generated {} samples in {}", index.samples.len(), dataset_dir(&out).display());
        }
        Command::Sweep(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(Some(&cfg))?;
            let rows = harness::run_sweep(&cfg, &dataset_dir(&out))?;
            let path = out.join("sweep.csv");
            harness::save_sweep_csv(&rows, &path)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Report { common, csv } => {
            let cfg = common.config.as_ref().map(|_| common.config()).transpose()?;
            let out = common.out_dir(cfg.as_ref())?;
            let csv = csv.unwrap_or_else(|| out.join("sweep.csv"));
            let report = harness::report(&csv, &out.join("report"))?;
            print!("{}", report.to_markdown());
        }
        Command::Time(c) => {
            let cfg = c.config()?;
            let out = c.out_dir(Some(&cfg))?;
            info!("timing {} runs", cfg.timing_runs);
            let timing = harness::time_pipeline(&cfg, &dataset_dir(&out))?;
            let path = out.join("timing.csv");
            fs::write(&path, format!("{timing}\n")).with_context(|| format!("writing {}", path.display()))?;
            println!("{timing}");
        }
    }
    Ok(())
}
