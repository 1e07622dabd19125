use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ecap_cli::config::{key_help, OUT_DIR_ENV};
use ecap_cli::{cmd_inspect_bank, cmd_run, cmd_sweep, RunConfig, SweepGrid};

#[derive(Parser)]
#[command(name = "ecap", version, about = "Self-training with confidence-gated cut-and-paste augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and export metrics, report, bank snapshot and samples.
    #[command(after_help = key_help())]
    Run(Common),
    /// One-at-a-time hyperparameter sweep around the configured run.
    #[command(after_help = key_help())]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        n0_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        beta_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n_top_grid: Vec<usize>,
        /// Add a row with random scale/flip/translate disabled.
        #[arg(long)]
        transforms_off: bool,
        /// Add a plain class-mix baseline row.
        #[arg(long)]
        with_baseline: bool,
    },
    /// Export the most confident entries of one class bank as PNG pairs.
    InspectBank {
        snapshot: PathBuf,
        #[arg(long)]
        class: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value = "bank-inspect")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    n0: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    n_top: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl Common {
    /// Defaults, then the file, then `--set`, then the named flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        let named = [
            ("n0", &self.n0),
            ("beta", &self.beta),
            ("n_top", &self.n_top),
            ("seed", &self.seed),
            ("iterations", &self.iterations),
            ("variant", &self.variant),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let outcome = cmd_run(&cfg)?;
            print!("{}", outcome.metrics.report());
            println!("wrote {} files to {}", outcome.files.len(), cfg.out_dir.display());
        }
        Command::Sweep { common, n0_grid, beta_grid, n_top_grid, transforms_off, with_baseline } => {
            let cfg = common.resolve()?;
            let grid = SweepGrid {
                n0: n0_grid,
                beta: beta_grid,
                n_top: n_top_grid,
                transforms_off,
                baseline_row: with_baseline,
            };
            let report = cmd_sweep(&cfg, &grid)?;
            print!("{}", report.table());
        }
        Command::InspectBank { snapshot, class, k, out } => {
            let written = cmd_inspect_bank(&snapshot, class, k, &out)
                .with_context(|| format!("inspecting {}", snapshot.display()))?;
            for (img, lbl) in written {
                println!("{} {}", img.display(), lbl.display());
            }
        }
    }
    Ok(())
}
