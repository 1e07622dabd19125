//! `run`, `sweep` and `inspect-bank`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use ecap_core::harness::{run_experiment_with, write_metrics_csv, NoiseMetrics, StepRecord, Variant};
use ecap_core::{BankSet, EcapError, Exec, MixedSample};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::export::{save_image, save_label, save_weights};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] EcapError),
    #[error("png export: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, CommandError>;

pub struct RunOutcome {
    pub metrics: NoiseMetrics,
    pub records: Vec<StepRecord>,
    pub student_params: Vec<f64>,
    /// Every file written, all under the configured output directory.
    pub files: Vec<PathBuf>,
}

/// Iterations whose augmented samples get exported: evenly spread over the
/// second half of training.
fn sample_iterations(iterations: usize, n: usize) -> BTreeSet<usize> {
    let start = iterations / 2;
    let span = iterations - start;
    (0..n.min(span)).map(|k| start + k * span / n.min(span)).collect()
}

fn run_into(cfg: &RunConfig, dir: &Path, exec: Exec, samples: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let wanted = sample_iterations(cfg.train.iterations, samples);
    let mut captured: Vec<(usize, MixedSample)> = Vec::new();
    let result = run_experiment_with(&cfg.train, cfg.variant, cfg.seed, exec, &mut |trace| {
        if wanted.contains(&trace.record.iteration) {
            captured.push((trace.record.iteration, trace.mixed.clone()));
        }
    })?;

    let mut files = Vec::new();
    let mut file = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    fs::write(file("config.txt"), cfg.serialize())?;
    write_metrics_csv(&result.records, BufWriter::new(File::create(file("metrics.csv"))?))?;
    fs::write(file("report.txt"), result.metrics.report())?;
    result.banks.save(file("banks.bin"))?;
    if !captured.is_empty() {
        fs::create_dir_all(dir.join("samples"))?;
    }
    for (it, m) in &captured {
        let (h, w) = m.image.dims();
        save_image(&m.image, &file(&format!("samples/iter{it:05}_image.png")))?;
        save_label(&m.label, &file(&format!("samples/iter{it:05}_label.png")))?;
        save_weights(&m.weight, h, w, &file(&format!("samples/iter{it:05}_weight.png")))?;
    }
    Ok(RunOutcome {
        metrics: result.metrics,
        records: result.records,
        student_params: result.student.params().to_vec(),
        files,
    })
}

/// Trains once and writes metrics CSV, report, bank snapshot and sample PNGs
/// into `cfg.out_dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    run_into(cfg, &cfg.out_dir, Exec::default(), cfg.samples)
}

/// One-at-a-time grid around the base configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub n0: Vec<f64>,
    pub beta: Vec<f64>,
    pub n_top: Vec<usize>,
    /// Adds an ECAP⁻ row: transforms disabled, everything else as base.
    pub transforms_off: bool,
    /// Adds a row with the plain class-mix baseline.
    pub baseline_row: bool,
}

pub struct SweepRow {
    pub label: String,
    pub config: RunConfig,
    pub outcome: RunOutcome,
    /// mIoU minus the base row's mIoU, in points.
    pub delta_miou: f64,
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Labels and configs of the grid, base row first, duplicates dropped.
pub fn sweep_points(base: &RunConfig, grid: &SweepGrid) -> Vec<(String, RunConfig)> {
    let mut points = vec![("base".to_string(), base.clone())];
    let mut push = |label: String, cfg: RunConfig| {
        if !points.iter().any(|(_, c)| *c == cfg) {
            points.push((label, cfg));
        }
    };
    for &v in &grid.n0 {
        let mut c = base.clone();
        c.train.sampler.n0 = v;
        push(format!("n0={v}"), c);
    }
    for &v in &grid.beta {
        let mut c = base.clone();
        c.train.sampler.beta = v;
        push(format!("beta={v}"), c);
    }
    for &v in &grid.n_top {
        let mut c = base.clone();
        c.train.sampler.n_top = v;
        push(format!("n_top={v}"), c);
    }
    if grid.transforms_off {
        let mut c = base.clone();
        c.train.transforms.enabled = false;
        push("ECAP-".into(), c);
    }
    if grid.baseline_row {
        let mut c = base.clone();
        c.variant = Variant::Baseline;
        push("baseline".into(), c);
    }
    points
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || ch == '.' || ch == '_' { ch } else { '_' })
        .collect()
}

/// Runs every grid point with the base seed; points run concurrently when
/// the `parallel` feature is on, each in its own `sweep/<label>` directory.
pub fn cmd_sweep(base: &RunConfig, grid: &SweepGrid) -> Result<SweepReport> {
    let points = sweep_points(base, grid);
    for (_, c) in &points {
        c.validate()?;
    }
    let root = base.out_dir.join("sweep");
    let run = |(label, cfg): &(String, RunConfig)| -> Result<RunOutcome> {
        run_into(cfg, &root.join(dir_name(label)), Exec::Sequential, 0)
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<RunOutcome>> = {
        use rayon::prelude::*;
        points.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<RunOutcome>> = points.iter().map(run).collect();

    let mut rows = Vec::with_capacity(points.len());
    for ((label, config), outcome) in points.into_iter().zip(outcomes) {
        rows.push(SweepRow {
            label,
            config,
            outcome: outcome?,
            delta_miou: 0.0,
        });
    }
    let base_miou = rows[0].outcome.metrics.miou;
    for r in &mut rows {
        r.delta_miou = r.outcome.metrics.miou - base_miou;
    }
    let report = SweepReport { rows };
    fs::write(base.out_dir.join("sweep.txt"), report.table())?;
    Ok(report)
}

impl SweepReport {
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
        let mut s = format!(
            "{:<14} {:>8} {:>8} {:>10} {:>10}\n",
            "row", "mIoU", "delta", "target_acc", "noise"
        );
        for r in &self.rows {
            let m = &r.outcome.metrics;
            let _ = writeln!(
                s,
                "{:<14} {:>8.2} {:>+8.2} {:>10} {:>10}",
                r.label,
                m.miou,
                r.delta_miou,
                fmt(m.target_accuracy),
                fmt(m.loss_noise_ratio)
            );
        }
        s
    }

    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Writes the `k` most confident entries of `class` as image/label PNG pairs,
/// most confident first.
pub fn cmd_inspect_bank(snapshot: &Path, class: usize, k: usize, out_dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let banks = BankSet::load(snapshot)?;
    if class >= banks.num_classes() {
        return Err(EcapError::UnknownClass {
            class,
            num_classes: banks.num_classes(),
        }
        .into());
    }
    fs::create_dir_all(out_dir)?;
    let bank = banks.bank(class);
    let mut written = Vec::new();
    for (rank, &i) in bank.ranked().iter().take(k).enumerate() {
        let e = &bank.entries()[i];
        let stem = format!("class{class}_rank{rank:02}_img{}", e.image_id.0);
        let img = out_dir.join(format!("{stem}_image.png"));
        let lbl = out_dir.join(format!("{stem}_label.png"));
        save_image(&e.image, &img)?;
        save_label(&e.label, &lbl)?;
        written.push((img, lbl));
    }
    Ok(written)
}
