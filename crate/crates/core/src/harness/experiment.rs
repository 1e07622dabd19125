//! Full training runs, noise metrics and their text/CSV renderings.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::bank::BankSet;
use crate::error::Result;
use crate::harness::model::PixelClassifier;
use crate::harness::scene::{gen_domain_pair, DomainPair, Scene};
use crate::harness::train::{train_step, SplitCounts, StepRecord, StepTrace, TrainConfig, TrainState, Variant};
use crate::metrics::{miou, ConfusionMatrix, IouReport};
use crate::par::Exec;
use crate::tensor::argmax_decode;

/// Final metrics of one run. Percentages are in [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMetrics {
    pub variant: Variant,
    pub seed: u64,
    pub iterations: usize,
    /// Pooled over the final `metric_window` iterations; `None` without any
    /// target-origin pixel in the window.
    pub target_accuracy: Option<f64>,
    pub loss_noise_ratio: Option<f64>,
    /// Student on the held-out target split.
    pub miou: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub teacher_miou: f64,
    /// Pooled over the final `split_window` iterations.
    pub class_split: Vec<SplitCounts>,
    pub rarest_class: usize,
}

pub struct ExperimentResult {
    pub metrics: NoiseMetrics,
    pub records: Vec<StepRecord>,
    pub banks: BankSet,
    pub student: PixelClassifier,
    pub teacher: PixelClassifier,
}

/// Confusion matrix of `model` over `scenes`.
pub fn evaluate(model: &PixelClassifier, scenes: &[Scene], exec: Exec) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.num_classes());
    for scene in scenes {
        let pred = argmax_decode(&model.forward_with(&scene.image, exec)?);
        cm.accumulate(&pred, &scene.label)?;
    }
    Ok(cm)
}

fn pooled(records: &[StepRecord]) -> (Option<f64>, Option<f64>) {
    let (correct, total) = records
        .iter()
        .fold((0u64, 0u64), |(c, t), r| (c + r.target_correct, t + r.target_pixels));
    let (bad, all) = records.iter().fold((0.0, 0.0), |(b, a), r| {
        (b + r.mixed_loss.target_incorrect, a + r.mixed_loss.target())
    });
    (
        (total > 0).then(|| 100.0 * correct as f64 / total as f64),
        (all > 0.0).then(|| 100.0 * bad / all),
    )
}

pub fn run_experiment(cfg: &TrainConfig, variant: Variant, seed: u64) -> Result<ExperimentResult> {
    run_experiment_with(cfg, variant, seed, Exec::default(), &mut |_| {})
}

/// [`run_experiment`] with an explicit executor and a per-step observer.
pub fn run_experiment_with(
    cfg: &TrainConfig,
    variant: Variant,
    seed: u64,
    exec: Exec,
    observer: &mut dyn FnMut(&StepTrace<'_>),
) -> Result<ExperimentResult> {
    let data = gen_domain_pair(&cfg.scene, seed)?;
    run_on(&data, cfg, variant, seed, exec, observer)
}

/// Runs on pre-generated data; the data seed and training seed may differ.
pub fn run_on(
    data: &DomainPair,
    cfg: &TrainConfig,
    variant: Variant,
    seed: u64,
    exec: Exec,
    observer: &mut dyn FnMut(&StepTrace<'_>),
) -> Result<ExperimentResult> {
    let mut state = TrainState::new(cfg, seed)?;
    state.exec = exec;
    let mut records = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        records.push(train_step(&mut state, data, cfg, variant, observer)?);
    }

    let tail = |k: usize| &records[records.len().saturating_sub(k)..];
    let (target_accuracy, loss_noise_ratio) = pooled(tail(cfg.metric_window));
    let mut class_split = vec![SplitCounts::default(); data.num_classes];
    for r in tail(cfg.split_window) {
        for (acc, s) in class_split.iter_mut().zip(&r.class_split) {
            acc.add(s);
        }
    }
    let IouReport { per_class, mean } = miou(&evaluate(&state.student, &data.target_eval, exec)?);
    let teacher_miou = miou(&evaluate(&state.teacher, &data.target_eval, exec)?).mean;
    let metrics = NoiseMetrics {
        variant,
        seed,
        iterations: cfg.iterations,
        target_accuracy,
        loss_noise_ratio,
        miou: 100.0 * mean,
        per_class_iou: per_class.into_iter().map(|v| v.map(|x| 100.0 * x)).collect(),
        teacher_miou: 100.0 * teacher_miou,
        class_split,
        rarest_class: data.rarest_class(),
    };
    Ok(ExperimentResult {
        metrics,
        records,
        banks: state.banks,
        student: state.student,
        teacher: state.teacher,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub const CSV_HEADER: &str = "iteration,loss,mec,gate_probability,target_accuracy,loss_noise_ratio";

/// One row per iteration; undefined ratios are written as empty cells.
pub fn write_metrics_csv<W: Write>(records: &[StepRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{},{}",
            r.iteration,
            r.loss,
            r.mec,
            r.gate_probability,
            opt(r.target_accuracy()),
            opt(r.loss_noise_ratio()),
        )?;
    }
    Ok(())
}

impl NoiseMetrics {
    /// `key: value` lines, stable ordering.
    pub fn report(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
        let mut s = String::new();
        let _ = writeln!(s, "variant: {}", self.variant);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "miou: {:.2}", self.miou);
        let _ = writeln!(s, "teacher_miou: {:.2}", self.teacher_miou);
        let _ = writeln!(s, "target_accuracy: {}", fmt(self.target_accuracy));
        let _ = writeln!(s, "loss_noise_ratio: {}", fmt(self.loss_noise_ratio));
        let _ = writeln!(s, "rarest_class: {}", self.rarest_class);
        for (c, iou) in self.per_class_iou.iter().enumerate() {
            let _ = writeln!(s, "iou.{c}: {}", fmt(*iou));
        }
        for (c, split) in self.class_split.iter().enumerate() {
            let _ = writeln!(
                s,
                "split.{c}: bank {} ({} px) image {} ({} px)",
                fmt(split.bank_accuracy()),
                split.bank_total,
                fmt(split.image_accuracy()),
                split.image_total
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scene::SyntheticSceneConfig;
    use crate::sampler::SamplerConfig;

    fn tiny(iterations: usize) -> TrainConfig {
        TrainConfig {
            scene: SyntheticSceneConfig {
                height: 12,
                width: 12,
                n_source: 8,
                n_target: 10,
                ..Default::default()
            },
            hidden: 6,
            iterations,
            metric_window: 5,
            split_window: 10,
            ..Default::default()
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let cfg = tiny(25);
        let a = run_experiment(&cfg, Variant::Ecap, 9).unwrap();
        let b = run_experiment(&cfg, Variant::Ecap, 9).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn closed_gate_matches_baseline() {
        let mut cfg = tiny(25);
        cfg.sampler = SamplerConfig { n0: 0.0, ..cfg.sampler };
        let ecap = run_experiment(&cfg, Variant::Ecap, 4).unwrap();
        let base = run_experiment(&cfg, Variant::Baseline, 4).unwrap();
        assert_eq!(ecap.student, base.student);
        let strip = |rs: &[StepRecord]| rs.iter().map(|r| (r.loss, r.target_correct)).collect::<Vec<_>>();
        assert_eq!(strip(&ecap.records), strip(&base.records));
        assert!(ecap.banks.total_entries() > 0);
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let res = run_experiment(&tiny(7), Variant::Baseline, 1).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&res.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 8);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
        assert!(res.metrics.report().contains("variant: baseline"));
    }
}
