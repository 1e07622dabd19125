//! One iteration of mean-teacher self-training with optional ECAP.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bank::{extract_class_samples, BankSet, ImageId};
use crate::compositor::{
    build_composite, ecap_dacs_mix, CompositeCanvas, CompositeResult, MixInputs, MixedSample,
    Provenance, TransformConfig,
};
use crate::error::{EcapError, Result};
use crate::harness::loss::{weighted_ce_loss, LossBreakdown, PixelTag};
use crate::harness::model::PixelClassifier;
use crate::harness::scene::{DomainPair, SyntheticSceneConfig};
use crate::par::Exec;
use crate::pseudo_label::{ema_update, generate_pseudo_label, EmaConfig, DEFAULT_TAU};
use crate::sampler::{draw, SampleDraw, SamplerConfig};
use crate::tensor::OneHotLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain class-mix self-training.
    Baseline,
    Ecap,
    /// Zero weight on every incorrectly pseudo-labelled pixel.
    Denoise,
    /// Pseudo-labels replaced by ground truth.
    Oracle,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Ecap, Variant::Denoise, Variant::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ecap => "ecap",
            Variant::Denoise => "denoise",
            Variant::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = EcapError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| EcapError::InvalidValue {
                what: "variant",
                detail: format!("expected one of baseline, ecap, denoise, oracle; got {s:?}"),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scene: SyntheticSceneConfig,
    pub hidden: usize,
    pub lr: f64,
    pub momentum: f64,
    pub ema: EmaConfig,
    /// Use `min(1 − 1/(t+1), decay)` so the teacher tracks the student early on.
    pub ema_warmup: bool,
    pub tau: f64,
    pub sampler: SamplerConfig,
    pub transforms: TransformConfig,
    /// Classes whose memory banks are never sampled.
    pub disabled_classes: Vec<usize>,
    pub iterations: usize,
    /// Iterations at the end of training over which noise metrics are pooled.
    pub metric_window: usize,
    /// Iterations at the end of training over which the bank/image accuracy
    /// split is pooled.
    pub split_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scene: SyntheticSceneConfig::default(),
            hidden: 16,
            lr: 0.05,
            momentum: 0.9,
            ema: EmaConfig::default(),
            ema_warmup: true,
            tau: DEFAULT_TAU,
            sampler: SamplerConfig::default(),
            transforms: TransformConfig::default(),
            disabled_classes: Vec::new(),
            iterations: 3000,
            metric_window: 50,
            split_window: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what, detail: String| Err(EcapError::InvalidValue { what, detail });
        self.scene.validate()?;
        self.sampler.validate()?;
        self.transforms.validate()?;
        if self.hidden == 0 {
            return bad("hidden", "expected >= 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", format!("expected >= 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("expected [0, 1), got {}", self.momentum));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau", format!("expected (0, 1), got {}", self.tau));
        }
        if let Some(&c) = self.disabled_classes.iter().find(|&&c| c >= self.scene.num_classes) {
            return Err(EcapError::UnknownClass {
                class: c,
                num_classes: self.scene.num_classes,
            });
        }
        if self.metric_window == 0 || self.split_window == 0 {
            return bad("window", "metric windows must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub bank_correct: u64,
    pub bank_total: u64,
    pub image_correct: u64,
    pub image_total: u64,
}

impl SplitCounts {
    pub fn add(&mut self, other: &SplitCounts) {
        self.bank_correct += other.bank_correct;
        self.bank_total += other.bank_total;
        self.image_correct += other.image_correct;
        self.image_total += other.image_total;
    }

    pub fn bank_accuracy(&self) -> Option<f64> {
        (self.bank_total > 0).then(|| 100.0 * self.bank_correct as f64 / self.bank_total as f64)
    }

    pub fn image_accuracy(&self) -> Option<f64> {
        (self.image_total > 0).then(|| 100.0 * self.image_correct as f64 / self.image_total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    /// Mean per-pixel loss of the source and mixed terms.
    pub loss: f64,
    pub mec: f64,
    pub gate_probability: f64,
    /// Target-origin pixels (sampled target image plus pasted bank content).
    pub target_pixels: u64,
    pub target_correct: u64,
    pub mixed_loss: LossBreakdown,
    /// Indexed by pseudo-label class.
    pub class_split: Vec<SplitCounts>,
    pub pasted: usize,
    pub degenerate: usize,
}

impl StepRecord {
    pub fn target_accuracy(&self) -> Option<f64> {
        (self.target_pixels > 0).then(|| 100.0 * self.target_correct as f64 / self.target_pixels as f64)
    }

    pub fn loss_noise_ratio(&self) -> Option<f64> {
        self.mixed_loss.noise_ratio().map(|r| 100.0 * r)
    }
}

/// Everything produced inside one step, for instrumentation.
pub struct StepTrace<'a> {
    pub record: &'a StepRecord,
    pub source_index: usize,
    pub target_index: usize,
    pub composite: &'a CompositeResult,
    pub mixed: &'a MixedSample,
    pub banks: &'a BankSet,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub student: PixelClassifier,
    pub teacher: PixelClassifier,
    pub velocity: Vec<f64>,
    pub banks: BankSet,
    /// Drives data sampling and class mixing.
    pub rng: ChaCha8Rng,
    /// Drives the memory-bank sampler and compositor only, so that a closed
    /// gate leaves the main stream untouched.
    pub ecap_rng: ChaCha8Rng,
    pub iteration: usize,
    pub exec: Exec,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let student = PixelClassifier::init(cfg.hidden, cfg.scene.num_classes, &mut stream(seed, 1));
        let mut banks = BankSet::new(cfg.scene.num_classes);
        for &c in &cfg.disabled_classes {
            banks.set_enabled(c, false)?;
        }
        Ok(Self {
            teacher: student.clone(),
            velocity: vec![0.0; student.params().len()],
            student,
            banks,
            rng: stream(seed, 2),
            ecap_rng: stream(seed, 3),
            iteration: 0,
            exec: Exec::default(),
        })
    }
}

fn tag_pixels(
    mixed: &MixedSample,
    canvas: &CompositeCanvas,
    target_gt: &crate::tensor::ClassIndexMap,
    data: &DomainPair,
) -> Vec<PixelTag> {
    let w = target_gt.width();
    mixed
        .provenance
        .iter()
        .enumerate()
        .map(|(p, prov)| {
            let gt = match prov {
                Provenance::Source => return PixelTag::Other,
                Provenance::Target => target_gt.class_at(p),
                Provenance::Composite => canvas.origin[p].and_then(|o| {
                    data.target_train[o.image_id.0 as usize].label.class_at(o.row * w + o.col)
                }),
            };
            match (gt, mixed.label.class_at(p)) {
                (Some(g), Some(y)) if g == y => PixelTag::Correct,
                (Some(_), Some(_)) => PixelTag::Incorrect,
                _ => PixelTag::Other,
            }
        })
        .collect()
}

/// Runs one training iteration and returns its metrics.
///
/// Order: sample a source and a target scene, pseudo-label the target with
/// the teacher, (ECAP) draw from the banks and build the composite, store the
/// current target's class crops, mix, take an SGD step on source + mixed loss,
/// then update the teacher.
pub fn train_step(
    state: &mut TrainState,
    data: &DomainPair,
    cfg: &TrainConfig,
    variant: Variant,
    observer: &mut dyn FnMut(&StepTrace<'_>),
) -> Result<StepRecord> {
    let s_idx = state.rng.gen_range(0..data.source.len());
    let t_idx = state.rng.gen_range(0..data.target_train.len());
    let source = &data.source[s_idx];
    let target = &data.target_train[t_idx];
    let (h, w) = source.image.dims();
    let n_classes = data.num_classes;

    let teacher_out = generate_pseudo_label(state.teacher.forward_with(&target.image, state.exec)?);
    let gt_label = target.one_hot();
    let target_label: &OneHotLabel = match variant {
        Variant::Oracle => &gt_label,
        _ => &teacher_out.pseudo_label,
    };

    let (composite, mec, gate) = if variant == Variant::Ecap {
        let sample: SampleDraw<'_> = draw(&state.banks, &cfg.sampler, &mut state.ecap_rng);
        let composite = build_composite(&sample, &mut state.ecap_rng, (h, w), n_classes, &cfg.transforms)?;
        (composite, sample.mec, sample.gate_probability)
    } else {
        let empty = CompositeResult {
            canvas: CompositeCanvas::empty(h, w, n_classes)?,
            pasted: Vec::new(),
            degenerate: 0,
        };
        (empty, 0.0, 0.0)
    };
    if variant == Variant::Ecap {
        let id = ImageId(t_idx as u64);
        let entries = extract_class_samples(&target.image, &teacher_out, id)?;
        state.banks.insert(entries, id)?;
    }

    let source_label = source.one_hot();
    let inputs = MixInputs {
        source: &source.image,
        source_label: &source_label,
        target: &target.image,
        target_label,
        target_probs: &teacher_out.probs,
    };
    let mut mixed = ecap_dacs_mix(inputs, &composite.canvas, cfg.tau, &mut state.rng)?;
    let tags = tag_pixels(&mixed, &composite.canvas, &target.label, data);
    if variant == Variant::Denoise {
        for (q, t) in mixed.weight.iter_mut().zip(&tags) {
            if *t == PixelTag::Incorrect {
                *q = 0.0;
            }
        }
    }

    let ones = vec![1.0; h * w];
    let (src_probs, src_grad) =
        state.student.forward_backward(&source.image, &source_label, &ones, state.exec)?;
    let (mix_probs, mix_grad) =
        state.student.forward_backward(&mixed.image, &mixed.label, &mixed.weight, state.exec)?;
    let src_loss = weighted_ce_loss(&source_label, &src_probs, &ones, None)?;
    let mixed_loss = weighted_ce_loss(&mixed.label, &mix_probs, &mixed.weight, Some(&tags))?;
    let npx = (h * w) as f64;
    let loss = (src_loss.total() + mixed_loss.total()) / npx;
    if !loss.is_finite() {
        return Err(EcapError::NonFinite(format!(
            "loss at iteration {} (source {}, mixed {:?})",
            state.iteration,
            src_loss.total(),
            mixed_loss
        )));
    }

    let params = state.student.params_mut();
    for ((p, v), (gs, gm)) in params
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(src_grad.iter().zip(&mix_grad))
    {
        *v = cfg.momentum * *v + (gs + gm) / npx;
        *p -= cfg.lr * *v;
    }
    let decay = if cfg.ema_warmup {
        cfg.ema.decay().min(1.0 - 1.0 / (state.iteration as f64 + 1.0))
    } else {
        cfg.ema.decay()
    };
    let teacher = ema_update(state.teacher.params(), state.student.params(), EmaConfig::new(decay)?)?;
    state.teacher.set_params(teacher)?;

    let mut record = StepRecord {
        iteration: state.iteration,
        loss,
        mec,
        gate_probability: gate,
        target_pixels: 0,
        target_correct: 0,
        mixed_loss,
        class_split: vec![SplitCounts::default(); n_classes],
        pasted: composite.pasted.len(),
        degenerate: composite.degenerate,
    };
    for (p, tag) in tags.iter().enumerate() {
        if *tag == PixelTag::Other {
            continue;
        }
        let correct = *tag == PixelTag::Correct;
        record.target_pixels += 1;
        record.target_correct += correct as u64;
        let c = mixed.label.class_at(p).expect("mixed label is fully populated");
        let split = &mut record.class_split[c];
        if mixed.provenance[p] == Provenance::Composite {
            split.bank_total += 1;
            split.bank_correct += correct as u64;
        } else {
            split.image_total += 1;
            split.image_correct += correct as u64;
        }
    }
    observer(&StepTrace {
        record: &record,
        source_index: s_idx,
        target_index: t_idx,
        composite: &composite,
        mixed: &mixed,
        banks: &state.banks,
    });
    state.iteration += 1;
    Ok(record)
}
