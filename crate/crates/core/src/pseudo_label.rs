//! Teacher-side pseudo-labelling, pixel weights and the EMA teacher update.

use crate::error::{shape_err, EcapError, Result};
use crate::tensor::{argmax, OneHotLabel, ProbMap, IGNORE};

/// Default confidence threshold for the target pixel weight.
pub const DEFAULT_TAU: f64 = 0.968;
pub const DEFAULT_EMA_DECAY: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutput {
    pub probs: ProbMap,
    pub pseudo_label: OneHotLabel,
    /// `max_c probs[i, j, c]`, row-major.
    pub max_conf: Vec<f64>,
}

impl TeacherOutput {
    pub fn dims(&self) -> (usize, usize) {
        self.probs.dims()
    }
}

/// One-hot argmax of the teacher's prediction, plus per-pixel max confidence.
pub fn generate_pseudo_label(probs: ProbMap) -> TeacherOutput {
    let c = probs.num_classes();
    let mut classes = Vec::with_capacity(probs.num_pixels());
    let mut max_conf = Vec::with_capacity(probs.num_pixels());
    for px in probs.data().chunks_exact(c) {
        let k = argmax(px);
        classes.push(Some(k));
        max_conf.push(px[k]);
    }
    let pseudo_label = OneHotLabel::from_classes(probs.height(), probs.width(), c, &classes)
        .expect("argmax classes are in range");
    TeacherOutput {
        probs,
        pseudo_label,
        max_conf,
    }
}

/// Fraction of pixels whose max confidence strictly exceeds `tau`.
pub fn target_weight(probs: &ProbMap, tau: f64) -> f64 {
    let c = probs.num_classes();
    let confident = probs
        .data()
        .chunks_exact(c)
        .filter(|px| px.iter().copied().fold(f64::NEG_INFINITY, f64::max) > tau)
        .count();
    confident as f64 / probs.num_pixels() as f64
}

/// Mean probability of class `c` over the pixels whose argmax is `c`.
///
/// Returns `Ok(None)` when no pixel is predicted as `c`.
pub fn class_confidence(probs: &ProbMap, c: usize) -> Result<Option<f64>> {
    let n = probs.num_classes();
    if c >= n {
        return Err(EcapError::UnknownClass {
            class: c,
            num_classes: n,
        });
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for px in probs.data().chunks_exact(n) {
        if argmax(px) == c {
            sum += px[c];
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

/// Confidence of every class in one pass; `None` for absent classes.
pub fn all_class_confidences(teacher: &TeacherOutput) -> Vec<Option<f64>> {
    let n = teacher.probs.num_classes();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (p, px) in teacher.probs.data().chunks_exact(n).enumerate() {
        let k = teacher.pseudo_label.raw()[p];
        if k != IGNORE {
            sum[k as usize] += px[k as usize];
            count[k as usize] += 1;
        }
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, k)| (k > 0).then(|| s / k as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaConfig {
    decay: f64,
}

impl EmaConfig {
    pub fn new(decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(EcapError::InvalidValue {
                what: "ema_decay",
                detail: format!("expected [0, 1), got {decay}"),
            });
        }
        Ok(Self { decay })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }
}

impl Default for EmaConfig {
    fn default() -> Self {
        Self {
            decay: DEFAULT_EMA_DECAY,
        }
    }
}

/// `decay·teacher + (1 − decay)·student`, elementwise.
///
/// Each output is clamped to the interval spanned by its two inputs so that
/// rounding can never leave the convex hull.
pub fn ema_update(teacher: &[f64], student: &[f64], cfg: EmaConfig) -> Result<Vec<f64>> {
    if teacher.len() != student.len() {
        return Err(shape_err("ema_update", teacher.len(), student.len()));
    }
    let d = cfg.decay;
    Ok(teacher
        .iter()
        .zip(student)
        .map(|(&t, &s)| {
            if t == s {
                t
            } else {
                (d * t + (1.0 - d) * s).clamp(t.min(s), t.max(s))
            }
        })
        .collect())
}
