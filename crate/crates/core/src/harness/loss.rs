//! Pixel-weighted cross-entropy with a pseudo-label noise decomposition.

use crate::error::{shape_err, Result};
use crate::harness::model::EPS;
use crate::tensor::{OneHotLabel, ProbMap};

/// Correctness of a target-origin pixel's pseudo-label, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelTag {
    /// Not a target-domain pixel (or not tracked).
    Other,
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Loss mass from pixels tagged [`PixelTag::Other`].
    pub other: f64,
    pub target_correct: f64,
    pub target_incorrect: f64,
}

impl LossBreakdown {
    pub fn target(&self) -> f64 {
        self.target_correct + self.target_incorrect
    }

    pub fn total(&self) -> f64 {
        self.other + self.target()
    }

    /// Share of the target loss caused by incorrect pseudo-labels.
    pub fn noise_ratio(&self) -> Option<f64> {
        let t = self.target();
        (t > 0.0).then(|| self.target_incorrect / t)
    }
}

/// `−Σ_p q_p Σ_c y_pc log max(ŷ_pc, ε)`, split by pixel tag.
///
/// Unpopulated label pixels contribute nothing. Without tags every pixel is
/// counted as [`PixelTag::Other`].
pub fn weighted_ce_loss(
    y: &OneHotLabel,
    probs: &ProbMap,
    q: &[f64],
    tags: Option<&[PixelTag]>,
) -> Result<LossBreakdown> {
    let n = y.num_pixels();
    if y.dims() != probs.dims() || q.len() != n || tags.is_some_and(|t| t.len() != n) {
        return Err(shape_err(
            "weighted_ce_loss",
            (y.dims(), n),
            (probs.dims(), q.len(), tags.map(<[PixelTag]>::len)),
        ));
    }
    if y.num_classes() != probs.num_classes() {
        return Err(shape_err("weighted_ce_loss", y.num_classes(), probs.num_classes()));
    }
    let mut out = LossBreakdown::default();
    for p in 0..n {
        let Some(c) = y.class_at(p) else { continue };
        if q[p] == 0.0 {
            continue;
        }
        let term = -q[p] * probs.pixel(p)[c].max(EPS).ln();
        match tags.map_or(PixelTag::Other, |t| t[p]) {
            PixelTag::Other => out.other += term,
            PixelTag::Correct => out.target_correct += term,
            PixelTag::Incorrect => out.target_incorrect += term,
        }
    }
    Ok(out)
}
