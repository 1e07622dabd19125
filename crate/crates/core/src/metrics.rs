//! Segmentation metrics.

use crate::error::{shape_err, Result};
use crate::tensor::ClassIndexMap;

/// Square count matrix: `counts[gt][pred]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(shape_err(
                "ConfusionMatrix::from_counts",
                num_classes * num_classes,
                counts.len(),
            ));
        }
        Ok(Self { num_classes, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds the counts of `pred` against `gt`; IGNORE ground truth is skipped.
    pub fn accumulate(&mut self, pred: &ClassIndexMap, gt: &ClassIndexMap) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(shape_err("confusion_matrix", gt.dims(), pred.dims()));
        }
        let n = self.num_classes;
        for (p, g) in pred.data().iter().zip(gt.data()) {
            let (Some(g), Some(p)) = (class_of(*g), class_of(*p)) else {
                continue;
            };
            if g < n && p < n {
                self.counts[g * n + p] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.num_classes, other.num_classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

fn class_of(v: u8) -> Option<usize> {
    (v != crate::tensor::IGNORE).then_some(v as usize)
}

pub fn confusion_matrix(pred: &ClassIndexMap, gt: &ClassIndexMap) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(gt.num_classes().max(pred.num_classes()));
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// `None` for classes with neither ground-truth nor predicted pixels.
    pub per_class: Vec<Option<f64>>,
    /// Mean over supported classes; 0 when no class has support.
    pub mean: f64,
}

pub fn miou(cm: &ConfusionMatrix) -> IouReport {
    let n = cm.num_classes;
    let per_class: Vec<Option<f64>> = (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let row: u64 = (0..n).map(|j| cm.get(c, j)).sum();
            let col: u64 = (0..n).map(|i| cm.get(i, c)).sum();
            let union = row + col - tp;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    let supported: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = if supported.is_empty() {
        0.0
    } else {
        supported.iter().sum::<f64>() / supported.len() as f64
    };
    IouReport { per_class, mean }
}
