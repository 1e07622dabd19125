//! Procedural two-domain scene generator.
//!
//! Every scene has two "stuff" classes (ground below a random horizon, sky
//! above it) and a handful of "thing" shapes drawn on top: rectangles, disks
//! and small squares, cycling through the remaining classes. Thing classes
//! with larger indices are smaller and rarer. The target domain applies a
//! global colour transform and extra pixel noise to the same layout process.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EcapError, Result};
use crate::tensor::{ClassIndexMap, ImageTensor, OneHotLabel};

/// Affine colour transform plus additive noise, applied to target scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainShift {
    pub color_matrix: [[f32; 3]; 3],
    pub color_offset: [f32; 3],
    /// Extra uniform pixel noise amplitude on top of the shared noise.
    pub noise: f32,
}

impl DomainShift {
    pub fn none() -> Self {
        Self {
            color_matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            color_offset: [0.0; 3],
            noise: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::none()
    }

    fn apply(&self, rgb: [f32; 3]) -> [f32; 3] {
        let m = &self.color_matrix;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = m[k][0] * rgb[0] + m[k][1] * rgb[1] + m[k][2] * rgb[2] + self.color_offset[k];
        }
        out
    }
}

impl Default for DomainShift {
    fn default() -> Self {
        // Dusk-like shift: darker, warmer, desaturated blues, extra sensor noise.
        Self {
            color_matrix: [[0.80, 0.15, 0.00], [0.10, 0.70, 0.10], [0.05, 0.15, 0.55]],
            color_offset: [0.06, 0.02, -0.02],
            noise: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneConfig {
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub shapes_min: usize,
    pub shapes_max: usize,
    /// Base colour per class; must have `num_classes` entries.
    pub palette: Vec<[f32; 3]>,
    /// Per-image, per-class colour jitter amplitude.
    pub color_jitter: f32,
    /// Uniform per-pixel noise amplitude shared by both domains.
    pub pixel_noise: f32,
    pub shift: DomainShift,
    pub n_source: usize,
    pub n_target: usize,
    /// Fraction of target scenes held out for evaluation.
    pub eval_fraction: f64,
}

pub fn default_palette(num_classes: usize) -> Vec<[f32; 3]> {
    const BASE: [[f32; 3]; 8] = [
        [0.45, 0.40, 0.35],
        [0.45, 0.65, 0.90],
        [0.80, 0.25, 0.20],
        [0.25, 0.70, 0.30],
        [0.85, 0.80, 0.25],
        [0.60, 0.30, 0.70],
        [0.20, 0.60, 0.70],
        [0.90, 0.55, 0.20],
    ];
    (0..num_classes)
        .map(|c| {
            let b = BASE[c % BASE.len()];
            let k = (c / BASE.len()) as f32 * 0.1;
            [(b[0] + k) % 1.0, (b[1] + 2.0 * k) % 1.0, (b[2] + 3.0 * k) % 1.0]
        })
        .collect()
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            num_classes: 5,
            shapes_min: 1,
            shapes_max: 4,
            palette: default_palette(5),
            color_jitter: 0.06,
            pixel_noise: 0.04,
            shift: DomainShift::default(),
            n_source: 200,
            n_target: 250,
            eval_fraction: 0.2,
        }
    }
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what, detail: String| Err(EcapError::InvalidValue { what, detail });
        if self.num_classes < 2 || self.num_classes > crate::tensor::MAX_CLASSES {
            return bad("num_classes", format!("expected >= 2, got {}", self.num_classes));
        }
        if self.height < 4 || self.width < 4 {
            return bad("canvas", format!("expected at least 4x4, got {}x{}", self.height, self.width));
        }
        if self.palette.len() != self.num_classes {
            return bad(
                "palette",
                format!("{} colours for {} classes", self.palette.len(), self.num_classes),
            );
        }
        if self.shapes_min > self.shapes_max {
            return bad("shapes", format!("min {} > max {}", self.shapes_min, self.shapes_max));
        }
        let finite = self
            .shift
            .color_matrix
            .iter()
            .flatten()
            .chain(&self.shift.color_offset)
            .chain([&self.shift.noise, &self.color_jitter, &self.pixel_noise])
            .all(|v| v.is_finite());
        if !finite {
            return bad("shift", "non-finite domain parameters".into());
        }
        if self.n_source == 0 || self.n_target < 2 {
            return bad("dataset size", "need >= 1 source and >= 2 target scenes".into());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return bad("eval_fraction", format!("expected (0, 1), got {}", self.eval_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: ImageTensor,
    pub label: ClassIndexMap,
}

impl Scene {
    pub fn one_hot(&self) -> OneHotLabel {
        OneHotLabel::from_index_map(&self.label)
    }
}

/// Labelled source scenes and target scenes whose ground truth is kept for
/// the diagnostic variants and metrics only.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub source: Vec<Scene>,
    /// Scenes used for self-training; their index is the bank image id.
    pub target_train: Vec<Scene>,
    pub target_eval: Vec<Scene>,
    pub num_classes: usize,
}

impl DomainPair {
    /// Thing class with the fewest source pixels (any class if there are no
    /// thing classes).
    pub fn rarest_class(&self) -> usize {
        let mut counts = vec![0usize; self.num_classes];
        for s in &self.source {
            for c in s.label.data() {
                if let Some(n) = counts.get_mut(*c as usize) {
                    *n += 1;
                }
            }
        }
        let start = if self.num_classes > 2 { 2 } else { 0 };
        (start..self.num_classes)
            .min_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy)]
enum ShapeKind {
    Rect,
    Disk,
    Small,
}

fn thing_kind(thing_index: usize) -> ShapeKind {
    match thing_index % 3 {
        0 => ShapeKind::Rect,
        1 => ShapeKind::Disk,
        _ => ShapeKind::Small,
    }
}

/// Layout plus the per-pixel noise draws, so both domains share one process.
fn render_scene(cfg: &SyntheticSceneConfig, shift: Option<&DomainShift>, rng: &mut ChaCha8Rng) -> Scene {
    let (h, w) = (cfg.height, cfg.width);
    let mut classes = vec![0u8; h * w];

    // Stuff: sky above a slanted horizon, ground below.
    let horizon = rng.gen_range(0.35..0.6) * h as f64;
    let slope = rng.gen_range(-0.15..0.15);
    for r in 0..h {
        for c in 0..w {
            let edge = horizon + slope * (c as f64 - w as f64 / 2.0);
            classes[r * w + c] = if (r as f64) < edge { 1 } else { 0 };
        }
    }

    let things = cfg.num_classes.saturating_sub(2);
    if things > 0 {
        let weights: Vec<f64> = (0..things).map(|t| 1.0 / (1.0 + t as f64)).collect();
        let total: f64 = weights.iter().sum();
        let count = rng.gen_range(cfg.shapes_min..=cfg.shapes_max);
        for _ in 0..count {
            let mut u = rng.gen::<f64>() * total;
            let mut t = things - 1;
            for (k, wk) in weights.iter().enumerate() {
                if u < *wk {
                    t = k;
                    break;
                }
                u -= wk;
            }
            let class = (t + 2) as u8;
            let cy = rng.gen_range(0..h) as f64;
            let cx = rng.gen_range(0..w) as f64;
            let (hh, hw) = match thing_kind(t) {
                ShapeKind::Rect => (
                    rng.gen_range(h as f64 / 12.0..h as f64 / 6.0),
                    rng.gen_range(w as f64 / 12.0..w as f64 / 6.0),
                ),
                ShapeKind::Disk => {
                    let r = rng.gen_range(h.min(w) as f64 / 12.0..h.min(w) as f64 / 7.0);
                    (r, r)
                }
                ShapeKind::Small => {
                    let s = rng.gen_range(1.0..(h.min(w) as f64 / 14.0).max(1.5));
                    (s, s)
                }
            };
            for r in 0..h {
                for c in 0..w {
                    let dy = r as f64 + 0.5 - cy;
                    let dx = c as f64 + 0.5 - cx;
                    let inside = match thing_kind(t) {
                        ShapeKind::Disk => (dy * dy + dx * dx).sqrt() <= hh,
                        _ => dy.abs() <= hh && dx.abs() <= hw,
                    };
                    if inside {
                        classes[r * w + c] = class;
                    }
                }
            }
        }
    }

    let jitter: Vec<[f32; 3]> = cfg
        .palette
        .iter()
        .map(|base| {
            let mut j = *base;
            for v in &mut j {
                *v += rng.gen_range(-1.0..=1.0) * cfg.color_jitter;
            }
            j
        })
        .collect();
    let mut image = ImageTensor::zeros(h, w);
    for r in 0..h {
        // Vertical shading so stuff classes are not flat.
        let shade = 1.0 - 0.15 * (r as f32 / h as f32 - 0.5);
        for c in 0..w {
            let k = classes[r * w + c] as usize;
            let mut rgb = jitter[k].map(|v| v * shade);
            for v in &mut rgb {
                *v += rng.gen_range(-1.0..=1.0) * cfg.pixel_noise;
            }
            if let Some(s) = shift {
                rgb = s.apply(rgb);
                for v in &mut rgb {
                    *v += rng.gen_range(-1.0..=1.0) * s.noise;
                }
            }
            image.set_pixel(r, c, rgb);
        }
    }
    let label = ClassIndexMap::new(h, w, cfg.num_classes, classes).expect("generated classes are < C");
    Scene { image, label }
}

/// Deterministic source/target datasets for `seed`.
///
/// Source and target scenes come from independent RNG streams. With an
/// identity shift, the target scenes follow the source distribution.
pub fn gen_domain_pair(cfg: &SyntheticSceneConfig, seed: u64) -> Result<DomainPair> {
    cfg.validate()?;
    let mut src_rng = ChaCha8Rng::seed_from_u64(seed);
    src_rng.set_stream(11);
    let mut tgt_rng = ChaCha8Rng::seed_from_u64(seed);
    tgt_rng.set_stream(12);
    let source = (0..cfg.n_source)
        .map(|_| render_scene(cfg, None, &mut src_rng))
        .collect();
    let shift = (!cfg.shift.is_identity()).then_some(&cfg.shift);
    let mut target: Vec<Scene> = (0..cfg.n_target)
        .map(|_| render_scene(cfg, shift, &mut tgt_rng))
        .collect();
    let n_eval = ((cfg.n_target as f64 * cfg.eval_fraction).round() as usize).clamp(1, cfg.n_target - 1);
    let target_eval = target.split_off(cfg.n_target - n_eval);
    Ok(DomainPair {
        source,
        target_train: target,
        target_eval,
        num_classes: cfg.num_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::present_classes;

    fn small() -> SyntheticSceneConfig {
        SyntheticSceneConfig {
            n_source: 20,
            n_target: 20,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_domain_pair(&small(), 5).unwrap();
        let b = gen_domain_pair(&small(), 5).unwrap();
        assert_eq!(a, b);
        let c = gen_domain_pair(&small(), 6).unwrap();
        assert_ne!(a.source[0], c.source[0]);
    }

    #[test]
    fn labels_are_in_range() {
        let pair = gen_domain_pair(&small(), 1).unwrap();
        for s in pair.source.iter().chain(&pair.target_train).chain(&pair.target_eval) {
            assert!(present_classes(&s.label).iter().all(|&c| c < 5));
            assert!(s.label.data().iter().all(|&c| c != crate::tensor::IGNORE));
        }
    }

    #[test]
    fn zero_shift_matches_source_distribution() {
        let cfg = SyntheticSceneConfig {
            shift: DomainShift::none(),
            ..small()
        };
        let pair = gen_domain_pair(&cfg, 3).unwrap();
        // Same generator, same stream offset semantics: per-class mean colours agree.
        let mean = |scenes: &[Scene], class: u8| {
            let (mut s, mut n) = ([0.0f64; 3], 0usize);
            for sc in scenes {
                for (p, &c) in sc.label.data().iter().enumerate() {
                    if c == class {
                        let px = sc.image.pixel_at(p);
                        for k in 0..3 {
                            s[k] += px[k] as f64;
                        }
                        n += 1;
                    }
                }
            }
            s.map(|v| v / n as f64)
        };
        let all_target: Vec<Scene> = pair.target_train.iter().chain(&pair.target_eval).cloned().collect();
        for class in [0u8, 1] {
            let (a, b) = (mean(&pair.source, class), mean(&all_target, class));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 0.03, "class {class} channel {k}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn split_sizes() {
        let pair = gen_domain_pair(&SyntheticSceneConfig::default(), 0).unwrap();
        assert_eq!(pair.target_eval.len(), 50);
        assert_eq!(pair.target_train.len(), 200);
        assert_eq!(pair.rarest_class(), 4);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SyntheticSceneConfig {
            palette: default_palette(3),
            ..Default::default()
        };
        assert!(gen_domain_pair(&cfg, 0).is_err());
    }
}
