//! Composite canvas construction and ECAP-before-DACS mixing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bank::{BankEntry, ImageId};
use crate::error::{shape_err, EcapError, Result};
use crate::pseudo_label::target_weight;
use crate::sampler::SampleDraw;
use crate::tensor::{mix, BinaryMask, ImageTensor, LabelMap, OneHotLabel, ProbMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub scale_min: f64,
    pub scale_max: f64,
    /// When false, samples are pasted untransformed (scale 1, no flip, no
    /// translation).
    pub enabled: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            scale_min: 0.1,
            scale_max: 1.0,
            enabled: true,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max <= 1.0) {
            return Err(EcapError::InvalidValue {
                what: "scale range",
                detail: format!(
                    "expected 0 < scale_min <= scale_max <= 1, got [{}, {}]",
                    self.scale_min, self.scale_max
                ),
            });
        }
        Ok(())
    }
}

/// Scale, then horizontal flip, then translation.
///
/// `offset` is the canvas position `(row, col)` of the scaled frame's
/// top-left corner and may be negative as long as every populated pixel
/// lands inside the canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub scale: f64,
    pub hflip: bool,
    pub offset: (isize, isize),
}

impl TransformParams {
    pub const IDENTITY: TransformParams = TransformParams {
        scale: 1.0,
        hflip: false,
        offset: (0, 0),
    };
}

/// Where a composite pixel was copied from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelOrigin {
    pub image_id: ImageId,
    pub class_id: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSample {
    pub image: ImageTensor,
    pub label: OneHotLabel,
    /// `m_c`: pixels where the transformed label is the entry's class.
    pub mask: BinaryMask,
    pub origin: Vec<Option<PixelOrigin>>,
}

/// Populated pixels of the scaled and flipped frame: `(row, col, source index)`.
struct Frame {
    pixels: Vec<(usize, usize, usize)>,
}

impl Frame {
    fn build(entry: &BankEntry, scale: f64, hflip: bool, canvas: (usize, usize)) -> Result<Self> {
        let (h, w) = entry.image.dims();
        let fit = 1.0f64
            .min(canvas.0 as f64 / h as f64)
            .min(canvas.1 as f64 / w as f64);
        let s = scale * fit;
        let fh = (h as f64 * s).round() as usize;
        let fw = (w as f64 * s).round() as usize;
        if fh == 0 || fw == 0 {
            return Err(EcapError::Degenerate);
        }
        let mut pixels = Vec::new();
        for i in 0..fh {
            let sr = (i * h / fh).min(h - 1);
            for j in 0..fw {
                let sj = if hflip { fw - 1 - j } else { j };
                let sc = (sj * w / fw).min(w - 1);
                let src = sr * w + sc;
                if entry.label.class_at(src) == Some(entry.class_id) {
                    pixels.push((i, j, src));
                }
            }
        }
        if pixels.is_empty() {
            return Err(EcapError::Degenerate);
        }
        Ok(Self { pixels })
    }

    /// Inclusive bounding box `(r0, r1, c0, c1)`.
    fn bbox(&self) -> (usize, usize, usize, usize) {
        let mut b = (usize::MAX, 0, usize::MAX, 0);
        for &(i, j, _) in &self.pixels {
            b.0 = b.0.min(i);
            b.1 = b.1.max(i);
            b.2 = b.2.min(j);
            b.3 = b.3.max(j);
        }
        b
    }
}

/// Applies `t` to `entry` and places the result on an empty canvas.
pub fn apply_transform(
    entry: &BankEntry,
    t: &TransformParams,
    canvas: (usize, usize),
) -> Result<TransformedSample> {
    if !(t.scale.is_finite() && t.scale > 0.0) {
        return Err(EcapError::InvalidValue {
            what: "scale",
            detail: format!("{}", t.scale),
        });
    }
    let frame = Frame::build(entry, t.scale, t.hflip, canvas)?;
    place(entry, &frame, t.offset, canvas)
}

fn place(
    entry: &BankEntry,
    frame: &Frame,
    offset: (isize, isize),
    (ch, cw): (usize, usize),
) -> Result<TransformedSample> {
    let n = entry.label.num_classes();
    let mut image = ImageTensor::zeros(ch, cw);
    let mut classes = vec![None; ch * cw];
    let mut origin = vec![None; ch * cw];
    let src_w = entry.image.width();
    for &(i, j, src) in &frame.pixels {
        let r = i as isize + offset.0;
        let c = j as isize + offset.1;
        if r < 0 || c < 0 || r >= ch as isize || c >= cw as isize {
            return Err(EcapError::InvalidValue {
                what: "translation",
                detail: format!("offset {offset:?} moves content outside the {ch}x{cw} canvas"),
            });
        }
        let (r, c) = (r as usize, c as usize);
        image.set_pixel(r, c, entry.image.pixel_at(src));
        classes[r * cw + c] = Some(entry.class_id);
        origin[r * cw + c] = Some(PixelOrigin {
            image_id: entry.image_id,
            class_id: entry.class_id,
            row: src / src_w,
            col: src % src_w,
        });
    }
    let label = OneHotLabel::from_classes(ch, cw, n, &classes)?;
    let mask = label.class_mask(entry.class_id);
    Ok(TransformedSample {
        image,
        label,
        mask,
        origin,
    })
}

/// Draws random transform parameters for `entry`.
///
/// Consumes, in order: the scale, the flip, the row offset, the column offset.
/// Nothing is consumed when transforms are disabled.
pub fn sample_transform<R: Rng + ?Sized>(
    entry: &BankEntry,
    cfg: &TransformConfig,
    canvas: (usize, usize),
    rng: &mut R,
) -> Result<(TransformParams, TransformedSample)> {
    if !cfg.enabled {
        let s = apply_transform(entry, &TransformParams::IDENTITY, canvas)?;
        return Ok((TransformParams::IDENTITY, s));
    }
    let scale = rng.gen_range(cfg.scale_min..=cfg.scale_max);
    let hflip = rng.gen_bool(0.5);
    let frame = Frame::build(entry, scale, hflip, canvas)?;
    let (r0, r1, c0, c1) = frame.bbox();
    let dy = rng.gen_range(-(r0 as isize)..=(canvas.0 - 1 - r1) as isize);
    let dx = rng.gen_range(-(c0 as isize)..=(canvas.1 - 1 - c1) as isize);
    let params = TransformParams {
        scale,
        hflip,
        offset: (dy, dx),
    };
    Ok((params, place(entry, &frame, params.offset, canvas)?))
}

/// `(x^B, y^B, m^B)` plus per-pixel provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeCanvas {
    pub image: ImageTensor,
    pub label: OneHotLabel,
    pub populated: BinaryMask,
    pub origin: Vec<Option<PixelOrigin>>,
}

impl CompositeCanvas {
    pub fn empty(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        Ok(Self {
            image: ImageTensor::zeros(height, width),
            label: OneHotLabel::unpopulated(height, width, num_classes)?,
            populated: BinaryMask::zeros(height, width),
            origin: vec![None; height * width],
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    pub fn is_empty(&self) -> bool {
        self.populated.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeResult {
    pub canvas: CompositeCanvas,
    /// Transform parameters of each pasted sample, in paste order.
    pub pasted: Vec<(ImageId, usize, TransformParams)>,
    /// Samples skipped because nothing survived the scaling.
    pub degenerate: usize,
}

/// Shuffles the drawn samples and pastes them one after another; later pastes
/// overwrite earlier ones.
pub fn build_composite<R: Rng + ?Sized>(
    draw: &SampleDraw<'_>,
    rng: &mut R,
    canvas: (usize, usize),
    num_classes: usize,
    cfg: &TransformConfig,
) -> Result<CompositeResult> {
    let mut out = CompositeCanvas::empty(canvas.0, canvas.1, num_classes)?;
    let mut order: Vec<&BankEntry> = draw.selected.clone();
    order.shuffle(rng);
    let mut pasted = Vec::with_capacity(order.len());
    let mut degenerate = 0;
    for entry in order {
        let (params, t) = match sample_transform(entry, cfg, canvas, rng) {
            Ok(v) => v,
            Err(EcapError::Degenerate) => {
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        out.image = mix(&t.image, &out.image, &t.mask)?;
        out.label = mix(&t.label, &out.label, &t.mask)?;
        out.populated = out.populated.union(&t.mask)?;
        for (p, o) in t.origin.iter().enumerate() {
            if t.mask.get(p) {
                out.origin[p] = *o;
            }
        }
        pasted.push((entry.image_id, entry.class_id, params));
    }
    Ok(CompositeResult {
        canvas: out,
        pasted,
        degenerate,
    })
}

/// Selects `⌈k/2⌉` of the `k` classes present in `label` and masks their pixels.
///
/// Selection is a partial Fisher–Yates over the present classes in ascending
/// order: for `i` in `0..⌈k/2⌉`, draw `j` uniformly from `i..k` and swap.
pub fn dacs_mask<R: Rng + ?Sized>(label: &OneHotLabel, rng: &mut R) -> Result<BinaryMask> {
    let mut classes: Vec<usize> = label.present_classes().into_iter().collect();
    let k = classes.len();
    if k == 0 {
        return Err(EcapError::EmptyLabel);
    }
    let take = k.div_ceil(2);
    for i in 0..take {
        let j = rng.gen_range(i..k);
        classes.swap(i, j);
    }
    let mut chosen = vec![false; label.num_classes()];
    for &c in &classes[..take] {
        chosen[c] = true;
    }
    let data = (0..label.num_pixels())
        .map(|p| label.class_at(p).is_some_and(|c| chosen[c]))
        .collect();
    BinaryMask::new(label.height(), label.width(), data)
}

/// Where a mixed-sample pixel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Source,
    Composite,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedSample {
    pub image: ImageTensor,
    pub label: OneHotLabel,
    /// `q^M`, row-major.
    pub weight: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// The DACS class mask `m`.
    pub mask: BinaryMask,
}

/// Source and target inputs to the mixing step.
#[derive(Debug, Clone, Copy)]
pub struct MixInputs<'a> {
    pub source: &'a ImageTensor,
    pub source_label: &'a OneHotLabel,
    pub target: &'a ImageTensor,
    /// Pseudo-label of the target (or its replacement in diagnostic runs).
    pub target_label: &'a OneHotLabel,
    /// Teacher prediction used for the confidence-ratio weight.
    pub target_probs: &'a ProbMap,
}

/// Pastes the composite onto the source, then applies DACS mixing with the
/// target. Pixels taken from the augmented source (composite included) get
/// weight 1; target pixels get the teacher's confident-pixel ratio.
pub fn ecap_dacs_mix<R: Rng + ?Sized>(
    inputs: MixInputs<'_>,
    canvas: &CompositeCanvas,
    tau: f64,
    rng: &mut R,
) -> Result<MixedSample> {
    let dims = inputs.source.dims();
    for d in [
        inputs.source_label.dims(),
        inputs.target.dims(),
        inputs.target_label.dims(),
        inputs.target_probs.dims(),
        canvas.dims(),
    ] {
        if d != dims {
            return Err(shape_err("ecap_dacs_mix", dims, d));
        }
    }
    let aug_image = mix(&canvas.image, inputs.source, &canvas.populated)?;
    let aug_label = mix(&canvas.label, inputs.source_label, &canvas.populated)?;
    let m = dacs_mask(&aug_label, rng)?;
    let image = mix(&aug_image, inputs.target, &m)?;
    let label = mix(&aug_label, inputs.target_label, &m)?;
    let w = target_weight(inputs.target_probs, tau);
    let mut weight = Vec::with_capacity(m.data().len());
    let mut provenance = Vec::with_capacity(m.data().len());
    for (p, &from_source) in m.data().iter().enumerate() {
        weight.push(if from_source { 1.0 } else { w });
        provenance.push(match (from_source, canvas.populated.get(p)) {
            (false, _) => Provenance::Target,
            (true, true) => Provenance::Composite,
            (true, false) => Provenance::Source,
        });
    }
    Ok(MixedSample {
        image,
        label,
        weight,
        provenance,
        mask: m,
    })
}
