//! Dense segmentation tensors.
//!
//! All tensors are row-major and channel-last. Labels are stored compactly as
//! one class byte per pixel; the one-hot view is derived on demand, which makes
//! the "exactly one hot channel per populated pixel" invariant hold by
//! construction.

use std::collections::BTreeSet;

use crate::error::{shape_err, EcapError, Result};

/// Sentinel for IGNORE pixels in a [`ClassIndexMap`] and unpopulated pixels in a
/// [`OneHotLabel`].
pub const IGNORE: u8 = u8::MAX;

/// Largest supported class count (one byte per pixel, minus the sentinel).
pub const MAX_CLASSES: usize = IGNORE as usize;

const PROB_SUM_TOL: f64 = 1e-6;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(EcapError::InvalidValue {
            what: "dimensions",
            detail: format!("height and width must be >= 1, got {height}x{width}"),
        });
    }
    Ok(())
}

fn check_classes(num_classes: usize) -> Result<()> {
    if !(2..=MAX_CLASSES).contains(&num_classes) {
        return Err(EcapError::InvalidValue {
            what: "num_classes",
            detail: format!("expected 2..={MAX_CLASSES}, got {num_classes}"),
        });
    }
    Ok(())
}

/// RGB image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * Self::CHANNELS {
            return Err(shape_err(
                "ImageTensor::new",
                height * width * Self::CHANNELS,
                data.len(),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(EcapError::InvalidValue {
                what: "image value",
                detail: format!("{v} is outside [0, 1]"),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be non-zero");
        Self {
            height,
            width,
            data: vec![0.0; height * width * Self::CHANNELS],
        }
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        check_dims(height, width)?;
        Self::new(height, width, vec![value; height * width * Self::CHANNELS])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixel_at(&self, index: usize) -> [f32; 3] {
        let i = index * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Values are clamped into `[0, 1]`; NaN becomes 0.
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        for (k, v) in rgb.into_iter().enumerate() {
            self.data[i + k] = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }

    /// Zeroes every pixel where `mask` is 0 (`x ⊙ m`).
    pub fn masked(&self, mask: &BinaryMask) -> Result<Self> {
        if mask.dims() != self.dims() {
            return Err(shape_err("ImageTensor::masked", self.dims(), mask.dims()));
        }
        let mut out = self.clone();
        for (p, &keep) in mask.data().iter().enumerate() {
            if !keep {
                out.data[p * 3..p * 3 + 3].fill(0.0);
            }
        }
        Ok(out)
    }
}

/// Per-pixel class distribution, `H×W×C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbMap {
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        if data.len() != height * width * num_classes {
            return Err(shape_err(
                "ProbMap::new",
                height * width * num_classes,
                data.len(),
            ));
        }
        for (p, px) in data.chunks_exact(num_classes).enumerate() {
            if px.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                return Err(EcapError::InvalidValue {
                    what: "probability",
                    detail: format!("pixel {p} has a value outside [0, 1]"),
                });
            }
            let sum: f64 = px.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(EcapError::InvalidValue {
                    what: "probability",
                    detail: format!("pixel {p} sums to {sum}"),
                });
            }
        }
        Ok(Self {
            height,
            width,
            num_classes,
            data,
        })
    }

    /// Uniform distribution at every pixel.
    pub fn uniform(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        let v = 1.0 / num_classes as f64;
        Ok(Self {
            height,
            width,
            num_classes,
            data: vec![v; height * width * num_classes],
        })
    }

    pub(crate) fn from_raw_unchecked(
        height: usize,
        width: usize,
        num_classes: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * num_classes);
        Self {
            height,
            width,
            num_classes,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.num_classes..(index + 1) * self.num_classes]
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Index of the largest value, ties resolved to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = c;
        }
    }
    best
}

/// One-hot label map. Unpopulated pixels have an all-zero one-hot vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotLabel {
    height: usize,
    width: usize,
    num_classes: usize,
    classes: Vec<u8>,
}

impl OneHotLabel {
    /// Builds a label from per-pixel classes; `None` marks an unpopulated pixel.
    pub fn from_classes(
        height: usize,
        width: usize,
        num_classes: usize,
        classes: &[Option<usize>],
    ) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        if classes.len() != height * width {
            return Err(shape_err(
                "OneHotLabel::from_classes",
                height * width,
                classes.len(),
            ));
        }
        let mut data = Vec::with_capacity(classes.len());
        for c in classes {
            match *c {
                Some(c) if c < num_classes => data.push(c as u8),
                Some(c) => return Err(EcapError::UnknownClass { class: c, num_classes }),
                None => data.push(IGNORE),
            }
        }
        Ok(Self {
            height,
            width,
            num_classes,
            classes: data,
        })
    }

    /// Decodes a dense `H×W×C` one-hot byte tensor.
    pub fn from_one_hot(
        height: usize,
        width: usize,
        num_classes: usize,
        one_hot: &[u8],
    ) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        if one_hot.len() != height * width * num_classes {
            return Err(shape_err(
                "OneHotLabel::from_one_hot",
                height * width * num_classes,
                one_hot.len(),
            ));
        }
        let mut classes = Vec::with_capacity(height * width);
        for (p, px) in one_hot.chunks_exact(num_classes).enumerate() {
            let mut hot = None;
            for (c, &v) in px.iter().enumerate() {
                match v {
                    0 => {}
                    1 if hot.is_none() => hot = Some(c as u8),
                    _ => {
                        return Err(EcapError::InvalidValue {
                            what: "one-hot label",
                            detail: format!("pixel {p} is not one-hot"),
                        })
                    }
                }
            }
            classes.push(hot.unwrap_or(IGNORE));
        }
        Ok(Self {
            height,
            width,
            num_classes,
            classes,
        })
    }

    pub fn unpopulated(height: usize, width: usize, num_classes: usize) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        Ok(Self {
            height,
            width,
            num_classes,
            classes: vec![IGNORE; height * width],
        })
    }

    /// One-hot encoding of a class map; IGNORE pixels become unpopulated.
    pub fn from_index_map(map: &ClassIndexMap) -> Self {
        Self {
            height: map.height,
            width: map.width,
            num_classes: map.num_classes,
            classes: map.data.clone(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.classes.len()
    }

    pub fn class_at(&self, index: usize) -> Option<usize> {
        match self.classes[index] {
            IGNORE => None,
            c => Some(c as usize),
        }
    }

    pub fn is_populated(&self, index: usize) -> bool {
        self.classes[index] != IGNORE
    }

    pub fn is_fully_populated(&self) -> bool {
        self.classes.iter().all(|&c| c != IGNORE)
    }

    /// The `m^B`-style mask of populated pixels.
    pub fn populated_mask(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.classes.iter().map(|&c| c != IGNORE).collect(),
        }
    }

    /// Mask that is 1 exactly where the label is class `c` (`m_c`).
    pub fn class_mask(&self, c: usize) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.classes.iter().map(|&v| v as usize == c).collect(),
        }
    }

    /// `y ⊙ m`: pixels outside the mask become unpopulated.
    pub fn masked(&self, mask: &BinaryMask) -> Result<Self> {
        if mask.dims() != self.dims() {
            return Err(shape_err("OneHotLabel::masked", self.dims(), mask.dims()));
        }
        let mut out = self.clone();
        for (v, &keep) in out.classes.iter_mut().zip(mask.data()) {
            if !keep {
                *v = IGNORE;
            }
        }
        Ok(out)
    }

    /// Dense `H×W×C` one-hot bytes.
    pub fn to_one_hot(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.classes.len() * self.num_classes];
        for (p, &c) in self.classes.iter().enumerate() {
            if c != IGNORE {
                out[p * self.num_classes + c as usize] = 1;
            }
        }
        out
    }

    /// Class map view; unpopulated pixels map to IGNORE.
    pub fn to_index_map(&self) -> ClassIndexMap {
        ClassIndexMap {
            height: self.height,
            width: self.width,
            num_classes: self.num_classes,
            data: self.classes.clone(),
        }
    }

    pub(crate) fn raw(&self) -> &[u8] {
        &self.classes
    }
}

/// Compact class map with IGNORE support, used for ground truth and metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndexMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<u8>,
}

impl ClassIndexMap {
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        check_classes(num_classes)?;
        if data.len() != height * width {
            return Err(shape_err("ClassIndexMap::new", height * width, data.len()));
        }
        if let Some(&c) = data
            .iter()
            .find(|&&c| c != IGNORE && c as usize >= num_classes)
        {
            return Err(EcapError::UnknownClass {
                class: c as usize,
                num_classes,
            });
        }
        Ok(Self {
            height,
            width,
            num_classes,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn class_at(&self, index: usize) -> Option<usize> {
        match self.data[index] {
            IGNORE => None,
            c => Some(c as usize),
        }
    }
}

/// Binary mask gating a mix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(shape_err("BinaryMask::new", height * width, data.len()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be non-zero");
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "mask dimensions must be non-zero");
        Self {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, index: usize) -> bool {
        self.data[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.data[index] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(shape_err("BinaryMask::union", self.dims(), other.dims()));
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        })
    }
}

/// Tensors that can be combined by the mask-gated mixing operator.
pub trait Mixable: Sized {
    fn mix_dims(&self) -> (usize, usize);

    /// Number of channels that must agree between the two operands.
    fn mix_channels(&self) -> usize;

    #[doc(hidden)]
    fn select(a: &Self, b: &Self, m: &BinaryMask) -> Self;
}

impl Mixable for ImageTensor {
    fn mix_dims(&self) -> (usize, usize) {
        self.dims()
    }

    fn mix_channels(&self) -> usize {
        Self::CHANNELS
    }

    fn select(a: &Self, b: &Self, m: &BinaryMask) -> Self {
        let mut data = b.data.clone();
        for (p, &take_a) in m.data().iter().enumerate() {
            if take_a {
                data[p * 3..p * 3 + 3].copy_from_slice(&a.data[p * 3..p * 3 + 3]);
            }
        }
        Self {
            height: a.height,
            width: a.width,
            data,
        }
    }
}

impl Mixable for OneHotLabel {
    fn mix_dims(&self) -> (usize, usize) {
        self.dims()
    }

    fn mix_channels(&self) -> usize {
        self.num_classes
    }

    fn select(a: &Self, b: &Self, m: &BinaryMask) -> Self {
        let classes = a
            .classes
            .iter()
            .zip(&b.classes)
            .zip(m.data())
            .map(|((&ca, &cb), &take_a)| if take_a { ca } else { cb })
            .collect();
        Self {
            height: a.height,
            width: a.width,
            num_classes: a.num_classes,
            classes,
        }
    }
}

/// `m ⊙ a + (1 − m) ⊙ b`.
///
/// Implemented as a per-pixel selection, so the result is bit-identical to `a`
/// where `m = 1` and to `b` where `m = 0`.
pub fn mix<T: Mixable>(a: &T, b: &T, m: &BinaryMask) -> Result<T> {
    if a.mix_dims() != b.mix_dims() || a.mix_dims() != m.dims() {
        return Err(shape_err(
            "mix",
            a.mix_dims(),
            (b.mix_dims(), m.dims()),
        ));
    }
    if a.mix_channels() != b.mix_channels() {
        return Err(shape_err("mix", a.mix_channels(), b.mix_channels()));
    }
    Ok(T::select(a, b, m))
}

/// Per-pixel argmax with ties broken toward the lowest class index.
pub fn argmax_decode(p: &ProbMap) -> ClassIndexMap {
    let data = p
        .data
        .chunks_exact(p.num_classes)
        .map(|px| argmax(px) as u8)
        .collect();
    ClassIndexMap {
        height: p.height,
        width: p.width,
        num_classes: p.num_classes,
        data,
    }
}

/// Labels that can report which classes they contain.
pub trait LabelMap {
    fn present_classes(&self) -> BTreeSet<usize>;
}

fn present(raw: &[u8]) -> BTreeSet<usize> {
    let mut seen = [false; MAX_CLASSES];
    for &c in raw {
        if c != IGNORE {
            seen[c as usize] = true;
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(c, &s)| s.then_some(c))
        .collect()
}

impl LabelMap for OneHotLabel {
    fn present_classes(&self) -> BTreeSet<usize> {
        present(&self.classes)
    }
}

impl LabelMap for ClassIndexMap {
    fn present_classes(&self) -> BTreeSet<usize> {
        present(&self.data)
    }
}

/// Classes with at least one populated pixel, IGNORE excluded.
pub fn present_classes<L: LabelMap>(label: &L) -> BTreeSet<usize> {
    label.present_classes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn const_image(h: usize, w: usize, v: f32) -> ImageTensor {
        ImageTensor::filled(h, w, v).unwrap()
    }

    #[test]
    fn mix_all_ones_returns_a() {
        let a = const_image(3, 4, 0.25);
        let b = const_image(3, 4, 0.75);
        assert_eq!(mix(&a, &b, &BinaryMask::ones(3, 4)).unwrap(), a);
    }

    #[test]
    fn mix_all_zeros_returns_b() {
        let a = const_image(3, 4, 0.25);
        let b = const_image(3, 4, 0.75);
        assert_eq!(mix(&a, &b, &BinaryMask::zeros(3, 4)).unwrap(), b);
    }

    #[test]
    fn mix_diagonal_mask() {
        let a = const_image(2, 2, 1.0);
        let b = const_image(2, 2, 0.0);
        let m = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        let out = mix(&a, &b, &m).unwrap();
        assert_eq!(out.pixel(0, 0), [1.0; 3]);
        assert_eq!(out.pixel(0, 1), [0.0; 3]);
        assert_eq!(out.pixel(1, 0), [0.0; 3]);
        assert_eq!(out.pixel(1, 1), [1.0; 3]);
    }

    #[test]
    fn mix_rejects_shape_mismatch() {
        let a = const_image(2, 2, 1.0);
        let b = const_image(2, 3, 0.0);
        assert!(matches!(
            mix(&a, &b, &BinaryMask::ones(2, 2)),
            Err(EcapError::Shape { .. })
        ));
        let la = OneHotLabel::unpopulated(2, 2, 3).unwrap();
        let lb = OneHotLabel::unpopulated(2, 2, 4).unwrap();
        assert!(mix(&la, &lb, &BinaryMask::ones(2, 2)).is_err());
    }

    #[test]
    fn argmax_examples() {
        let p = ProbMap::new(1, 1, 3, vec![0.1, 0.7, 0.2]).unwrap();
        assert_eq!(argmax_decode(&p).class_at(0), Some(1));
        let p = ProbMap::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_decode(&p).class_at(0), Some(0));
        let p = ProbMap::uniform(3, 3, 7).unwrap();
        assert!(argmax_decode(&p).data().iter().all(|&c| c == 0));
    }

    #[test]
    fn present_classes_examples() {
        let m = ClassIndexMap::new(1, 3, 4, vec![IGNORE; 3]).unwrap();
        assert!(present_classes(&m).is_empty());
        let m = ClassIndexMap::new(1, 3, 4, vec![0, 0, 3]).unwrap();
        assert_eq!(present_classes(&m), BTreeSet::from([0, 3]));
        let l = OneHotLabel::from_classes(2, 2, 4, &[None, Some(2), None, None]).unwrap();
        assert_eq!(present_classes(&l), BTreeSet::from([2]));
    }

    #[test]
    fn constructors_validate() {
        assert!(ImageTensor::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(ImageTensor::new(0, 1, vec![]).is_err());
        assert!(ProbMap::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(ClassIndexMap::new(1, 1, 2, vec![2]).is_err());
        assert!(OneHotLabel::from_one_hot(1, 1, 2, &[1, 1]).is_err());
        assert!(OneHotLabel::from_classes(1, 1, 2, &[Some(5)]).is_err());
    }

    #[test]
    fn masking_zeroes_outside() {
        let img = const_image(2, 2, 0.5);
        let m = BinaryMask::new(2, 2, vec![true, false, true, false]).unwrap();
        let out = img.masked(&m).unwrap();
        assert_eq!(out.pixel(0, 1), [0.0; 3]);
        assert_eq!(out.pixel(1, 0), [0.5; 3]);
    }

    fn label_strategy(n: usize, c: usize) -> impl Strategy<Value = Vec<Option<usize>>> {
        proptest::collection::vec(proptest::option::weighted(0.8, 0..c), n)
    }

    proptest! {
        #[test]
        fn mix_selects_exactly(
            a in proptest::collection::vec(0.0f32..=1.0, 48),
            b in proptest::collection::vec(0.0f32..=1.0, 48),
            m in proptest::collection::vec(any::<bool>(), 16),
        ) {
            let a = ImageTensor::new(4, 4, a).unwrap();
            let b = ImageTensor::new(4, 4, b).unwrap();
            let mask = BinaryMask::new(4, 4, m.clone()).unwrap();
            let out = mix(&a, &b, &mask).unwrap();
            for (p, &take_a) in m.iter().enumerate() {
                let expect = if take_a { a.pixel_at(p) } else { b.pixel_at(p) };
                prop_assert_eq!(out.pixel_at(p), expect);
            }
        }

        #[test]
        fn mix_keeps_one_hot_valid(
            la in label_strategy(16, 5),
            lb in label_strategy(16, 5),
            m in proptest::collection::vec(any::<bool>(), 16),
        ) {
            let a = OneHotLabel::from_classes(4, 4, 5, &la).unwrap();
            let b = OneHotLabel::from_classes(4, 4, 5, &lb).unwrap();
            let mask = BinaryMask::new(4, 4, m).unwrap();
            let out = mix(&a, &b, &mask).unwrap();
            let dense = out.to_one_hot();
            for (p, px) in dense.chunks_exact(5).enumerate() {
                let hot: u32 = px.iter().map(|&v| v as u32).sum();
                prop_assert_eq!(hot, out.is_populated(p) as u32);
            }
            prop_assert_eq!(OneHotLabel::from_one_hot(4, 4, 5, &dense).unwrap(), out);
        }

        #[test]
        fn argmax_inverts_one_hot(classes in proptest::collection::vec(0u8..6, 1..64)) {
            let n = classes.len();
            let map = ClassIndexMap::new(1, n, 6, classes).unwrap();
            let onehot = OneHotLabel::from_index_map(&map).to_one_hot();
            let probs: Vec<f64> = onehot.iter().map(|&v| v as f64).collect();
            let p = ProbMap::new(1, n, 6, probs).unwrap();
            prop_assert_eq!(argmax_decode(&p), map);
        }
    }
}
