//! Per-class memory banks of confidently pseudo-labelled target crops.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{shape_err, EcapError, Result};
use crate::pseudo_label::{all_class_confidences, TeacherOutput};
use crate::snapshot::{read_bytes, read_tensor, read_u32, write_tensor, write_u32, Tensor};
use crate::tensor::{ImageTensor, LabelMap, OneHotLabel};

pub const BANK_MAGIC: &[u8; 8] = b"ECAPBANK";
pub const BANK_FORMAT_VERSION: u8 = 1;

/// Identifier of a target-domain image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImageId(pub u64);

/// Target image and pseudo-label masked to a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub image: ImageTensor,
    pub label: OneHotLabel,
    pub confidence: f64,
    pub image_id: ImageId,
    pub class_id: usize,
}

impl BankEntry {
    /// Checks the masking invariant: the label holds `class_id` exactly where
    /// it is populated, and the image is zero everywhere else.
    pub fn validate(&self) -> Result<()> {
        if self.image.dims() != self.label.dims() {
            return Err(shape_err("BankEntry", self.image.dims(), self.label.dims()));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(EcapError::InvalidValue {
                what: "confidence",
                detail: format!("{} outside [0, 1]", self.confidence),
            });
        }
        for p in 0..self.label.num_pixels() {
            match self.label.class_at(p) {
                Some(c) if c != self.class_id => {
                    return Err(EcapError::InvalidValue {
                        what: "bank entry label",
                        detail: format!("pixel {p} has class {c}, entry class {}", self.class_id),
                    })
                }
                None if self.image.pixel_at(p) != [0.0; 3] => {
                    return Err(EcapError::InvalidValue {
                        what: "bank entry image",
                        detail: format!("pixel {p} outside the class mask is non-zero"),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One entry per class present in the pseudo-label, each masked by `m_c`.
pub fn extract_class_samples(
    image: &ImageTensor,
    teacher: &TeacherOutput,
    image_id: ImageId,
) -> Result<Vec<BankEntry>> {
    if image.dims() != teacher.dims() {
        return Err(shape_err("extract_class_samples", teacher.dims(), image.dims()));
    }
    let confidences = all_class_confidences(teacher);
    let mut entries = Vec::new();
    for c in teacher.pseudo_label.present_classes() {
        let Some(confidence) = confidences[c] else {
            continue;
        };
        let m_c = teacher.pseudo_label.class_mask(c);
        entries.push(BankEntry {
            image: image.masked(&m_c)?,
            label: teacher.pseudo_label.masked(&m_c)?,
            confidence,
            image_id,
            class_id: c,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    class_id: usize,
    entries: Vec<BankEntry>,
}

impl MemoryBank {
    pub fn new(class_id: usize) -> Self {
        Self {
            class_id,
            entries: Vec::new(),
        }
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replaces the entry from the same image in place, or appends.
    fn upsert(&mut self, entry: BankEntry) {
        debug_assert_eq!(entry.class_id, self.class_id);
        match self.entries.iter_mut().find(|e| e.image_id == entry.image_id) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    /// Entry indices ordered by confidence, descending; ties keep insertion
    /// order (older first).
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            self.entries[b]
                .confidence
                .total_cmp(&self.entries[a].confidence)
        });
        idx
    }

    /// The `min(n, len)` most confident entries, in rank order.
    pub fn top_n(&self, n: usize) -> Vec<usize> {
        let mut r = self.ranked();
        r.truncate(n);
        r
    }
}

/// Sampling probability of every entry (in storage order): uniform over the
/// `min(n, |B|)` most confident entries, zero elsewhere.
pub fn top_n_distribution(bank: &MemoryBank, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(EcapError::InvalidValue {
            what: "n_top",
            detail: "must be >= 1".into(),
        });
    }
    if bank.is_empty() {
        return Err(EcapError::EmptyBank {
            class: bank.class_id,
        });
    }
    let top = bank.top_n(n);
    let p = 1.0 / top.len() as f64;
    let mut probs = vec![0.0; bank.len()];
    for i in top {
        probs[i] = p;
    }
    Ok(probs)
}

/// One memory bank per class plus the per-class sampling switch.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSet {
    banks: Vec<MemoryBank>,
    enabled: Vec<bool>,
}

impl BankSet {
    pub fn new(num_classes: usize) -> Self {
        Self {
            banks: (0..num_classes).map(MemoryBank::new).collect(),
            enabled: vec![true; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.banks.len()
    }

    pub fn bank(&self, c: usize) -> &MemoryBank {
        &self.banks[c]
    }

    pub fn banks(&self) -> &[MemoryBank] {
        &self.banks
    }

    pub fn is_enabled(&self, c: usize) -> bool {
        self.enabled[c]
    }

    pub fn set_enabled(&mut self, c: usize, enabled: bool) -> Result<()> {
        let n = self.num_classes();
        *self.enabled.get_mut(c).ok_or(EcapError::UnknownClass {
            class: c,
            num_classes: n,
        })? = enabled;
        Ok(())
    }

    pub fn total_entries(&self) -> usize {
        self.banks.iter().map(MemoryBank::len).sum()
    }

    /// Inserts entries from one target image, keeping at most one entry per
    /// image in each bank (newest wins).
    pub fn insert(&mut self, entries: Vec<BankEntry>, image_id: ImageId) -> Result<()> {
        let n = self.num_classes();
        for e in &entries {
            if e.image_id != image_id {
                return Err(EcapError::InvalidValue {
                    what: "bank entry",
                    detail: format!("image id {:?} does not match {:?}", e.image_id, image_id),
                });
            }
            if e.class_id >= n {
                return Err(EcapError::UnknownClass {
                    class: e.class_id,
                    num_classes: n,
                });
            }
        }
        for e in entries {
            self.banks[e.class_id].upsert(e);
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(BANK_MAGIC)?;
        w.write_all(&[BANK_FORMAT_VERSION])?;
        write_u32(w, self.num_classes() as u32)?;
        for (bank, &enabled) in self.banks.iter().zip(&self.enabled) {
            w.write_all(&[enabled as u8])?;
            write_u32(w, bank.len() as u32)?;
            for e in &bank.entries {
                w.write_all(&e.image_id.0.to_le_bytes())?;
                write_u32(w, e.class_id as u32)?;
                w.write_all(&e.confidence.to_le_bytes())?;
                write_tensor(w, &Tensor::Image(e.image.clone()))?;
                write_tensor(w, &Tensor::OneHot(e.label.clone()))?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let head = read_bytes(r, 9).map_err(|_| EcapError::Format("truncated bank header".into()))?;
        if &head[..8] != BANK_MAGIC {
            return Err(EcapError::Format("bad bank magic".into()));
        }
        if head[8] != BANK_FORMAT_VERSION {
            return Err(EcapError::Format(format!("unsupported bank version {}", head[8])));
        }
        let c = read_u32(r)? as usize;
        if c > crate::tensor::MAX_CLASSES {
            return Err(EcapError::Format(format!("implausible class count {c}")));
        }
        let mut set = BankSet::new(c);
        for class in 0..c {
            let flag = read_bytes(r, 1)?[0];
            set.enabled[class] = match flag {
                0 => false,
                1 => true,
                other => return Err(EcapError::Format(format!("bad enabled flag {other}"))),
            };
            let count = read_u32(r)? as usize;
            for _ in 0..count {
                let id = u64::from_le_bytes(read_bytes(r, 8)?.try_into().unwrap());
                let class_id = read_u32(r)? as usize;
                let confidence = f64::from_le_bytes(read_bytes(r, 8)?.try_into().unwrap());
                let Tensor::Image(image) = read_tensor(r)? else {
                    return Err(EcapError::Format("expected image tensor".into()));
                };
                let Tensor::OneHot(label) = read_tensor(r)? else {
                    return Err(EcapError::Format("expected one-hot tensor".into()));
                };
                let entry = BankEntry {
                    image,
                    label,
                    confidence,
                    image_id: ImageId(id),
                    class_id,
                };
                if class_id != class {
                    return Err(EcapError::Format(format!(
                        "entry of class {class_id} stored in bank {class}"
                    )));
                }
                entry
                    .validate()
                    .map_err(|e| EcapError::Format(format!("invalid entry: {e}")))?;
                if set.banks[class].entries.iter().any(|x| x.image_id == entry.image_id) {
                    return Err(EcapError::Format(format!(
                        "duplicate image {id} in bank {class}"
                    )));
                }
                set.banks[class].entries.push(entry);
            }
        }
        Ok(set)
    }
}
