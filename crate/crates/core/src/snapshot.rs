//! Binary tensor snapshots.
//!
//! Layout (little-endian): the 8-byte magic `ECAPTNSR`, one kind byte, then
//! `H`, `W`, `C` as `u32`, followed by the raw payload. Reals are written as
//! `f32`; labels and masks as one byte per element. One-hot labels are stored
//! densely (`H×W×C`); an all-zero pixel is unpopulated.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{EcapError, Result};
use crate::tensor::{BinaryMask, ClassIndexMap, ImageTensor, OneHotLabel, ProbMap};

pub const TENSOR_MAGIC: &[u8; 8] = b"ECAPTNSR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum TensorKind {
    Image = 1,
    Prob = 2,
    OneHot = 3,
    ClassIndex = 4,
    Mask = 5,
}

impl TensorKind {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Self::Image,
            2 => Self::Prob,
            3 => Self::OneHot,
            4 => Self::ClassIndex,
            5 => Self::Mask,
            other => return Err(EcapError::Format(format!("unknown tensor kind {other}"))),
        })
    }
}

/// Any snapshot-able tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Image(ImageTensor),
    /// Stored as `f32`, so a round trip rounds probabilities to single precision.
    Prob(ProbMap),
    OneHot(OneHotLabel),
    ClassIndex(ClassIndexMap),
    Mask(BinaryMask),
}

impl Tensor {
    pub fn kind(&self) -> TensorKind {
        match self {
            Tensor::Image(_) => TensorKind::Image,
            Tensor::Prob(_) => TensorKind::Prob,
            Tensor::OneHot(_) => TensorKind::OneHot,
            Tensor::ClassIndex(_) => TensorKind::ClassIndex,
            Tensor::Mask(_) => TensorKind::Mask,
        }
    }
}

fn dim_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| EcapError::Format(format!("dimension {v} exceeds u32")))
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn write_header<W: Write>(w: &mut W, kind: TensorKind, h: usize, wd: usize, c: usize) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&[kind as u8])?;
    write_u32(w, dim_u32(h)?)?;
    write_u32(w, dim_u32(wd)?)?;
    write_u32(w, dim_u32(c)?)?;
    Ok(())
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    match t {
        Tensor::Image(img) => {
            write_header(w, TensorKind::Image, img.height(), img.width(), ImageTensor::CHANNELS)?;
            for v in img.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Tensor::Prob(p) => {
            write_header(w, TensorKind::Prob, p.height(), p.width(), p.num_classes())?;
            for &v in p.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Tensor::OneHot(l) => {
            write_header(w, TensorKind::OneHot, l.height(), l.width(), l.num_classes())?;
            w.write_all(&l.to_one_hot())?;
        }
        Tensor::ClassIndex(m) => {
            write_header(w, TensorKind::ClassIndex, m.height(), m.width(), m.num_classes())?;
            w.write_all(m.data())?;
        }
        Tensor::Mask(m) => {
            write_header(w, TensorKind::Mask, m.height(), m.width(), 1)?;
            let bytes: Vec<u8> = m.data().iter().map(|&b| b as u8).collect();
            w.write_all(&bytes)?;
        }
    }
    Ok(())
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let raw = read_bytes(r, n * 4)?;
    Ok(raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(EcapError::Format("bad tensor magic".into()));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let kind = TensorKind::from_byte(kind[0])?;
    let h = read_u32(r)? as usize;
    let w = read_u32(r)? as usize;
    let c = read_u32(r)? as usize;
    let n = h
        .checked_mul(w)
        .filter(|n| n.checked_mul(c.max(1)).is_some_and(|t| t <= 1 << 30))
        .ok_or_else(|| EcapError::Format(format!("implausible tensor size {h}x{w}x{c}")))?;
    let wrap = |e: EcapError| EcapError::Format(format!("invalid tensor payload: {e}"));
    Ok(match kind {
        TensorKind::Image => {
            if c != ImageTensor::CHANNELS {
                return Err(EcapError::Format(format!("image with {c} channels")));
            }
            Tensor::Image(ImageTensor::new(h, w, read_f32s(r, n * c)?).map_err(wrap)?)
        }
        TensorKind::Prob => {
            let data = read_f32s(r, n * c)?.into_iter().map(f64::from).collect();
            Tensor::Prob(ProbMap::new(h, w, c, data).map_err(wrap)?)
        }
        TensorKind::OneHot => {
            let raw = read_bytes(r, n * c)?;
            Tensor::OneHot(OneHotLabel::from_one_hot(h, w, c, &raw).map_err(wrap)?)
        }
        TensorKind::ClassIndex => {
            Tensor::ClassIndex(ClassIndexMap::new(h, w, c, read_bytes(r, n)?).map_err(wrap)?)
        }
        TensorKind::Mask => {
            if c != 1 {
                return Err(EcapError::Format(format!("mask with {c} channels")));
            }
            let raw = read_bytes(r, n)?;
            if raw.iter().any(|&b| b > 1) {
                return Err(EcapError::Format("mask byte outside {0,1}".into()));
            }
            Tensor::Mask(BinaryMask::new(h, w, raw.into_iter().map(|b| b == 1).collect()).map_err(wrap)?)
        }
    })
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(t: &Tensor) -> Tensor {
        let mut buf = Vec::new();
        write_tensor(&mut buf, t).unwrap();
        read_tensor(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn header_layout() {
        let t = Tensor::Mask(BinaryMask::new(1, 2, vec![true, false]).unwrap());
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[..8], b"ECAPTNSR");
        assert_eq!(buf[8], 5);
        assert_eq!(&buf[9..13], &1u32.to_le_bytes());
        assert_eq!(&buf[13..17], &2u32.to_le_bytes());
        assert_eq!(&buf[17..21], &1u32.to_le_bytes());
        assert_eq!(&buf[21..], &[1, 0]);
    }

    #[test]
    fn exact_kinds_roundtrip() {
        let img = ImageTensor::new(1, 2, vec![0.1, 0.2, 0.3, 1.0, 0.0, 0.123_456_79]).unwrap();
        let lbl = OneHotLabel::from_classes(1, 3, 4, &[Some(3), None, Some(0)]).unwrap();
        let map = ClassIndexMap::new(1, 3, 4, vec![1, crate::tensor::IGNORE, 2]).unwrap();
        let mask = BinaryMask::new(2, 2, vec![true, false, false, true]).unwrap();
        for t in [
            Tensor::Image(img),
            Tensor::OneHot(lbl),
            Tensor::ClassIndex(map),
            Tensor::Mask(mask),
        ] {
            assert_eq!(roundtrip(&t), t);
        }
    }

    #[test]
    fn prob_roundtrip_is_idempotent_after_rounding() {
        let p = ProbMap::new(1, 1, 3, vec![0.1, 0.2, 0.7]).unwrap();
        let once = roundtrip(&Tensor::Prob(p));
        assert_eq!(roundtrip(&once), once);
    }

    #[test]
    fn rejects_corrupt_header() {
        let t = Tensor::Mask(BinaryMask::ones(2, 2));
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_tensor(&mut buf.as_slice()), Err(EcapError::Format(_))));
        buf[0] = b'E';
        buf[8] = 42;
        assert!(matches!(read_tensor(&mut buf.as_slice()), Err(EcapError::Format(_))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tensor");
        let t = Tensor::Image(ImageTensor::filled(3, 5, 0.25).unwrap());
        save_tensor(&path, &t).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
    }
}
