use std::io;

use thiserror::Error;

pub type Result<T, E = EcapError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EcapError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("invalid value for {what}: {detail}")]
    InvalidValue { what: &'static str, detail: String },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("memory bank for class {class} is empty")]
    EmptyBank { class: usize },
    #[error("label has no populated class")]
    EmptyLabel,
    #[error("transformed sample has no populated pixels")]
    Degenerate,
    #[error("unknown class {class} (num_classes = {num_classes})")]
    UnknownClass { class: usize, num_classes: usize },
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn shape_err(
    op: &'static str,
    expected: impl std::fmt::Debug,
    actual: impl std::fmt::Debug,
) -> EcapError {
    EcapError::Shape {
        op,
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
    }
}
