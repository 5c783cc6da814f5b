//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("refinement exhausted: {0}")]
    RefinementExhausted(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("comparison undecided at available precision: {0}")]
    UndecidedComparison(String),
    #[error("block {0} has zero norm")]
    DegenerateBlock(usize),
    #[error("record is degenerate: {0}")]
    DegenerateRecord(String),
    #[error("coordinate {0} is zero")]
    ZeroCoordinate(usize),
    #[error("enumeration box too large: {0}")]
    BoxTooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
