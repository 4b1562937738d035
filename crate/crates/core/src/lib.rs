//! Placeholder-based prototype learning for zero-shot recognition.
//!
//! The crate works on precomputed visual embeddings and class-level
//! attribute vectors. Training runs in two stages:
//!
//! 1. [`sof`] learns a linear feature refiner supervised by class
//!    attributes and freezes it.
//! 2. [`prototype`] learns a semantic→visual mapping from episodes in which
//!    [`hallucination`] blends seen classes into placeholder classes.
//!
//! [`eval`] scores ZSL and GZSL recognition (with calibrated stacking),
//! [`dataset`] handles file formats, episode sampling and a synthetic
//! benchmark, and [`cli`] wires everything into the `pzsl` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod hallucination;
pub mod numerics;
pub mod prototype;
pub mod sof;

pub use error::{Error, Result};
