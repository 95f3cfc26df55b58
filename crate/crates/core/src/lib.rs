//! Two-stage statistical reconstruction of two-phase microstructures with
//! arbitrarily shaped compact inclusions.
//!
//! Stage one ([`synthesis`]) builds a random-shape surrogate for every target
//! inclusion with identical area and interface. Stage two ([`annealing`])
//! arranges the surrogates by simulated annealing with whole-cluster moves,
//! driven by the multi-scale entropic descriptors in [`descriptors`].

pub mod annealing;
pub mod descriptors;
pub mod error;
pub mod grid;
pub mod pbm;
pub mod pipeline;
pub mod rng;
pub mod synthesis;

pub use error::{Result, TsrError};
pub use grid::{BinaryImage, ClusterShape, Pixel};
