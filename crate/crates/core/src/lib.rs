//! Continual-learning experiments on procedurally rendered glyphs.
//!
//! A small CNN is trained to predict the font of a glyph over a stream of
//! experiences that each contain a disjoint set of characters, with a
//! reservoir-sampled replay memory. Evaluation separates in-distribution
//! accuracy from accuracy on (character, font) combinations never shown in
//! training, and probes on frozen representations locate where the gap opens.

pub mod continual;
pub mod error;
pub mod glyphgen;
pub mod hash;
pub mod ndnet;
pub mod probe;
pub mod replay;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
