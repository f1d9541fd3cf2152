//! Knowledge-graph embedding toolkit: translation-family scorers trained with
//! a margin ranking loss, where negatives come either from uniform corruption
//! or from an adversarially trained softmax policy network, plus the standard
//! link-prediction and triplet-classification evaluation harnesses.

pub mod data;
pub mod error;
pub mod evaluator;
pub mod generator;
pub mod oracles;
pub mod scorer;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
