//! Logical-implication consistency for question answering.
//!
//! Question-answer pairs are treated as propositions about an image. Pairs
//! related by an implication form a per-image graph of
//! `sufficient -> necessary` arrows; a model is inconsistent on an arrow when
//! it holds the sufficient proposition true and the necessary one false.
//!
//! * [`relations`]: propositions, relation kinds, the implication graph.
//! * [`metric`]: inconsistency count, consistency ratio, accuracy, flip
//!   baselines.
//! * [`loss`]: the consistency loss, its gradient, the joint objective.
//! * [`synth`]: a synthetic benchmark with exact relations.
//! * [`trainer`]: a logistic toy model and the lambda sweep.
//! * [`converter`]: binary question to declarative statement rules.

pub mod converter;
pub mod error;
pub mod io;
pub mod loss;
pub mod metric;
pub mod relations;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
