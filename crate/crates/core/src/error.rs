use std::path::PathBuf;

use crate::relations::{ImageId, PropId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid proposition {image}/{id}: {reason}")]
    InvalidProposition {
        image: ImageId,
        id: PropId,
        reason: &'static str,
    },

    #[error("duplicate proposition {image}/{id}")]
    DuplicateProposition { image: ImageId, id: PropId },

    #[error("self-relation on proposition {image}/{id}")]
    SelfRelation { image: ImageId, id: PropId },

    #[error("relation {image}: {prop_i} / {prop_j} cites unknown proposition {missing}")]
    DanglingReference {
        image: ImageId,
        prop_i: PropId,
        prop_j: PropId,
        missing: PropId,
    },

    #[error("relation {prop_i} / {prop_j} is filed under image {record_image} but the proposition belongs to {prop_image}")]
    CrossImage {
        record_image: ImageId,
        prop_image: ImageId,
        prop_i: PropId,
        prop_j: PropId,
    },

    #[error("contradictory annotations for {image}: {prop_i} / {prop_j}")]
    Conflict {
        image: ImageId,
        prop_i: PropId,
        prop_j: PropId,
    },

    #[error("no prediction for proposition {image}/{id}")]
    MissingPrediction { image: ImageId, id: PropId },

    #[error("prediction for {image}/{id} has probability {probability} outside [0, 1]")]
    InvalidProbability {
        image: ImageId,
        id: PropId,
        probability: f64,
    },

    #[error("prediction for {image}/{id} references no known proposition")]
    UnknownPrediction { image: ImageId, id: PropId },

    #[error("no propositions to score")]
    NoPropositions,

    #[error("implication graph has no arrows")]
    EmptyGraph,

    #[error("answer {answer:?} of {image}/{id} is not binary (yes/no)")]
    NonBinaryAnswer {
        image: ImageId,
        id: PropId,
        answer: String,
    },

    #[error("feature vector has length {actual}, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported question {question:?}: {reason}")]
    UnsupportedQuestion { question: String, reason: String },

    #[error("generation infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("unknown relation kind {0:?}")]
    UnknownKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
