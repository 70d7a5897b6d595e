//! Truth evaluation of propositions under model predictions, inconsistency
//! counting, the consistency ratio, accuracy, and flip-correction baselines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::relations::{
    ImageId, ImplicationArrow, ImplicationGraph, PropId, PropKey, Proposition, PropositionSet,
};

pub const YES: &str = "yes";
pub const NO: &str = "no";

/// Case-folds and trims an answer label for comparison.
pub fn normalize_answer(answer: &str) -> String {
    answer.trim().to_lowercase()
}

pub fn answers_match(a: &str, b: &str) -> bool {
    normalize_answer(a) == normalize_answer(b)
}

/// A committed model answer and the probability the model assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted_answer: String,
    pub probability: f64,
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: ImageId,
    pub prop_id: PropId,
    pub predicted_answer: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    entries: BTreeMap<PropKey, Prediction>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image: ImageId, id: PropId, prediction: Prediction) -> Result<()> {
        if !(0.0..=1.0).contains(&prediction.probability) {
            return Err(Error::InvalidProbability {
                image,
                id,
                probability: prediction.probability,
            });
        }
        self.entries.insert((image, id), prediction);
        Ok(())
    }

    pub fn from_records(records: impl IntoIterator<Item = PredictionRecord>) -> Result<Self> {
        let mut set = Self::new();
        for r in records {
            set.insert(
                r.image_id,
                r.prop_id,
                Prediction {
                    predicted_answer: r.predicted_answer,
                    probability: r.probability,
                },
            )?;
        }
        Ok(set)
    }

    pub fn to_records(&self) -> Vec<PredictionRecord> {
        self.entries
            .iter()
            .map(|((image_id, prop_id), p)| PredictionRecord {
                image_id: image_id.clone(),
                prop_id: prop_id.clone(),
                predicted_answer: p.predicted_answer.clone(),
                probability: p.probability,
            })
            .collect()
    }

    pub fn get(&self, image: &ImageId, id: &PropId) -> Option<&Prediction> {
        self.entries.get(&(image.clone(), id.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PropKey, &Prediction)> {
        self.entries.iter()
    }

    /// Fails if any prediction names a proposition missing from `props`.
    pub fn check_against(&self, props: &PropositionSet) -> Result<()> {
        match self
            .entries
            .keys()
            .find(|(img, id)| !props.contains(img, id))
        {
            Some((image, id)) => Err(Error::UnknownPrediction {
                image: image.clone(),
                id: id.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// `e_p`: whether the model's answer matches the proposition's answer.
pub fn evaluate_truth(prediction: &Prediction, proposition: &Proposition) -> bool {
    answers_match(&prediction.predicted_answer, &proposition.answer)
}

fn truth_of(predictions: &PredictionSet, proposition: &Proposition) -> Result<bool> {
    predictions
        .get(&proposition.image_id, &proposition.id)
        .map(|p| evaluate_truth(p, proposition))
        .ok_or_else(|| Error::MissingPrediction {
            image: proposition.image_id.clone(),
            id: proposition.id.clone(),
        })
}

fn lookup<'a>(props: &'a PropositionSet, image: &ImageId, id: &PropId) -> Result<&'a Proposition> {
    props
        .get(image, id)
        .ok_or_else(|| Error::MissingPrediction {
            image: image.clone(),
            id: id.clone(),
        })
}

/// Arrows whose sufficient proposition evaluates true and whose necessary
/// proposition evaluates false, in graph order.
pub fn inconsistent_arrows(
    graph: &ImplicationGraph,
    props: &PropositionSet,
    predictions: &PredictionSet,
) -> Result<Vec<ImplicationArrow>> {
    let mut out = Vec::new();
    for arrow in graph.arrows() {
        let suff = lookup(props, &arrow.image_id, &arrow.sufficient)?;
        let nec = lookup(props, &arrow.image_id, &arrow.necessary)?;
        // Both endpoints must have predictions even when the first settles it.
        let (s, n) = (truth_of(predictions, suff)?, truth_of(predictions, nec)?);
        if s && !n {
            out.push(arrow);
        }
    }
    Ok(out)
}

pub fn count_inconsistencies(
    graph: &ImplicationGraph,
    props: &PropositionSet,
    predictions: &PredictionSet,
) -> Result<usize> {
    inconsistent_arrows(graph, props, predictions).map(|v| v.len())
}

pub fn consistency_ratio(
    graph: &ImplicationGraph,
    props: &PropositionSet,
    predictions: &PredictionSet,
) -> Result<f64> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let bad = count_inconsistencies(graph, props, predictions)?;
    Ok(1.0 - bad as f64 / graph.len() as f64)
}

pub fn accuracy(predictions: &PredictionSet, props: &PropositionSet) -> Result<f64> {
    if props.is_empty() {
        return Err(Error::NoPropositions);
    }
    let mut correct = 0usize;
    for p in props.iter() {
        if truth_of(predictions, p)? {
            correct += 1;
        }
    }
    Ok(correct as f64 / props.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InconsistentPair {
    pub sufficient: PropId,
    pub necessary: PropId,
    pub image_id: ImageId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub total_arrows: usize,
    pub inconsistencies: usize,
    pub consistency: f64,
    pub accuracy: f64,
    pub inconsistent_pairs: Vec<InconsistentPair>,
}

pub fn report(
    graph: &ImplicationGraph,
    props: &PropositionSet,
    predictions: &PredictionSet,
) -> Result<ConsistencyReport> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let bad = inconsistent_arrows(graph, props, predictions)?;
    let total = graph.len();
    Ok(ConsistencyReport {
        total_arrows: total,
        inconsistencies: bad.len(),
        consistency: 1.0 - bad.len() as f64 / total as f64,
        accuracy: accuracy(predictions, props)?,
        inconsistent_pairs: bad
            .into_iter()
            .map(|a| InconsistentPair {
                sufficient: a.sufficient,
                necessary: a.necessary,
                image_id: a.image_id,
            })
            .collect(),
    })
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18} {:>10}", "arrows |G(T)|", self.total_arrows)?;
        writeln!(f, "{:<18} {:>10}", "inconsistencies", self.inconsistencies)?;
        writeln!(
            f,
            "{:<18} {:>9.2}%",
            "consistency",
            100.0 * self.consistency
        )?;
        writeln!(f, "{:<18} {:>9.2}%", "accuracy", 100.0 * self.accuracy)?;
        if !self.inconsistent_pairs.is_empty() {
            writeln!(f)?;
            writeln!(
                f,
                "{:<16} {:<16} {:<16}",
                "image", "sufficient", "necessary"
            )?;
            for p in &self.inconsistent_pairs {
                writeln!(
                    f,
                    "{:<16} {:<16} {:<16}",
                    p.image_id, p.sufficient, p.necessary
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipStrategy {
    /// Flip either endpoint with equal probability.
    Random,
    /// Flip the sufficient proposition's answer.
    First,
    /// Flip the necessary proposition's answer.
    Second,
}

impl std::str::FromStr for FlipStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "first" => Ok(Self::First),
            "second" => Ok(Self::Second),
            other => Err(Error::InvalidConfig(format!(
                "unknown flip strategy {other:?}"
            ))),
        }
    }
}

/// Coin for `arrow` under `seed`, independent of visiting order.
fn arrow_coin(seed: u64, arrow: &ImplicationArrow) -> bool {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [&arrow.image_id.0, &arrow.sufficient.0, &arrow.necessary.0] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes)).gen_bool(0.5)
}

fn negate(answer: &str) -> Option<&'static str> {
    match normalize_answer(answer).as_str() {
        YES => Some(NO),
        NO => Some(YES),
        _ => None,
    }
}

/// Post-hoc correction: negates one answer of every inconsistent arrow.
///
/// Flip targets are collected against the input predictions first and each
/// target is flipped once, however many inconsistent arrows it sits in.
pub fn flip_correction(
    graph: &ImplicationGraph,
    props: &PropositionSet,
    predictions: &PredictionSet,
    strategy: FlipStrategy,
    seed: u64,
) -> Result<PredictionSet> {
    let mut targets: BTreeSet<PropKey> = BTreeSet::new();
    for arrow in inconsistent_arrows(graph, props, predictions)? {
        let first = match strategy {
            FlipStrategy::First => true,
            FlipStrategy::Second => false,
            FlipStrategy::Random => arrow_coin(seed, &arrow),
        };
        let id = if first {
            arrow.sufficient
        } else {
            arrow.necessary
        };
        targets.insert((arrow.image_id, id));
    }

    let mut out = predictions.clone();
    for key in targets {
        let entry = out
            .entries
            .get_mut(&key)
            .expect("inconsistent arrows only cite predicted propositions");
        let flipped = negate(&entry.predicted_answer).ok_or_else(|| Error::NonBinaryAnswer {
            image: key.0.clone(),
            id: key.1.clone(),
            answer: entry.predicted_answer.clone(),
        })?;
        entry.predicted_answer = flipped.to_owned();
        entry.probability = 1.0 - entry.probability;
    }
    Ok(out)
}
