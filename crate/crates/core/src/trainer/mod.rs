//! Logistic toy model trained with cross-entropy plus the consistency loss
//! on mini-batches of related question pairs.

mod features;
pub mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{feature_len, Dropout, Featurizer};

use crate::error::{Error, Result};
use crate::loss::{clamp_prob, cons_loss, cons_loss_grad, LossConfig, PropPair, DEFAULT_EPSILON};
use crate::metric::{self, ConsistencyReport, Prediction, PredictionSet, NO, YES};
use crate::relations::{ImageId, ImplicationArrow, ImplicationGraph, PropId};
use crate::synth::{SyntheticDataset, World};

const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ToyModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: features.len(),
            });
        }
        Ok(self.bias
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Probability that the answer to the featurized query is "yes".
pub fn predict_prob(model: &ToyModel, features: &[f64]) -> Result<f64> {
    model.score(features).map(sigmoid)
}

/// Probability of the proposition `(query, answer)`.
pub fn proposition_prob(model: &ToyModel, features: &[f64], answer_yes: bool) -> Result<f64> {
    let p = predict_prob(model, features)?;
    Ok(if answer_yes { p } else { 1.0 - p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_pairs: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Feature dropout, frozen per dataset.
    pub dropout_rate: f64,
    /// Share of worlds held out for evaluation.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            learning_rate: 0.1,
            epochs: 50,
            batch_pairs: 16,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            dropout_rate: 0.3,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_config().validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_pairs == 0 {
            return bad("batch_pairs must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn featurizer(&self, dataset: &SyntheticDataset) -> Featurizer {
        Featurizer::new(dataset.n_attr()).with_dropout(self.dropout_rate, dataset.config.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub accuracy: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsHistory {
    pub epochs: Vec<EpochMetrics>,
    /// Held-out evaluation of the final model.
    pub final_report: ConsistencyReport,
}

/// Train / held-out partition by world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<ImageId>,
    pub heldout: BTreeSet<ImageId>,
}

impl Split {
    /// Seeded shuffle of the worlds; the last `fraction` (rounded, at least
    /// one, never all) are held out.
    pub fn by_world(dataset: &SyntheticDataset, fraction: f64, seed: u64) -> Result<Self> {
        let n = dataset.worlds.len();
        if n < 2 {
            return Err(Error::InvalidConfig(
                "need at least two worlds to split".into(),
            ));
        }
        let mut ids: Vec<ImageId> = dataset.worlds.iter().map(|e| e.world.id.clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SPLIT_STREAM);
        ids.shuffle(&mut rng);
        let held = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        let heldout = ids.split_off(n - held).into_iter().collect();
        Ok(Self {
            train: ids.into_iter().collect(),
            heldout,
        })
    }
}

/// Cached features and gold labels for both ends of one arrow.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowSample {
    pub sufficient: Vec<f64>,
    pub sufficient_yes: bool,
    pub necessary: Vec<f64>,
    pub necessary_yes: bool,
}

/// Visits `0..len` in a shuffled order, chunked into batches of
/// `batch_pairs`; the final short batch is kept.
pub fn shuffled_batches(
    len: usize,
    batch_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if len == 0 {
        return Err(Error::EmptyGraph);
    }
    if batch_pairs == 0 {
        return Err(Error::InvalidConfig("batch_pairs must be positive".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_pairs).map(<[usize]>::to_vec).collect())
}

/// One epoch of paired mini-batches over every arrow of the dataset.
pub fn sample_batches(
    dataset: &SyntheticDataset,
    batch_pairs: usize,
    seed: u64,
) -> Result<Vec<Vec<(ImplicationArrow, &World)>>> {
    let arrows: Vec<ImplicationArrow> = dataset.graph()?.arrows().collect();
    let index = dataset.index();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM);
    Ok(shuffled_batches(arrows.len(), batch_pairs, &mut rng)?
        .into_iter()
        .map(|b| {
            b.into_iter()
                .map(|i| {
                    let a = arrows[i].clone();
                    let w = index.worlds[&a.image_id];
                    (a, w)
                })
                .collect()
        })
        .collect())
}

/// Loss of one batch and its gradient with respect to `(weights, bias)`.
///
/// `mean over 2B propositions of -ln(pi) + lambda * mean over B arrows of
/// cons_loss(pi_sufficient, pi_necessary)`, with every `pi` clamped to
/// `[eps, 1 - eps]`.
pub fn batch_loss_and_grad(
    model: &ToyModel,
    batch: &[&ArrowSample],
    config: &LossConfig,
) -> Result<(f64, Vec<f64>, f64)> {
    let eps = config.epsilon;
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.dim()];
    let mut gb = 0.0;

    // d(clamped pi)/dz for pi = sigmoid(z) or 1 - sigmoid(z)
    let dpi_dz = |p_yes: f64, yes: bool, pi: f64| {
        if pi <= eps || pi >= 1.0 - eps {
            0.0
        } else {
            let d = p_yes * (1.0 - p_yes);
            if yes {
                d
            } else {
                -d
            }
        }
    };

    for s in batch {
        let p_s = predict_prob(model, &s.sufficient)?;
        let p_n = predict_prob(model, &s.necessary)?;
        let raw_s = if s.sufficient_yes { p_s } else { 1.0 - p_s };
        let raw_n = if s.necessary_yes { p_n } else { 1.0 - p_n };
        let (pi_s, pi_n) = (clamp_prob(raw_s, eps), clamp_prob(raw_n, eps));

        loss += -(pi_s.ln() + pi_n.ln()) / (2.0 * b);
        let mut dl_dpi_s = -1.0 / (2.0 * b * pi_s);
        let mut dl_dpi_n = -1.0 / (2.0 * b * pi_n);

        if config.lambda != 0.0 {
            let pair = PropPair::new(pi_s, pi_n);
            loss += config.lambda * cons_loss(pair, config) / b;
            let (g1, g2) = cons_loss_grad(pair, config);
            dl_dpi_s += config.lambda * g1 / b;
            dl_dpi_n += config.lambda * g2 / b;
        }

        let dz_s = dl_dpi_s * dpi_dz(p_s, s.sufficient_yes, raw_s);
        let dz_n = dl_dpi_n * dpi_dz(p_n, s.necessary_yes, raw_n);
        for ((g, xs), xn) in gw.iter_mut().zip(&s.sufficient).zip(&s.necessary) {
            *g += dz_s * xs + dz_n * xn;
        }
        gb += dz_s + dz_n;
    }
    Ok((loss, gw, gb))
}

/// Features of every query in the dataset, keyed by `(world, query)`.
pub fn feature_table(
    dataset: &SyntheticDataset,
    featurizer: &Featurizer,
) -> BTreeMap<(ImageId, PropId), Vec<f64>> {
    let mut out = BTreeMap::new();
    for e in &dataset.worlds {
        for q in &e.queries {
            out.insert(
                (e.world.id.clone(), q.query.id.clone()),
                featurizer.featurize(&e.world, &q.query),
            );
        }
    }
    out
}

pub fn arrow_samples(
    dataset: &SyntheticDataset,
    graph: &ImplicationGraph,
    features: &BTreeMap<(ImageId, PropId), Vec<f64>>,
) -> Vec<ArrowSample> {
    let index = dataset.index();
    graph
        .arrows()
        .map(|a| {
            let key_s = (a.image_id.clone(), a.sufficient.clone());
            let key_n = (a.image_id.clone(), a.necessary.clone());
            ArrowSample {
                sufficient: features[&key_s].clone(),
                sufficient_yes: index.queries[&key_s].gold,
                necessary: features[&key_n].clone(),
                necessary_yes: index.queries[&key_n].gold,
            }
        })
        .collect()
}

/// Committed answers for every query on `images`.
pub fn predict(
    model: &ToyModel,
    dataset: &SyntheticDataset,
    features: &BTreeMap<(ImageId, PropId), Vec<f64>>,
    images: &BTreeSet<ImageId>,
) -> Result<PredictionSet> {
    let mut out = PredictionSet::new();
    for e in dataset
        .worlds
        .iter()
        .filter(|e| images.contains(&e.world.id))
    {
        for q in &e.queries {
            let key = (e.world.id.clone(), q.query.id.clone());
            let p = predict_prob(model, &features[&key])?;
            // Ties go to "yes".
            let (answer, prob) = if p >= 0.5 { (YES, p) } else { (NO, 1.0 - p) };
            out.insert(
                key.0,
                key.1,
                Prediction {
                    predicted_answer: answer.to_owned(),
                    probability: prob,
                },
            )?;
        }
    }
    Ok(out)
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub model: ToyModel,
    pub history: MetricsHistory,
    pub split: Split,
    pub heldout_predictions: PredictionSet,
}

pub fn train(
    dataset: &SyntheticDataset,
    config: &TrainConfig,
) -> Result<(ToyModel, MetricsHistory)> {
    train_run(dataset, config).map(|r| (r.model, r.history))
}

pub fn train_run(dataset: &SyntheticDataset, config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let loss_cfg = config.loss_config();
    let split = Split::by_world(dataset, config.holdout_fraction, config.seed)?;
    let graph = dataset.graph()?;
    let props = dataset.propositions();
    let features = feature_table(dataset, &config.featurizer(dataset));

    let train_samples = arrow_samples(dataset, &graph.restrict(&split.train), &features);
    let eval_graph = graph.restrict(&split.heldout);
    let eval_props = props.restrict(&split.heldout);

    let mut model = ToyModel::zeros(feature_len(dataset.n_attr()));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = shuffled_batches(train_samples.len(), config.batch_pairs, &mut rng)?;
        let mut total = 0.0;
        for idx in &batches {
            let batch: Vec<&ArrowSample> = idx.iter().map(|&i| &train_samples[i]).collect();
            let (loss, gw, gb) = batch_loss_and_grad(&model, &batch, &loss_cfg)?;
            total += loss;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            model.bias -= config.learning_rate * gb;
        }
        let preds = predict(&model, dataset, &features, &split.heldout)?;
        let report = metric::report(&eval_graph, &eval_props, &preds)?;
        epochs.push(EpochMetrics {
            epoch,
            train_loss: total / batches.len() as f64,
            accuracy: report.accuracy,
            consistency: report.consistency,
        });
    }

    let heldout_predictions = predict(&model, dataset, &features, &split.heldout)?;
    let final_report = metric::report(&eval_graph, &eval_props, &heldout_predictions)?;
    Ok(TrainRun {
        model,
        history: MetricsHistory {
            epochs,
            final_report,
        },
        split,
        heldout_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GenerateConfig};

    fn small() -> SyntheticDataset {
        generate(&GenerateConfig {
            n_worlds: 12,
            ..GenerateConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn sigmoid_and_complement() {
        let m = ToyModel::zeros(4);
        assert_eq!(predict_prob(&m, &[1.0, -2.0, 0.5, 3.0]).unwrap(), 0.5);
        let big = ToyModel {
            weights: vec![0.0; 4],
            bias: 40.0,
        };
        assert!(predict_prob(&big, &[0.0; 4]).unwrap() > 1.0 - 1e-12);
        let m = ToyModel {
            weights: vec![0.3, -1.1, 2.0, 0.0],
            bias: -0.2,
        };
        let x = [1.0, 0.5, -1.0, 4.0];
        let yes = proposition_prob(&m, &x, true).unwrap();
        let no = proposition_prob(&m, &x, false).unwrap();
        assert!((yes + no - 1.0).abs() < 1e-15);
        assert!(matches!(
            predict_prob(&m, &[1.0]),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 1
            })
        ));
    }

    #[test]
    fn batch_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = shuffled_batches(33, 16, &mut rng).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![16, 16, 1]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..33).collect::<Vec<_>>());
        assert!(matches!(
            shuffled_batches(0, 16, &mut rng),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn dataset_batches_are_a_seeded_permutation() {
        let ds = small();
        let a = sample_batches(&ds, 16, 5).unwrap();
        let b = sample_batches(&ds, 16, 5).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<ImplicationArrow> = a
            .iter()
            .flatten()
            .map(|(arr, w)| {
                assert_eq!(arr.image_id, w.id);
                arr.clone()
            })
            .collect();
        let n = seen.len();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), n);
        assert_eq!(n, ds.graph().unwrap().len());
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let ds = small();
        let s = Split::by_world(&ds, 0.2, 3).unwrap();
        assert_eq!(s, Split::by_world(&ds, 0.2, 3).unwrap());
        assert_eq!(s.heldout.len(), 2);
        assert_eq!(s.train.len(), 10);
        assert!(s.train.is_disjoint(&s.heldout));
    }

    #[test]
    fn training_is_deterministic_and_finite() {
        let ds = small();
        let cfg = TrainConfig {
            lambda: 0.5,
            epochs: 5,
            seed: 4,
            ..TrainConfig::default()
        };
        let (m1, h1) = train(&ds, &cfg).unwrap();
        let (m2, h2) = train(&ds, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
        assert_eq!(h1.epochs.len(), 5);
        assert!(h1.epochs.iter().all(|e| e.train_loss.is_finite()));
    }

    #[test]
    fn config_validation() {
        let ds = small();
        for cfg in [
            TrainConfig {
                lambda: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_pairs: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(train(&ds, &cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
