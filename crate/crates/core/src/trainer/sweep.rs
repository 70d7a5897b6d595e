//! Replicated training over a grid of consistency weights.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::synth::SyntheticDataset;

pub const MIN_SEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub lambda: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub consistency_mean: f64,
    pub consistency_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// One row per `(lambda, seed)`, lambdas in input order, seeds within.
    pub rows: Vec<SweepRow>,
    /// One row per lambda, in input order.
    pub summary: Vec<SweepSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Trains one model per `(lambda, seed)` and reports held-out accuracy and
/// consistency. Replicates run in parallel; results are deterministic.
pub fn lambda_sweep(
    dataset: &SyntheticDataset,
    lambdas: &[f64],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<SweepTable> {
    if lambdas.len() < 2 {
        return Err(Error::InvalidConfig(
            "a sweep needs at least two lambda values".into(),
        ));
    }
    if seeds.len() < MIN_SEEDS {
        return Err(Error::InvalidConfig(format!(
            "a sweep needs at least {MIN_SEEDS} seeds per lambda"
        )));
    }
    let jobs: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(lambda, seed)| {
            let cfg = TrainConfig {
                lambda,
                seed,
                ..base.clone()
            };
            let (_, history) = train(dataset, &cfg)?;
            Ok(SweepRow {
                lambda,
                seed,
                accuracy: history.final_report.accuracy,
                consistency: history.final_report.consistency,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = rows
        .chunks(seeds.len())
        .map(|chunk| {
            let acc: Vec<f64> = chunk.iter().map(|r| r.accuracy).collect();
            let cons: Vec<f64> = chunk.iter().map(|r| r.consistency).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let (consistency_mean, consistency_std) = mean_std(&cons);
            SweepSummary {
                lambda: chunk[0].lambda,
                runs: chunk.len(),
                accuracy_mean,
                accuracy_std,
                consistency_mean,
                consistency_std,
            }
        })
        .collect();
    Ok(SweepTable { rows, summary })
}

impl SweepTable {
    /// Per-run rows with header `lambda,seed,accuracy,consistency`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.summary {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_table(&self) -> String {
        let mut s = format!(
            "{:>8}  {:>4}  {:>16}  {:>16}\n",
            "lambda", "runs", "accuracy", "consistency"
        );
        for r in &self.summary {
            s.push_str(&format!(
                "{:>8}  {:>4}  {:>7.2}% ± {:>5.2}  {:>7.2}% ± {:>5.2}\n",
                r.lambda,
                r.runs,
                100.0 * r.accuracy_mean,
                100.0 * r.accuracy_std,
                100.0 * r.consistency_mean,
                100.0 * r.consistency_std
            ));
        }
        s
    }
}

/// Average ranks, 1-based; ties share the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // scipy.stats.spearmanr([1,2,3,4,5], [5,6,7,8,7]) = 0.8207826816681233
        assert!(
            (spearman(&[1., 2., 3., 4., 5.], &[5., 6., 7., 8., 7.]) - 0.820_782_681_668_123_3)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.290_994_448_735_805_6).abs() < 1e-12);
    }
}
