//! Evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Rank-based ROC AUC (Mann–Whitney U) with average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(HarnessError::OneClassOnly("roc_auc"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Unweighted mean AUC over tasks that have both classes among their
/// present labels. `scores[i][t]`, `labels[i][t]`.
pub fn roc_auc_multitask(scores: &[Vec<f64>], labels: &[Vec<Option<f64>>]) -> Result<f64> {
    let n_tasks = labels.first().map_or(0, Vec::len);
    let mut aucs = Vec::new();
    for t in 0..n_tasks {
        let (s, l): (Vec<f64>, Vec<bool>) = scores
            .iter()
            .zip(labels)
            .filter_map(|(s, l)| l[t].map(|y| (s[t], y == 1.0)))
            .unzip();
        if let Ok(a) = roc_auc(&s, &l) {
            aucs.push(a);
        }
    }
    if aucs.is_empty() {
        return Err(HarnessError::OneClassOnly("every task"));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    assert!(
        !pred.is_empty() && pred.len() == target.len(),
        "rmse needs equal non-empty inputs"
    );
    let mse = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    mse.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auc,
    Rmse,
}

impl MetricKind {
    /// Whether larger values are better.
    pub fn higher_is_better(self) -> bool {
        self == MetricKind::Auc
    }
}

/// Per-fold results of one fine-tuning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub kind: MetricKind,
    pub folds: Vec<usize>,
    pub validation: Vec<f64>,
    pub test: Vec<f64>,
    pub epochs_to_best: Vec<usize>,
    pub epochs_trained: Vec<usize>,
    pub best_validation_loss: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl Metrics {
    pub fn mean_validation(&self) -> f64 {
        mean(&self.validation)
    }

    pub fn mean_test(&self) -> f64 {
        mean(&self.test)
    }

    pub fn mean_epochs_to_best(&self) -> f64 {
        self.epochs_to_best.iter().sum::<usize>() as f64 / self.epochs_to_best.len() as f64
    }
}
