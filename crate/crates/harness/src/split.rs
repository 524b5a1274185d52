//! Test carve-out, K-fold partition and minority oversampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TaskKind};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test: Vec<usize>,
    pub folds: Vec<Fold>,
    pub seed: u64,
    pub stratified: bool,
}

/// Stratum of each record: class for single-task classification, any-positive
/// for multi-task classification, a single stratum for regression.
pub fn strata(dataset: &Dataset) -> Vec<usize> {
    match (dataset.task, dataset.n_tasks()) {
        (TaskKind::Regression, _) => vec![0; dataset.len()],
        (TaskKind::Classification, 1) => dataset
            .records
            .iter()
            .map(|r| match r.labels[0] {
                Some(1.0) => 1,
                Some(_) => 0,
                None => 2,
            })
            .collect(),
        (TaskKind::Classification, _) => dataset
            .records
            .iter()
            .map(|r| usize::from(r.labels.contains(&Some(1.0))))
            .collect(),
    }
}

/// Splits `n` records with the given strata. Each stratum is shuffled and
/// dealt out so that class ratios carry into the test set and every fold.
pub fn make_split_from_strata(
    strata: &[usize],
    test_fraction: f64,
    k: usize,
    seed: u64,
    stratify: bool,
) -> Result<SplitPlan> {
    let n = strata.len();
    if k < 2 || n < 2 * k {
        return Err(HarnessError::TooSmall { size: n, folds: k });
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(HarnessError::Config(format!(
            "test fraction {test_fraction} must be in [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratify {
        let n_strata = strata.iter().max().map_or(0, |m| m + 1);
        let mut g = vec![Vec::new(); n_strata];
        for (i, &s) in strata.iter().enumerate() {
            g[s].push(i);
        }
        g
    } else {
        vec![(0..n).collect()]
    };
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n - n_test < 2 * k {
        return Err(HarnessError::TooSmall {
            size: n - n_test,
            folds: k,
        });
    }
    // largest-remainder allocation of test slots per stratum
    let mut quotas: Vec<(usize, f64)> = groups
        .iter()
        .map(|g| {
            let exact = g.len() as f64 * n_test as f64 / n as f64;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut short = n_test - quotas.iter().map(|q| q.0).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &i in &order {
        if short == 0 {
            break;
        }
        if quotas[i].0 < groups[i].len() {
            quotas[i].0 += 1;
            short -= 1;
        }
    }
    let mut test = Vec::with_capacity(n_test);
    // dealing order for the remainder: strata concatenated after shuffling,
    // then assigned round-robin so every fold sees each stratum evenly
    let mut rest = Vec::with_capacity(n - n_test);
    for (g, (quota, _)) in groups.into_iter().zip(&quotas) {
        let mut g = g;
        g.shuffle(&mut rng);
        test.extend_from_slice(&g[..*quota]);
        rest.extend_from_slice(&g[*quota..]);
    }
    let offset = rest.len() % k;
    let mut buckets = vec![Vec::new(); k];
    for (j, idx) in rest.into_iter().enumerate() {
        buckets[(j + offset) % k].push(idx);
    }
    test.sort_unstable();
    let folds = (0..k)
        .map(|f| {
            let mut validation = buckets[f].clone();
            validation.sort_unstable();
            let mut train: Vec<usize> = (0..k)
                .filter(|&o| o != f)
                .flat_map(|o| buckets[o].iter().copied())
                .collect();
            train.sort_unstable();
            Fold { train, validation }
        })
        .collect();
    Ok(SplitPlan {
        test,
        folds,
        seed,
        stratified: stratify,
    })
}

pub fn make_split(dataset: &Dataset, test_fraction: f64, k: usize, seed: u64, stratify: bool) -> Result<SplitPlan> {
    make_split_from_strata(&strata(dataset), test_fraction, k, seed, stratify)
}

/// Appends floor(majority / minority) − 1 extra copies of the minority
/// class, cycling through its members in order. Records without a label are
/// kept once.
pub fn oversample_minority(train: &[usize], labels: &[Option<f64>]) -> Result<Vec<usize>> {
    let pos: Vec<usize> = train.iter().copied().filter(|&i| labels[i] == Some(1.0)).collect();
    let neg: Vec<usize> = train.iter().copied().filter(|&i| labels[i] == Some(0.0)).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(HarnessError::OneClassOnly("training fold"));
    }
    let (major, minor) = if pos.len() >= neg.len() {
        (&pos, &neg)
    } else {
        (&neg, &pos)
    };
    let extra = major.len() / minor.len() - 1;
    let mut out = train.to_vec();
    for _ in 0..extra {
        out.extend_from_slice(minor);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_of_600() {
        let strata = vec![0; 600];
        let plan = make_split_from_strata(&strata, 1.0 / 6.0, 5, 1, false).unwrap();
        assert_eq!(plan.test.len(), 100);
        for f in &plan.folds {
            assert_eq!(f.validation.len(), 100);
            assert_eq!(f.train.len(), 400);
        }
    }

    #[test]
    fn stratified_ratio_in_test() {
        let strata: Vec<usize> = (0..600).map(|i| usize::from(i % 10 == 0)).collect();
        let plan = make_split_from_strata(&strata, 1.0 / 6.0, 5, 3, true).unwrap();
        let pos = plan.test.iter().filter(|&&i| strata[i] == 1).count();
        assert!((pos as i64 - 10).abs() <= 1, "{pos}");
        assert_eq!(make_split_from_strata(&strata, 1.0 / 6.0, 5, 3, true).unwrap(), plan);
    }

    #[test]
    fn oversampling_ratio() {
        let labels: Vec<Option<f64>> = (0..100).map(|i| Some(if i < 10 { 1.0 } else { 0.0 })).collect();
        let train: Vec<usize> = (0..100).collect();
        let out = oversample_minority(&train, &labels).unwrap();
        let pos = out.iter().filter(|&&i| labels[i] == Some(1.0)).count();
        assert_eq!(pos, 90);
        assert_eq!(out.len(), 180);
        let balanced: Vec<Option<f64>> = (0..10).map(|i| Some((i % 2) as f64)).collect();
        let idx: Vec<usize> = (0..10).collect();
        assert_eq!(oversample_minority(&idx, &balanced).unwrap(), idx);
        let one: Vec<Option<f64>> = vec![Some(1.0); 4];
        assert!(oversample_minority(&[0, 1, 2, 3], &one).is_err());
    }

    #[test]
    fn too_small() {
        assert!(make_split_from_strata(&[0; 9], 0.0, 5, 0, false).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn plan_invariants(n in 30usize..300, pos_rate in 0.05f64..0.5, seed in any::<u64>(), k in 2usize..6) {
            let strata: Vec<usize> = (0..n).map(|i| usize::from((i as f64 * pos_rate).fract() < pos_rate)).collect();
            let plan = make_split_from_strata(&strata, 1.0 / 6.0, k, seed, true).unwrap();
            let mut seen = vec![0u8; n];
            for &t in &plan.test { seen[t] += 1; }
            let mut val_seen = vec![0u8; n];
            for f in &plan.folds {
                let mut in_fold = vec![0u8; n];
                for &i in f.train.iter().chain(&f.validation) { in_fold[i] += 1; }
                for &t in &plan.test { prop_assert_eq!(in_fold[t], 0); }
                for &c in &in_fold { prop_assert!(c <= 1); }
                for &v in &f.validation { val_seen[v] += 1; }
            }
            for i in 0..n {
                // remainder is partitioned by the validation sets
                prop_assert_eq!(seen[i] + val_seen[i], 1);
            }
            // stratum proportions carried into the test set
            let total_pos = strata.iter().filter(|&&s| s == 1).count() as f64;
            let test_pos = plan.test.iter().filter(|&&i| strata[i] == 1).count() as f64;
            let expect = total_pos * plan.test.len() as f64 / n as f64;
            prop_assert!((test_pos - expect).abs() <= 1.0);
        }

        #[test]
        fn oversampling_never_leaks(n in 4usize..80, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<Option<f64>> = (0..n).map(|i| Some(if i % 3 == 0 { 1.0 } else { 0.0 })).collect();
            let mut train: Vec<usize> = (0..n).collect();
            train.shuffle(&mut rng);
            train.truncate(n / 2 + 2);
            if let Ok(out) = oversample_minority(&train, &labels) {
                for i in &out { prop_assert!(train.contains(i)); }
                prop_assert!(out.len() >= train.len());
            }
        }
    }
}
