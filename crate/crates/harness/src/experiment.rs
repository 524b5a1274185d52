//! Pre-train on descriptor labels, fine-tune with segment freezing, and
//! sweep the number of fine-tuned segments.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weakchem_chem::descriptors::{compute_descriptors, fit_normalizer, selection_version, NormStats};
use weakchem_chem::textenc::Vocab;
use weakchem_core::models::{build_chemception, build_smiles2vec, ChemceptionSpec, Smiles2VecSpec, SPEC_KEY};
use weakchem_core::tensornet::{HeadKind, HeadSpec, TrainConfig};
use weakchem_core::{Model, Scalar};

use crate::dataset::{Corpus, Dataset, Reject, TaskKind};
use crate::error::{HarnessError, Result};
use crate::features::{Encoded, FeatureSpec, Featurizer, Modality};
use crate::metrics::{rmse, roc_auc_multitask, MetricKind, Metrics};
use crate::split::{make_split, oversample_minority, SplitPlan};
use crate::train::{fit, predict, EpochLog, LossKind, TrainData};

/// Model metadata keys.
pub const FEATURES_KEY: &str = "features";
pub const DESCRIPTORS_KEY: &str = "descriptors";
pub const NORM_KEY: &str = "norm_stats";

/// Descriptors used as pre-training labels unless configured otherwise.
pub const DEFAULT_DESCRIPTORS: [&str; 10] = [
    "molecular_weight",
    "heavy_atom_count",
    "heteroatom_count",
    "total_h_count",
    "ring_count",
    "aromatic_atom_count",
    "rotatable_bond_count",
    "hbd",
    "hba",
    "fraction_csp3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArchConfig {
    Chemception { depth: usize, filters: usize },
    Smiles2vec { units: usize },
}

/// Mixes a base seed with a purpose tag and index (splitmix64 finalizer).
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_BODY: u64 = 1;
const TAG_HEAD: u64 = 2;
const TAG_TRAIN: u64 = 3;

/// Builds an untrained model for the given encoder settings and head.
pub fn build_model<S: Scalar>(arch: ArchConfig, features: &FeatureSpec, head: HeadSpec, seed: u64) -> Result<Model<S>> {
    let featurizer = Featurizer::new(features.clone())?;
    let shape = featurizer.sample_shape();
    let mut model = match (arch, features.modality) {
        (ArchConfig::Chemception { depth, filters }, Modality::ImageStd | Modality::ImageEngd) => build_chemception(
            &ChemceptionSpec {
                depth,
                filters,
                input: [shape[0], shape[1], shape[2]],
                head,
            },
            seed,
        )?,
        (ArchConfig::Smiles2vec { units }, Modality::Text) => build_smiles2vec(
            &Smiles2VecSpec {
                vocab: shape[1],
                length: shape[0],
                units,
                head,
            },
            seed,
        )?,
        (arch, modality) => {
            return Err(HarnessError::ModalityMismatch {
                model: format!("{arch:?}"),
                requested: modality.name().into(),
            })
        }
    };
    model.meta.insert(
        FEATURES_KEY.into(),
        serde_json::to_value(features).expect("feature spec serializes"),
    );
    model.meta.insert(
        "architecture".into(),
        serde_json::to_value(arch).expect("arch serializes"),
    );
    Ok(model)
}

fn meta<T: for<'de> Deserialize<'de>, S>(model: &Model<S>, key: &str) -> Result<T> {
    let v = model
        .meta
        .get(key)
        .ok_or_else(|| HarnessError::Metadata(format!("model has no {key:?} entry")))?;
    serde_json::from_value(v.clone()).map_err(|e| HarnessError::Metadata(format!("{key}: {e}")))
}

pub fn model_features<S>(model: &Model<S>) -> Result<FeatureSpec> {
    meta(model, FEATURES_KEY)
}

pub fn model_arch<S>(model: &Model<S>) -> Result<ArchConfig> {
    meta(model, "architecture")
}

/// Same architecture and encoder as `model` with fresh random weights.
pub fn fresh_like<S: Scalar>(model: &Model<S>, seed: u64) -> Result<Model<S>> {
    let features = model_features(model)?;
    let arch = model_arch(model)?;
    let head_width = model.output_width();
    if !model.meta.contains_key(SPEC_KEY) {
        return Err(HarnessError::Metadata("model has no builder spec".into()));
    }
    build_model(
        arch,
        &features,
        HeadSpec {
            n_outputs: head_width,
            kind: HeadKind::Linear,
        },
        seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub features: FeatureSpec,
    pub arch: ArchConfig,
    pub descriptors: Vec<String>,
    /// Fraction of the corpus held out for early stopping.
    pub val_fraction: f64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub corpus_size: usize,
    pub rejected: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_trained: usize,
    pub history: Vec<EpochLog>,
}

pub struct Pretrained<S> {
    pub model: Model<S>,
    pub norm: NormStats,
    pub rejects: Vec<Reject>,
    pub report: PretrainReport,
}

fn encode_reject(row: usize, id: String, smiles: &str, e: &weakchem_chem::ChemError) -> Reject {
    Reject {
        row,
        id,
        smiles: smiles.to_string(),
        reason: e.kind().to_string(),
        detail: e.to_string(),
    }
}

pub fn pretrain<S: Scalar>(corpus: &Corpus, cfg: &PretrainConfig) -> Result<Pretrained<S>> {
    cfg.train.validate()?;
    if cfg.descriptors.is_empty() {
        return Err(HarnessError::Config("at least one descriptor label is required".into()));
    }
    let mut features = cfg.features.clone();
    if features.modality == Modality::Text && features.vocab.is_none() {
        let texts: Vec<&str> = corpus.entries.iter().map(|e| e.canonical.as_str()).collect();
        features.vocab = Some(Vocab::build(&texts)?.to_text());
    }
    let featurizer = Featurizer::new(features.clone())?;
    let mut rejects = corpus.rejects.clone();
    let mut items = Vec::new();
    let mut raw = Vec::new();
    for (i, e) in corpus.entries.iter().enumerate() {
        match featurizer.encode(&e.mol, &e.canonical) {
            Ok(enc) => {
                items.push(enc);
                raw.push(compute_descriptors(&e.mol).select(&cfg.descriptors)?);
            }
            Err(err) => rejects.push(encode_reject(i + 1, format!("entry{}", i + 1), &e.smiles, &err)),
        }
    }
    let n = items.len();
    let n_val = ((n as f64) * cfg.val_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(HarnessError::TooSmall { size: n, folds: 1 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.train.seed));
    let (val, train) = order.split_at(n_val);
    let version = selection_version(&cfg.descriptors);
    let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| raw[i].values.clone()).collect();
    let norm = fit_normalizer(&train_rows, &version)?;
    let targets = raw
        .iter()
        .map(|v| norm.apply(v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let masks = vec![vec![true; cfg.descriptors.len()]; n];
    let head = HeadSpec {
        n_outputs: cfg.descriptors.len(),
        kind: HeadKind::MultitaskLinear,
    };
    let model = build_model::<S>(cfg.arch, &features, head, derive_seed(cfg.train.seed, TAG_BODY, 0))?;
    let data = TrainData {
        featurizer: &featurizer,
        items: &items,
        targets: &targets,
        masks: &masks,
    };
    let augment = features.modality != Modality::Text;
    let out = fit(model, &data, train, val, LossKind::Mse, &cfg.train, augment)?;
    let mut model = out.model;
    model.meta.insert(
        DESCRIPTORS_KEY.into(),
        serde_json::json!({ "names": cfg.descriptors, "registry_version": version }),
    );
    model
        .meta
        .insert(NORM_KEY.into(), serde_json::to_value(&norm).expect("stats serialize"));
    Ok(Pretrained {
        model,
        norm,
        report: PretrainReport {
            corpus_size: corpus.entries.len() + corpus.rejects.len(),
            rejected: rejects.len(),
            n_train: train.len(),
            n_val: val.len(),
            initial_val_loss: out.initial_val_loss,
            best_val_loss: out.best_val_loss,
            best_epoch: out.best_epoch,
            epochs_trained: out.epochs_trained,
            history: out.history,
        },
        rejects,
    })
}

/// A labelled dataset encoded for one model's inputs.
pub struct PreparedTask {
    pub featurizer: Featurizer,
    pub items: Vec<Encoded>,
    pub labels: Vec<Vec<Option<f64>>>,
    pub task: TaskKind,
    pub rejects: Vec<Reject>,
    /// Dataset restricted to the encodable records.
    pub dataset: Dataset,
}

impl PreparedTask {
    pub fn new(features: &FeatureSpec, dataset: &Dataset) -> Result<Self> {
        let featurizer = Featurizer::new(features.clone())?;
        let mut items = Vec::new();
        let mut labels = Vec::new();
        let mut records = Vec::new();
        let mut rejects = Vec::new();
        for (i, r) in dataset.records.iter().enumerate() {
            match featurizer.encode(&r.mol, &r.canonical) {
                Ok(e) => {
                    items.push(e);
                    labels.push(r.labels.clone());
                    records.push(r.clone());
                }
                Err(e) => rejects.push(encode_reject(i + 1, r.id.clone(), &r.smiles, &e)),
            }
        }
        if items.is_empty() {
            return Err(HarnessError::EmptyDataset(dataset.name.clone()));
        }
        Ok(PreparedTask {
            featurizer,
            items,
            labels,
            task: dataset.task,
            rejects,
            dataset: Dataset {
                records,
                ..dataset.clone()
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Segments fine-tuned, counted from the head. The fresh head always
    /// trains, so 0 and 1 coincide.
    pub freeze_k: usize,
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub k_folds: usize,
    /// Folds to run; all when empty.
    pub folds: Vec<usize>,
    pub oversample: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            freeze_k: usize::MAX,
            train: TrainConfig {
                max_epochs: 500,
                patience: 50,
                ..TrainConfig::default()
            },
            test_fraction: 1.0 / 6.0,
            k_folds: 5,
            folds: Vec::new(),
            oversample: true,
        }
    }
}

/// Leaves the top `freeze_k` segments trainable and freezes the rest.
/// The head segment always trains, so 0 behaves as 1; values past the
/// segment count (e.g. `usize::MAX`) unfreeze everything. Returns the number
/// of trainable segments.
pub fn apply_freeze<S: Scalar>(model: &mut Model<S>, freeze_k: usize) -> Result<usize> {
    let n = freeze_k.clamp(1, model.segments.len());
    model.train_top_segments(n)?;
    Ok(n)
}

/// Where fine-tuning starts from.
#[derive(Clone, Copy)]
pub enum Init<'a, S> {
    Pretrained(&'a Model<S>),
    /// Same architecture and encoder as the given model, re-initialized.
    Random(&'a Model<S>),
}

impl<S> Init<'_, S> {
    fn base(&self) -> &Model<S> {
        match self {
            Init::Pretrained(m) | Init::Random(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub metrics: Metrics,
    pub plan: SplitPlan,
    pub n_records: usize,
    pub rejected: usize,
}

fn score(kind: MetricKind, pred: &[Vec<f64>], labels: &[Vec<Option<f64>>]) -> Result<f64> {
    match kind {
        MetricKind::Auc => roc_auc_multitask(pred, labels),
        MetricKind::Rmse => {
            let (p, t): (Vec<f64>, Vec<f64>) = pred
                .iter()
                .zip(labels)
                .flat_map(|(p, l)| p.iter().zip(l).filter_map(|(&p, l)| l.map(|t| (p, t))))
                .unzip();
            Ok(rmse(&p, &t))
        }
    }
}

pub fn finetune<S: Scalar>(init: Init<S>, task: &PreparedTask, cfg: &FinetuneConfig) -> Result<FinetuneReport> {
    finetune_with(init, task, cfg, |_, _| {})
}

/// As [`finetune`], handing each fold's best model to `on_fold`.
pub fn finetune_with<S: Scalar>(
    init: Init<S>,
    task: &PreparedTask,
    cfg: &FinetuneConfig,
    mut on_fold: impl FnMut(usize, &Model<S>),
) -> Result<FinetuneReport> {
    let base = init.base();
    let want = task.featurizer.spec.modality;
    let have = model_features(base)?;
    if have != task.featurizer.spec {
        return Err(HarnessError::ModalityMismatch {
            model: have.modality.name().into(),
            requested: want.name().into(),
        });
    }
    let n_segments = base.segments.len();
    if cfg.freeze_k > n_segments && cfg.freeze_k != usize::MAX {
        return Err(weakchem_core::NetError::IndexOutOfRange {
            what: "segments",
            index: cfg.freeze_k,
            len: n_segments,
        }
        .into());
    }
    let plan = make_split(&task.dataset, cfg.test_fraction, cfg.k_folds, cfg.train.seed, true)?;
    let (kind, loss, head_kind) = match task.task {
        TaskKind::Classification => (MetricKind::Auc, LossKind::BceMasked, HeadKind::Sigmoid),
        TaskKind::Regression => (MetricKind::Rmse, LossKind::Mse, HeadKind::Linear),
    };
    let n_tasks = task.dataset.n_tasks();
    let targets: Vec<Vec<f64>> = task
        .labels
        .iter()
        .map(|l| l.iter().map(|v| v.unwrap_or(0.0)).collect())
        .collect();
    let masks: Vec<Vec<bool>> = task
        .labels
        .iter()
        .map(|l| l.iter().map(Option::is_some).collect())
        .collect();
    let data = TrainData {
        featurizer: &task.featurizer,
        items: &task.items,
        targets: &targets,
        masks: &masks,
    };
    let folds: Vec<usize> = if cfg.folds.is_empty() {
        (0..cfg.k_folds).collect()
    } else {
        cfg.folds.clone()
    };
    let augment = want != Modality::Text;
    let mut metrics = Metrics {
        kind,
        folds: folds.clone(),
        validation: Vec::new(),
        test: Vec::new(),
        epochs_to_best: Vec::new(),
        epochs_trained: Vec::new(),
        best_validation_loss: Vec::new(),
    };
    for &f in &folds {
        let fold = plan.folds.get(f).ok_or(weakchem_core::NetError::IndexOutOfRange {
            what: "folds",
            index: f,
            len: plan.folds.len(),
        })?;
        let train = if cfg.oversample && task.task == TaskKind::Classification && n_tasks == 1 {
            let first: Vec<Option<f64>> = task.labels.iter().map(|l| l[0]).collect();
            oversample_minority(&fold.train, &first)?
        } else {
            fold.train.clone()
        };
        let f64_ = f as u64;
        let mut model = match init {
            Init::Pretrained(m) => m.clone(),
            Init::Random(m) => fresh_like(m, derive_seed(cfg.train.seed, TAG_BODY, f64_))?,
        };
        model.replace_head(
            HeadSpec {
                n_outputs: n_tasks,
                kind: head_kind,
            },
            derive_seed(cfg.train.seed, TAG_HEAD, f64_),
        )?;
        apply_freeze(&mut model, cfg.freeze_k)?;
        model.reset_optimizer();
        let train_cfg = TrainConfig {
            seed: derive_seed(cfg.train.seed, TAG_TRAIN, f64_),
            ..cfg.train.clone()
        };
        let out = fit(model, &data, &train, &fold.validation, loss, &train_cfg, augment)?;
        let val_pred = predict(&out.model, &data, &fold.validation, cfg.train.batch_size)?;
        let val_labels: Vec<Vec<Option<f64>>> = fold.validation.iter().map(|&i| task.labels[i].clone()).collect();
        metrics.validation.push(score(kind, &val_pred, &val_labels)?);
        if !plan.test.is_empty() {
            let test_pred = predict(&out.model, &data, &plan.test, cfg.train.batch_size)?;
            let test_labels: Vec<Vec<Option<f64>>> = plan.test.iter().map(|&i| task.labels[i].clone()).collect();
            metrics.test.push(score(kind, &test_pred, &test_labels)?);
        }
        metrics.epochs_to_best.push(out.best_epoch);
        metrics.epochs_trained.push(out.epochs_trained);
        metrics.best_validation_loss.push(out.best_val_loss);
        on_fold(f, &out.model);
    }
    Ok(FinetuneReport {
        metrics,
        plan,
        n_records: task.items.len(),
        rejected: task.rejects.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub freeze_k: usize,
    pub trainable_segments: usize,
    pub mean_metric: f64,
    pub mean_epochs_to_best: f64,
    /// Mean validation metric per seed.
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metric: MetricKind,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "freeze_k".to_string(),
            "trainable_segments".into(),
            format!("mean_{}", metric_name(self.metric)),
            "mean_epochs_to_best".into(),
        ];
        header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.freeze_k.to_string(),
                r.trainable_segments.to_string(),
                format!("{:.6}", r.mean_metric),
                format!("{:.3}", r.mean_epochs_to_best),
            ];
            rec.extend(r.per_seed.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| HarnessError::io("sweep table", e))?;
        Ok(())
    }

    pub fn row(&self, freeze_k: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.freeze_k == freeze_k)
    }
}

pub fn metric_name(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Auc => "auc",
        MetricKind::Rmse => "rmse",
    }
}

/// Runs fine-tuning for every freeze_k in 0..=n_segments over the given
/// seeds. `done` is called after each run with (freeze_k, seed, report).
pub fn freeze_sweep<S: Scalar>(
    pretrained: &Model<S>,
    task: &PreparedTask,
    cfg: &FinetuneConfig,
    seeds: &[u64],
    mut done: impl FnMut(usize, u64, &FinetuneReport),
) -> Result<SweepTable> {
    let n = pretrained.segments.len();
    let mut rows = Vec::with_capacity(n + 1);
    let mut kind = MetricKind::Auc;
    for k in 0..=n {
        if k == 1 {
            // Identical configuration to k = 0: only the head trains.
            if let Some(prev) = rows.last().cloned() {
                rows.push(SweepRow { freeze_k: 1, ..prev });
                continue;
            }
        }
        let mut per_seed = Vec::with_capacity(seeds.len());
        let mut epochs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let c = FinetuneConfig {
                freeze_k: k,
                train: TrainConfig {
                    seed,
                    ..cfg.train.clone()
                },
                ..cfg.clone()
            };
            let rep = finetune(Init::Pretrained(pretrained), task, &c)?;
            kind = rep.metrics.kind;
            per_seed.push(rep.metrics.mean_validation());
            epochs.push(rep.metrics.mean_epochs_to_best());
            done(k, seed, &rep);
        }
        rows.push(SweepRow {
            freeze_k: k,
            trainable_segments: k.max(1),
            mean_metric: per_seed.iter().sum::<f64>() / per_seed.len() as f64,
            mean_epochs_to_best: epochs.iter().sum::<f64>() / epochs.len() as f64,
            per_seed,
        });
    }
    Ok(SweepTable {
        metric: kind,
        seeds: seeds.to_vec(),
        rows,
    })
}

/// Provenance record written next to every experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub rejected: usize,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        RunManifest {
            tool: format!("weakchem {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            config,
            seeds,
            inputs: BTreeMap::new(),
            rejected: 0,
            results: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
