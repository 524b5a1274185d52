//! Run configuration: a TOML file whose values are overridden by CLI flags.
//!
//! Every field is optional at both layers; `merge` lets the right-hand side
//! win, and the `resolve_*` methods fill the remaining gaps with defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use weakchem_chem::imaging::Grid;
use weakchem_core::tensornet::{Precision, TrainConfig};

use crate::dataset::{Schema, TaskKind};
use crate::error::{HarnessError, Result};
use crate::experiment::{ArchConfig, FinetuneConfig, PretrainConfig, DEFAULT_DESCRIPTORS};
use crate::features::{FeatureSpec, Modality};

fn pick<T: Clone>(base: &Option<T>, over: &Option<T>) -> Option<T> {
    over.clone().or_else(|| base.clone())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub precision: Option<Precision>,
}

impl TrainOverrides {
    pub fn merge(&self, over: &TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            learning_rate: pick(&self.learning_rate, &over.learning_rate),
            rho: pick(&self.rho, &over.rho),
            epsilon: pick(&self.epsilon, &over.epsilon),
            batch_size: pick(&self.batch_size, &over.batch_size),
            max_epochs: pick(&self.max_epochs, &over.max_epochs),
            patience: pick(&self.patience, &over.patience),
            precision: pick(&self.precision, &over.precision),
        }
    }

    pub fn apply(&self, base: TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            rho: self.rho.unwrap_or(base.rho),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            patience: self.patience.unwrap_or(base.patience),
            precision: self.precision.unwrap_or(base.precision),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOverrides {
    pub modality: Option<Modality>,
    pub size: Option<usize>,
    pub resolution: Option<f64>,
    pub text_length: Option<usize>,
}

impl FeatureOverrides {
    pub fn merge(&self, over: &FeatureOverrides) -> FeatureOverrides {
        FeatureOverrides {
            modality: pick(&self.modality, &over.modality),
            size: pick(&self.size, &over.size),
            resolution: pick(&self.resolution, &over.resolution),
            text_length: pick(&self.text_length, &over.text_length),
        }
    }

    pub fn resolve(&self) -> FeatureSpec {
        let grid = Grid::default();
        FeatureSpec {
            modality: self.modality.unwrap_or(Modality::ImageEngd),
            grid: Grid {
                size: self.size.unwrap_or(grid.size),
                resolution: self.resolution.unwrap_or(grid.resolution),
            },
            text_length: self.text_length.unwrap_or(weakchem_chem::textenc::DEFAULT_LENGTH),
            vocab: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchOverrides {
    pub depth: Option<usize>,
    pub filters: Option<usize>,
    pub units: Option<usize>,
}

impl ArchOverrides {
    pub fn merge(&self, over: &ArchOverrides) -> ArchOverrides {
        ArchOverrides {
            depth: pick(&self.depth, &over.depth),
            filters: pick(&self.filters, &over.filters),
            units: pick(&self.units, &over.units),
        }
    }

    /// Chemception for image modalities, SMILES2vec for text.
    pub fn resolve(&self, modality: Modality) -> ArchConfig {
        match modality {
            Modality::Text => ArchConfig::Smiles2vec {
                units: self.units.unwrap_or(64),
            },
            _ => ArchConfig::Chemception {
                depth: self.depth.unwrap_or(3),
                filters: self.filters.unwrap_or(16),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainOverrides {
    pub descriptors: Option<Vec<String>>,
    pub val_fraction: Option<f64>,
    pub train: TrainOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneOverrides {
    pub freeze_k: Option<usize>,
    pub test_fraction: Option<f64>,
    pub k_folds: Option<usize>,
    pub folds: Option<Vec<usize>>,
    pub oversample: Option<bool>,
    pub seeds: Option<Vec<u64>>,
    pub train: TrainOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOverrides {
    pub smiles_column: Option<String>,
    pub label_columns: Option<Vec<String>>,
    pub id_column: Option<String>,
    pub task: Option<TaskKind>,
    pub delimiter: Option<char>,
}

impl DatasetOverrides {
    pub fn merge(&self, over: &DatasetOverrides) -> DatasetOverrides {
        DatasetOverrides {
            smiles_column: pick(&self.smiles_column, &over.smiles_column),
            label_columns: pick(&self.label_columns, &over.label_columns),
            id_column: pick(&self.id_column, &over.id_column),
            task: pick(&self.task, &over.task),
            delimiter: pick(&self.delimiter, &over.delimiter),
        }
    }

    pub fn resolve(&self) -> Result<Schema> {
        let label_columns = self
            .label_columns
            .clone()
            .filter(|c| !c.is_empty())
            .ok_or_else(|| HarnessError::Config("dataset label columns are required".into()))?;
        Ok(Schema {
            smiles_column: self.smiles_column.clone().unwrap_or_else(|| "smiles".into()),
            label_columns,
            id_column: self.id_column.clone(),
            task: self.task.unwrap_or(TaskKind::Classification),
            delimiter: self.delimiter.unwrap_or(','),
        })
    }
}

/// Everything a config file may set. Flags build the same structure and
/// are merged on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Shared training settings; the per-phase sections override these.
    pub train: TrainOverrides,
    pub features: FeatureOverrides,
    pub arch: ArchOverrides,
    pub pretrain: PretrainOverrides,
    pub finetune: FinetuneOverrides,
    pub dataset: DatasetOverrides,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn merge(&self, over: &RunConfig) -> RunConfig {
        RunConfig {
            seed: pick(&self.seed, &over.seed),
            train: self.train.merge(&over.train),
            features: self.features.merge(&over.features),
            arch: self.arch.merge(&over.arch),
            pretrain: PretrainOverrides {
                descriptors: pick(&self.pretrain.descriptors, &over.pretrain.descriptors),
                val_fraction: pick(&self.pretrain.val_fraction, &over.pretrain.val_fraction),
                train: self.pretrain.train.merge(&over.pretrain.train),
            },
            finetune: FinetuneOverrides {
                freeze_k: pick(&self.finetune.freeze_k, &over.finetune.freeze_k),
                test_fraction: pick(&self.finetune.test_fraction, &over.finetune.test_fraction),
                k_folds: pick(&self.finetune.k_folds, &over.finetune.k_folds),
                folds: pick(&self.finetune.folds, &over.finetune.folds),
                oversample: pick(&self.finetune.oversample, &over.finetune.oversample),
                seeds: pick(&self.finetune.seeds, &over.finetune.seeds),
                train: self.finetune.train.merge(&over.finetune.train),
            },
            dataset: self.dataset.merge(&over.dataset),
        }
    }

    /// Training commands refuse to run without an explicit seed.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| HarnessError::Config("--seed is required for training commands".into()))
    }

    pub fn resolve_pretrain(&self) -> Result<PretrainConfig> {
        let seed = self.require_seed()?;
        let features = self.features.resolve();
        let train = self
            .train
            .merge(&self.pretrain.train)
            .apply(TrainConfig::default(), seed);
        train.validate()?;
        Ok(PretrainConfig {
            arch: self.arch.resolve(features.modality),
            features,
            descriptors: self
                .pretrain
                .descriptors
                .clone()
                .unwrap_or_else(|| DEFAULT_DESCRIPTORS.iter().map(|s| s.to_string()).collect()),
            val_fraction: self.pretrain.val_fraction.unwrap_or(1.0 / 6.0),
            train,
        })
    }

    pub fn resolve_finetune(&self) -> Result<FinetuneConfig> {
        let seed = self.require_seed()?;
        let d = FinetuneConfig::default();
        let train = self.train.merge(&self.finetune.train).apply(d.train.clone(), seed);
        train.validate()?;
        let f = &self.finetune;
        Ok(FinetuneConfig {
            freeze_k: f.freeze_k.unwrap_or(d.freeze_k),
            train,
            test_fraction: f.test_fraction.unwrap_or(d.test_fraction),
            k_folds: f.k_folds.unwrap_or(d.k_folds),
            folds: f.folds.clone().unwrap_or(d.folds),
            oversample: f.oversample.unwrap_or(d.oversample),
        })
    }

    /// Seeds for multi-seed commands: the explicit list, else the single seed.
    pub fn seeds(&self) -> Result<Vec<u64>> {
        match &self.finetune.seeds {
            Some(s) if !s.is_empty() => Ok(s.clone()),
            _ => Ok(vec![self.require_seed()?]),
        }
    }
}
