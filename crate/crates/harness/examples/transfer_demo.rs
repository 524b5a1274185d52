//! Pre-trains a small model on the bundled corpus and compares pretrained
//! against random initialization on the toy task.
//!
//! Usage: transfer_demo [image|text] [pretrain_epochs] [finetune_epochs] [seeds] [patience]

use std::time::Instant;

use weakchem_chem::imaging::Grid;
use weakchem_core::tensornet::TrainConfig;
use weakchem_harness::dataset::{load_corpus, load_dataset, Schema, TaskKind};
use weakchem_harness::experiment::{
    finetune, pretrain, ArchConfig, FinetuneConfig, Init, PreparedTask, PretrainConfig, DEFAULT_DESCRIPTORS,
};
use weakchem_harness::features::{FeatureSpec, Modality};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let text = args.get(1).map(|s| s == "text").unwrap_or(false);
    let pre_epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let ft_epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(30);
    let n_seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5);
    let patience: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(10);
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let corpus = load_corpus(format!("{data}/corpus.smi")).unwrap();
    let (modality, arch) = if text {
        (Modality::Text, ArchConfig::Smiles2vec { units: 32 })
    } else {
        (Modality::ImageEngd, ArchConfig::Chemception { depth: 2, filters: 8 })
    };
    let features = FeatureSpec {
        modality,
        grid: Grid {
            size: 40,
            resolution: 0.5,
        },
        text_length: 64,
        vocab: None,
    };
    let cfg = PretrainConfig {
        features,
        arch,
        descriptors: DEFAULT_DESCRIPTORS.iter().map(|s| s.to_string()).collect(),
        val_fraction: 1.0 / 6.0,
        train: TrainConfig {
            max_epochs: pre_epochs,
            seed: 1,
            ..TrainConfig::default()
        },
    };
    let t = Instant::now();
    let pre = pretrain::<f32>(&corpus, &cfg).unwrap();
    eprintln!(
        "pretrain {:.1}s: init {:.5} best {:.5} @ {} ({} rejected)",
        t.elapsed().as_secs_f64(),
        pre.report.initial_val_loss,
        pre.report.best_val_loss,
        pre.report.best_epoch,
        pre.report.rejected
    );
    for h in &pre.report.history {
        eprintln!("  epoch {} train {:.5} val {:.5}", h.epoch, h.train_loss, h.val_loss);
    }
    let schema = Schema {
        smiles_column: "smiles".into(),
        label_columns: vec!["label".into()],
        id_column: Some("id".into()),
        task: TaskKind::Classification,
        delimiter: ',',
    };
    let ds = load_dataset(format!("{data}/toy_hydroxyl.csv"), &schema).unwrap();
    let features = weakchem_harness::experiment::model_features(&pre.model).unwrap();
    let task = PreparedTask::new(&features, &ds.dataset).unwrap();
    for (label, random) in [("pretrained", false), ("random", true)] {
        let mut aucs = Vec::new();
        let mut epochs = Vec::new();
        let t = Instant::now();
        for seed in 0..n_seeds {
            let fc = FinetuneConfig {
                train: TrainConfig {
                    max_epochs: ft_epochs,
                    patience,
                    seed,
                    ..TrainConfig::default()
                },
                folds: vec![0],
                ..FinetuneConfig::default()
            };
            let init = if random {
                Init::Random(&pre.model)
            } else {
                Init::Pretrained(&pre.model)
            };
            let r = finetune(init, &task, &fc).unwrap();
            aucs.push(r.metrics.mean_validation());
            epochs.push(r.metrics.mean_epochs_to_best());
            eprintln!("  {label} seed {seed}: {:?}", r.metrics);
        }
        let m = aucs.iter().sum::<f64>() / aucs.len() as f64;
        let e = epochs.iter().sum::<f64>() / epochs.len() as f64;
        eprintln!(
            "{label}: auc {m:.4} epochs {e:.1} {aucs:.3?} {epochs:?} ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
    }
}
