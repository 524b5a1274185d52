use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use weakchem_chem::descriptors::{compute_descriptors, selection_indices, write_label_matrix, REGISTRY};
use weakchem_chem::imaging::{augmented_sample, render, Grid, Scheme};
use weakchem_chem::prepare;
use weakchem_chem::textenc::{encode, Vocab};
use weakchem_core::tensornet::{load_model, save_model, HeadKind, HeadSpec, Precision};
use weakchem_core::{Model, Scalar};
use weakchem_harness::config::{
    ArchOverrides, DatasetOverrides, FeatureOverrides, FinetuneOverrides, PretrainOverrides, RunConfig, TrainOverrides,
};
use weakchem_harness::dataset::{load_corpus, load_dataset, write_rejects, LoadReport, Reject, TaskKind};
use weakchem_harness::error::{HarnessError, Result};
use weakchem_harness::experiment::{
    build_model, finetune_with, freeze_sweep, model_features, pretrain, sha256_hex, FinetuneReport, Init, PreparedTask,
    RunManifest,
};
use weakchem_harness::features::Modality;
use weakchem_harness::metrics::{rmse, roc_auc_multitask, MetricKind};
use weakchem_harness::split::make_split;
use weakchem_harness::train::{predict, TrainData};

#[derive(Parser)]
#[command(
    name = "weakchem",
    version,
    about = "Descriptor pre-training and transfer experiments for molecular property models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the descriptor label matrix for a SMILES file.
    Descriptors(DescriptorsArgs),
    /// Rasterize one molecule and write the raw image tensor.
    Render(RenderArgs),
    /// One-hot encode one SMILES string and write the raw matrix.
    Encode(EncodeArgs),
    /// Write the test carve-out and cross-validation folds of a dataset.
    Split(SplitArgs),
    /// Pre-train a model on descriptor labels computed from a corpus.
    Pretrain(PretrainArgs),
    /// Fine-tune a pretrained or freshly initialized model on a dataset.
    Finetune(FinetuneArgs),
    /// Fine-tune for every number of unfrozen segments and tabulate the metric.
    Sweep(SweepArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Collect run manifests into one plot-ready table.
    Report(ReportArgs),
}

#[derive(Args, Default)]
struct TrainFlags {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// f32 or f64.
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
}

impl TrainFlags {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            learning_rate: self.learning_rate,
            rho: self.rho,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            precision: self.precision,
        }
    }
}

#[derive(Args, Default)]
struct FeatureFlags {
    /// image-std, image-engd or text.
    #[arg(long, value_parser = parse_modality)]
    modality: Option<Modality>,
    /// Image height and width in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Distance units per pixel.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    text_length: Option<usize>,
}

impl FeatureFlags {
    fn overrides(&self) -> FeatureOverrides {
        FeatureOverrides {
            modality: self.modality,
            size: self.size,
            resolution: self.resolution,
            text_length: self.text_length,
        }
    }
}

#[derive(Args, Default)]
struct DatasetFlags {
    #[arg(long)]
    smiles_column: Option<String>,
    /// Comma-separated label column names.
    #[arg(long, value_delimiter = ',')]
    label_columns: Option<Vec<String>>,
    #[arg(long)]
    id_column: Option<String>,
    /// classification or regression.
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    delimiter: Option<char>,
}

impl DatasetFlags {
    fn overrides(&self) -> DatasetOverrides {
        DatasetOverrides {
            smiles_column: self.smiles_column.clone(),
            label_columns: self.label_columns.clone(),
            id_column: self.id_column.clone(),
            task: self.task,
            delimiter: self.delimiter,
        }
    }
}

#[derive(Args, Default)]
struct SplitFlags {
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    k_folds: Option<usize>,
    /// Comma-separated fold indices to run; all folds by default.
    #[arg(long, value_delimiter = ',')]
    folds: Option<Vec<usize>>,
    /// Disable minority-class oversampling.
    #[arg(long)]
    no_oversample: bool,
}

#[derive(Args)]
struct Common {
    /// TOML file providing defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DescriptorsArgs {
    /// One SMILES per line; further whitespace-separated fields are ignored.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated descriptor names; the full registry by default.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    rejects: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    smiles: String,
    /// std or engd.
    #[arg(long, default_value = "engd")]
    scheme: String,
    #[arg(long, default_value_t = 80)]
    size: usize,
    #[arg(long, default_value_t = 0.5)]
    resolution: f64,
    /// Apply a random rotation drawn from this seed.
    #[arg(long)]
    rotate_seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    smiles: String,
    /// Vocabulary file, one symbol per line.
    #[arg(long, conflicts_with = "corpus")]
    vocab: Option<PathBuf>,
    /// Build the vocabulary from this SMILES corpus instead.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = weakchem_chem::textenc::DEFAULT_LENGTH)]
    length: usize,
    #[arg(long)]
    output: PathBuf,
    /// Also write the vocabulary used.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    data: DatasetFlags,
    #[command(flatten)]
    split: SplitFlags,
    /// Plain random split even for classification data.
    #[arg(long)]
    no_stratify: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    /// Unlabelled SMILES corpus.
    #[arg(long)]
    corpus: PathBuf,
    /// Model file to write; manifest, history and rejects go alongside.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    units: Option<usize>,
    /// Comma-separated descriptor labels.
    #[arg(long, value_delimiter = ',')]
    descriptors: Option<Vec<String>>,
    #[arg(long)]
    val_fraction: Option<f64>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[command(flatten)]
    common: Common,
    /// Pretrained model file.
    #[arg(long, required_unless_present = "fresh")]
    model: Option<PathBuf>,
    /// Start from random weights: built from the config's features and
    /// architecture, or re-initialized from --model when given.
    #[arg(long)]
    fresh: bool,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Segments fine-tuned, counted from the head.
    #[arg(long)]
    freeze_k: Option<usize>,
    /// Save the best model of each fold.
    #[arg(long)]
    save_models: bool,
    #[command(flatten)]
    data: DatasetFlags,
    #[command(flatten)]
    split: SplitFlags,
    #[command(flatten)]
    features: FeatureFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    units: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated seeds; defaults to --seed alone.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[command(flatten)]
    data: DatasetFlags,
    #[command(flatten)]
    split: SplitFlags,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    data: DatasetFlags,
    /// Per-molecule predictions.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run manifests written by finetune or sweep.
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => Err(format!("expected f32 or f64, got {s:?}")),
    }
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    Modality::parse(s).ok_or_else(|| format!("expected image-std, image-engd or text, got {s:?}"))
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    match s {
        "classification" => Ok(TaskKind::Classification),
        "regression" => Ok(TaskKind::Regression),
        _ => Err(format!("expected classification or regression, got {s:?}")),
    }
}

fn split_overrides(s: &SplitFlags) -> FinetuneOverrides {
    FinetuneOverrides {
        test_fraction: s.test_fraction,
        k_folds: s.k_folds,
        folds: s.folds.clone(),
        oversample: s.no_oversample.then_some(false),
        ..Default::default()
    }
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let file = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(file.merge(&RunConfig {
        seed: common.seed,
        ..Default::default()
    }))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| HarnessError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| HarnessError::io(path, e))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn report_rejects(path: &Path, rejects: &[Reject]) -> Result<()> {
    if !rejects.is_empty() {
        eprintln!("{} molecules rejected, see {}", rejects.len(), path.display());
    }
    write_rejects(create(path)?, rejects)
}

fn cmd_descriptors(a: &DescriptorsArgs) -> Result<()> {
    let names: Vec<String> = a
        .names
        .clone()
        .unwrap_or_else(|| REGISTRY.iter().map(|s| s.to_string()).collect());
    let idx = selection_indices(&names)?;
    let text = String::from_utf8_lossy(&read(&a.input)?).into_owned();
    let mut rows = Vec::new();
    let mut rejects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(smiles) = line.split_whitespace().next() else {
            continue;
        };
        if i == 0 && smiles.eq_ignore_ascii_case("smiles") {
            continue;
        }
        match prepare(smiles) {
            Ok(mol) => {
                let d = compute_descriptors(&mol);
                rows.push(idx.iter().map(|&k| d.values[k]).collect());
            }
            Err(e) => rejects.push(Reject {
                row: i + 1,
                id: format!("line{}", i + 1),
                smiles: smiles.into(),
                reason: e.kind().into(),
                detail: e.to_string(),
            }),
        }
    }
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_label_matrix(output(&a.output)?, &header, &rows)?;
    match &a.rejects {
        Some(p) => report_rejects(p, &rejects)?,
        None if !rejects.is_empty() => eprintln!("{} molecules rejected", rejects.len()),
        None => {}
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let scheme =
        Scheme::parse(&a.scheme).ok_or_else(|| HarnessError::Config(format!("unknown scheme {:?}", a.scheme)))?;
    let grid = Grid {
        size: a.size,
        resolution: a.resolution,
    };
    let mol = prepare(&a.smiles)?;
    let image = match a.rotate_seed {
        Some(seed) => augmented_sample(&mol, scheme, &grid, &mut ChaCha8Rng::seed_from_u64(seed))?,
        None => render(&mol, scheme, &grid)?,
    };
    let mut buf = Vec::new();
    image.write_raw(&mut buf)?;
    write(&a.output, &buf)
}

fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let vocab = match (&a.vocab, &a.corpus) {
        (Some(p), _) => Vocab::from_text(&String::from_utf8_lossy(&read(p)?))?,
        (None, Some(p)) => {
            let corpus = load_corpus(p)?;
            let texts: Vec<&str> = corpus.entries.iter().map(|e| e.canonical.as_str()).collect();
            Vocab::build(&texts)?
        }
        (None, None) => return Err(HarnessError::Config("encode needs --vocab or --corpus".into())),
    };
    let canonical = weakchem_chem::molgraph::canonical_smiles(&a.smiles)?;
    let seq = encode(&canonical, &vocab, a.length)?;
    let mut buf = format!("{} {}\n", seq.length, seq.vocab_size).into_bytes();
    for v in seq.to_dense() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write(&a.output, &buf)?;
    if let Some(p) = &a.vocab_out {
        write(p, vocab.to_text().as_bytes())?;
    }
    Ok(())
}

fn load_labelled(cfg: &RunConfig, path: &Path) -> Result<LoadReport> {
    let schema = cfg.dataset.resolve()?;
    let report = load_dataset(path, &schema)?;
    if !report.duplicates.is_empty() {
        eprintln!("{} groups of duplicate molecules kept", report.duplicates.len());
    }
    Ok(report)
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let cfg = base_config(&a.common)?.merge(&RunConfig {
        dataset: a.data.overrides(),
        finetune: split_overrides(&a.split),
        ..Default::default()
    });
    let ft = cfg.resolve_finetune()?;
    let loaded = load_labelled(&cfg, &a.dataset)?;
    let plan = make_split(
        &loaded.dataset,
        ft.test_fraction,
        ft.k_folds,
        ft.train.seed,
        !a.no_stratify,
    )?;
    let mut out = output(&a.output)?;
    let json = serde_json::to_string_pretty(&plan).expect("plan serializes");
    writeln!(out, "{json}").map_err(|e| HarnessError::io("split output", e))?;
    Ok(())
}

fn precision_of(cfg: &weakchem_core::tensornet::TrainConfig) -> Precision {
    cfg.precision
}

fn cmd_pretrain(a: &PretrainArgs) -> Result<()> {
    let cfg = base_config(&a.common)?.merge(&RunConfig {
        features: a.features.overrides(),
        arch: ArchOverrides {
            depth: a.depth,
            filters: a.filters,
            units: a.units,
        },
        pretrain: PretrainOverrides {
            descriptors: a.descriptors.clone(),
            val_fraction: a.val_fraction,
            train: a.train.overrides(),
        },
        ..Default::default()
    });
    let pc = cfg.resolve_pretrain()?;
    match precision_of(&pc.train) {
        Precision::F32 => pretrain_typed::<f32>(a, &pc),
        Precision::F64 => pretrain_typed::<f64>(a, &pc),
    }
}

fn pretrain_typed<S: Scalar>(a: &PretrainArgs, pc: &weakchem_harness::experiment::PretrainConfig) -> Result<()> {
    let corpus_bytes = read(&a.corpus)?;
    let corpus = weakchem_harness::dataset::read_corpus(&String::from_utf8_lossy(&corpus_bytes))?;
    let out = pretrain::<S>(&corpus, pc)?;
    save_model(&out.model, &a.out)?;
    let mut m = RunManifest::new(
        "pretrain",
        serde_json::to_value(pc).expect("config serializes"),
        vec![pc.train.seed],
    );
    m.inputs.insert("corpus".into(), sha256_hex(&corpus_bytes));
    m.rejected = out.rejects.len();
    m.results = serde_json::json!({
        "model_sha256": sha256_hex(&read(&a.out)?),
        "corpus_size": out.report.corpus_size,
        "n_train": out.report.n_train,
        "n_val": out.report.n_val,
        "initial_val_loss": out.report.initial_val_loss,
        "best_val_loss": out.report.best_val_loss,
        "best_epoch": out.report.best_epoch,
        "epochs_trained": out.report.epochs_trained,
    });
    write(&sibling(&a.out, ".manifest.json"), m.to_json().as_bytes())?;
    let mut w = csv::Writer::from_writer(create(&sibling(&a.out, ".history.csv"))?);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for h in &out.report.history {
        w.write_record([h.epoch.to_string(), h.train_loss.to_string(), h.val_loss.to_string()])?;
    }
    w.flush().map_err(|e| HarnessError::io(&a.out, e))?;
    report_rejects(&sibling(&a.out, ".rejects.csv"), &out.rejects)?;
    eprintln!(
        "validation loss {:.6} -> {:.6} (best epoch {} of {})",
        out.report.initial_val_loss, out.report.best_val_loss, out.report.best_epoch, out.report.epochs_trained
    );
    Ok(())
}

fn write_metrics_csv(path: &Path, report: &FinetuneReport) -> Result<()> {
    let m = &report.metrics;
    let name = weakchem_harness::experiment::metric_name(m.kind);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "fold".to_string(),
        format!("validation_{name}"),
        format!("test_{name}"),
        "epochs_to_best".into(),
        "epochs_trained".into(),
        "best_validation_loss".into(),
    ])?;
    for (i, f) in m.folds.iter().enumerate() {
        w.write_record([
            f.to_string(),
            format!("{:.6}", m.validation[i]),
            m.test.get(i).map(|v| format!("{v:.6}")).unwrap_or_default(),
            m.epochs_to_best[i].to_string(),
            m.epochs_trained[i].to_string(),
            format!("{:.6}", m.best_validation_loss[i]),
        ])?;
    }
    let test = if m.test.is_empty() {
        String::new()
    } else {
        format!("{:.6}", m.mean_test())
    };
    w.write_record([
        "mean".to_string(),
        format!("{:.6}", m.mean_validation()),
        test,
        format!("{:.3}", m.mean_epochs_to_best()),
        String::new(),
        String::new(),
    ])?;
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn finetune_config(a: &FinetuneArgs) -> Result<RunConfig> {
    Ok(base_config(&a.common)?.merge(&RunConfig {
        features: a.features.overrides(),
        arch: ArchOverrides {
            depth: a.depth,
            filters: a.filters,
            units: a.units,
        },
        dataset: a.data.overrides(),
        finetune: FinetuneOverrides {
            freeze_k: a.freeze_k,
            train: a.train.overrides(),
            ..split_overrides(&a.split)
        },
        ..Default::default()
    }))
}

fn cmd_finetune(a: &FinetuneArgs) -> Result<()> {
    let cfg = finetune_config(a)?;
    let fc = cfg.resolve_finetune()?;
    match fc.train.precision {
        Precision::F32 => finetune_typed::<f32>(a, &cfg),
        Precision::F64 => finetune_typed::<f64>(a, &cfg),
    }
}

fn finetune_typed<S: Scalar>(a: &FinetuneArgs, cfg: &RunConfig) -> Result<()> {
    let fc = cfg.resolve_finetune()?;
    let mut inputs = std::collections::BTreeMap::new();
    let base: Model<S> = match &a.model {
        Some(p) => {
            inputs.insert("model".to_string(), sha256_hex(&read(p)?));
            load_model(p)?
        }
        None => {
            let features = cfg.features.resolve();
            if features.modality == Modality::Text {
                return Err(HarnessError::Config(
                    "a fresh text model needs a vocabulary; pass --model to reuse one".into(),
                ));
            }
            let head = HeadSpec {
                n_outputs: 1,
                kind: HeadKind::Linear,
            };
            build_model(cfg.arch.resolve(features.modality), &features, head, fc.train.seed)?
        }
    };
    let loaded = load_labelled(cfg, &a.dataset)?;
    inputs.insert("dataset".into(), sha256_hex(&read(&a.dataset)?));
    let task = PreparedTask::new(&model_features(&base)?, &loaded.dataset)?;
    let init = if a.fresh {
        Init::Random(&base)
    } else {
        Init::Pretrained(&base)
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| HarnessError::io(&a.out_dir, e))?;
    let mut saved = Vec::new();
    let report = finetune_with(init, &task, &fc, |fold, model| {
        if a.save_models {
            let path = a.out_dir.join(format!("fold{fold}.wcn"));
            saved.push(save_model(model, &path).map(|_| path));
        }
    })?;
    for r in saved {
        r?;
    }
    write_metrics_csv(&a.out_dir.join("metrics.csv"), &report)?;
    let mut rejects = loaded.rejects.clone();
    rejects.extend(task.rejects.iter().cloned());
    report_rejects(&a.out_dir.join("rejects.csv"), &rejects)?;
    let mut m = RunManifest::new(
        "finetune",
        serde_json::json!({
            "finetune": fc,
            "dataset": cfg.dataset.resolve()?,
            "init": if a.fresh { "random" } else { "pretrained" },
            "features": model_features(&base)?,
        }),
        vec![fc.train.seed],
    );
    m.inputs = inputs;
    m.rejected = rejects.len();
    m.results = serde_json::to_value(&report).expect("report serializes");
    write(&a.out_dir.join("manifest.json"), m.to_json().as_bytes())?;
    let name = weakchem_harness::experiment::metric_name(report.metrics.kind);
    println!(
        "mean validation {name} {:.4}, mean epochs to best {:.1}",
        report.metrics.mean_validation(),
        report.metrics.mean_epochs_to_best()
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = base_config(&a.common)?.merge(&RunConfig {
        dataset: a.data.overrides(),
        finetune: FinetuneOverrides {
            seeds: a.seeds.clone(),
            train: a.train.overrides(),
            ..split_overrides(&a.split)
        },
        ..Default::default()
    });
    let fc = cfg.resolve_finetune()?;
    match fc.train.precision {
        Precision::F32 => sweep_typed::<f32>(a, &cfg),
        Precision::F64 => sweep_typed::<f64>(a, &cfg),
    }
}

fn sweep_typed<S: Scalar>(a: &SweepArgs, cfg: &RunConfig) -> Result<()> {
    let fc = cfg.resolve_finetune()?;
    let seeds = cfg.seeds()?;
    let model: Model<S> = load_model(&a.model)?;
    let loaded = load_labelled(cfg, &a.dataset)?;
    let task = PreparedTask::new(&model_features(&model)?, &loaded.dataset)?;
    let table = freeze_sweep(&model, &task, &fc, &seeds, |k, seed, r| {
        eprintln!("freeze_k {k} seed {seed}: {:.4}", r.metrics.mean_validation());
    })?;
    fs::create_dir_all(&a.out_dir).map_err(|e| HarnessError::io(&a.out_dir, e))?;
    table.write_csv(create(&a.out_dir.join("sweep.csv"))?)?;
    let mut m = RunManifest::new(
        "sweep",
        serde_json::json!({ "finetune": fc, "dataset": cfg.dataset.resolve()? }),
        seeds,
    );
    m.inputs.insert("model".into(), sha256_hex(&read(&a.model)?));
    m.inputs.insert("dataset".into(), sha256_hex(&read(&a.dataset)?));
    m.rejected = loaded.rejects.len() + task.rejects.len();
    m.results = serde_json::to_value(&table).expect("table serializes");
    write(&a.out_dir.join("manifest.json"), m.to_json().as_bytes())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let file = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.merge(&RunConfig {
        dataset: a.data.overrides(),
        ..Default::default()
    });
    let model: Model<f64> = load_model(&a.model)?;
    let loaded = load_labelled(&cfg, &a.dataset)?;
    let task = PreparedTask::new(&model_features(&model)?, &loaded.dataset)?;
    if model.output_width() != task.dataset.n_tasks() {
        return Err(HarnessError::Schema(format!(
            "model predicts {} outputs but the dataset has {} label columns",
            model.output_width(),
            task.dataset.n_tasks()
        )));
    }
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
    let all: Vec<usize> = (0..task.items.len()).collect();
    let pred = predict(&model, &data, &all, 32)?;
    let (kind, value) = match task.task {
        TaskKind::Classification => (MetricKind::Auc, roc_auc_multitask(&pred, &task.labels)?),
        TaskKind::Regression => {
            let (p, t): (Vec<f64>, Vec<f64>) = pred
                .iter()
                .zip(&task.labels)
                .flat_map(|(p, l)| p.iter().zip(l).filter_map(|(&p, l)| l.map(|t| (p, t))))
                .unzip();
            (MetricKind::Rmse, rmse(&p, &t))
        }
    };
    if let Some(path) = &a.predictions {
        let mut w = csv::Writer::from_writer(create(path)?);
        let mut header = vec!["id".to_string()];
        header.extend(task.dataset.label_names.iter().map(|n| format!("pred_{n}")));
        w.write_record(&header)?;
        for (r, p) in task.dataset.records.iter().zip(&pred) {
            let mut row = vec![r.id.clone()];
            row.extend(p.iter().map(|v| format!("{v:.6}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    println!(
        "{} {value:.6} over {} molecules ({} rejected)",
        weakchem_harness::experiment::metric_name(kind),
        task.items.len(),
        loaded.rejects.len() + task.rejects.len()
    );
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(&a.output)?);
    w.write_record([
        "manifest",
        "command",
        "init",
        "freeze_k",
        "seed",
        "metric",
        "mean_validation",
        "mean_test",
        "mean_epochs_to_best",
        "rejected",
    ])?;
    for path in &a.manifests {
        let m: RunManifest = serde_json::from_slice(&read(path)?)
            .map_err(|e| HarnessError::Metadata(format!("{}: {e}", path.display())))?;
        let name = path.display().to_string();
        match m.command.as_str() {
            "finetune" => {
                let report: FinetuneReport = serde_json::from_value(m.results.clone())
                    .map_err(|e| HarnessError::Metadata(format!("{name}: {e}")))?;
                let fc = &m.config["finetune"];
                let test = if report.metrics.test.is_empty() {
                    String::new()
                } else {
                    format!("{:.6}", report.metrics.mean_test())
                };
                w.write_record([
                    name,
                    m.command.clone(),
                    m.config["init"].as_str().unwrap_or("").to_string(),
                    fc["freeze_k"].to_string(),
                    m.seeds.first().map(|s| s.to_string()).unwrap_or_default(),
                    weakchem_harness::experiment::metric_name(report.metrics.kind).to_string(),
                    format!("{:.6}", report.metrics.mean_validation()),
                    test,
                    format!("{:.3}", report.metrics.mean_epochs_to_best()),
                    m.rejected.to_string(),
                ])?;
            }
            "sweep" => {
                let table: weakchem_harness::experiment::SweepTable = serde_json::from_value(m.results.clone())
                    .map_err(|e| HarnessError::Metadata(format!("{name}: {e}")))?;
                let seeds: Vec<String> = table.seeds.iter().map(u64::to_string).collect();
                for row in &table.rows {
                    w.write_record([
                        name.clone(),
                        m.command.clone(),
                        "pretrained".to_string(),
                        row.freeze_k.to_string(),
                        seeds.join(";"),
                        weakchem_harness::experiment::metric_name(table.metric).to_string(),
                        format!("{:.6}", row.mean_metric),
                        String::new(),
                        format!("{:.3}", row.mean_epochs_to_best),
                        m.rejected.to_string(),
                    ])?;
                }
            }
            other => eprintln!("skipping {name}: {other} manifests carry no metrics"),
        }
    }
    w.flush().map_err(|e| HarnessError::io("report", e))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Descriptors(a) => cmd_descriptors(a),
        Command::Render(a) => cmd_render(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Split(a) => cmd_split(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
