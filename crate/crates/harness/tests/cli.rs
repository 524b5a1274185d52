use std::path::PathBuf;
use std::process::{Command, Output};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn weakchem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakchem"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("weakchem-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&weakchem(&["no-such-command"])), 1);
    assert_eq!(code(&weakchem(&["render"])), 1);
    assert_eq!(code(&weakchem(&["--help"])), 0);
}

#[test]
fn training_requires_seed() {
    let dir = scratch("seed");
    let out = dir.join("m.wcn");
    let o = weakchem(&[
        "pretrain",
        "--corpus",
        &format!("{DATA}/corpus.smi"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    assert!(!out.exists());
}

#[test]
fn data_errors_exit_2() {
    let dir = scratch("data");
    let o = weakchem(&[
        "render",
        "--smiles",
        "C1CC",
        "--output",
        dir.join("x.raw").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("SMILES"));
    let o = weakchem(&[
        "split",
        "--dataset",
        dir.join("missing.csv").to_str().unwrap(),
        "--label-columns",
        "y",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn descriptors_writes_label_matrix_and_rejects() {
    let dir = scratch("desc");
    let input = dir.join("in.smi");
    std::fs::write(&input, "CCC\nnot_a_smiles\nCCCC\n").unwrap();
    let rejects = dir.join("rejects.csv");
    let o = weakchem(&[
        "descriptors",
        "--input",
        input.to_str().unwrap(),
        "--names",
        "wiener,balaban_j",
        "--rejects",
        rejects.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "wiener,balaban_j");
    assert!(lines[1].starts_with("4,"));
    assert_eq!(lines.len(), 3);
    let rejected = std::fs::read_to_string(rejects).unwrap();
    assert!(rejected.contains("not_a_smiles"));
}

#[test]
fn render_and_encode_dumps() {
    let dir = scratch("dump");
    let img = dir.join("ethanol.raw");
    let o = weakchem(&[
        "render",
        "--smiles",
        "CCO",
        "--scheme",
        "engd",
        "--size",
        "32",
        "--output",
        img.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&img).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    assert_eq!(&bytes[..header_end], b"32 32 4");
    assert_eq!(bytes.len() - header_end - 1, 32 * 32 * 4 * 4);

    let onehot = dir.join("ethanol.onehot");
    let vocab = dir.join("vocab.txt");
    let o = weakchem(&[
        "encode",
        "--smiles",
        "OCC",
        "--corpus",
        &format!("{DATA}/corpus.smi"),
        "--length",
        "10",
        "--output",
        onehot.to_str().unwrap(),
        "--vocab-out",
        vocab.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = std::fs::read_to_string(&vocab).unwrap().lines().count();
    let bytes = std::fs::read(&onehot).unwrap();
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    assert_eq!(String::from_utf8_lossy(&bytes[..header_end]), format!("10 {v}"));
    let values: Vec<f32> = bytes[header_end + 1..]
        .chunks(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(values.len(), 10 * v);
    assert_eq!(values.iter().sum::<f32>(), 10.0);
}

#[test]
fn split_plan_is_deterministic() {
    let dir = scratch("split");
    let toy = format!("{DATA}/toy_hydroxyl.csv");
    let run = |name: &str| {
        let out = dir.join(name);
        let o = weakchem(&[
            "split",
            "--dataset",
            &toy,
            "--label-columns",
            "label",
            "--seed",
            "5",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let plan: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(plan["test"].as_array().unwrap().len(), 100);
    assert_eq!(plan["folds"].as_array().unwrap().len(), 5);
}

#[test]
fn config_file_sets_flags_and_flags_win() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[dataset]\nlabel_columns = [\"label\"]\n[finetune]\ntest_fraction = 0.5\n",
    )
    .unwrap();
    let toy = format!("{DATA}/toy_hydroxyl.csv");
    let out = dir.join("plan.json");
    let run = |extra: &[&str]| {
        let mut args = vec![
            "split",
            "--config",
            cfg.to_str().unwrap(),
            "--dataset",
            &toy,
            "--output",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = weakchem(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        plan
    };
    let from_file = run(&[]);
    assert_eq!(from_file["test"].as_array().unwrap().len(), 300);
    assert_eq!(from_file["seed"], 5);
    let overridden = run(&["--test-fraction", "0.25", "--seed", "6"]);
    assert_eq!(overridden["test"].as_array().unwrap().len(), 150);
    assert_eq!(overridden["seed"], 6);
}

#[test]
fn pretrain_finetune_sweep_evaluate_report() {
    let dir = scratch("e2e");
    let corpus = dir.join("corpus.smi");
    let text = std::fs::read_to_string(format!("{DATA}/corpus.smi")).unwrap();
    std::fs::write(&corpus, text.lines().take(120).collect::<Vec<_>>().join("\n")).unwrap();
    let model = dir.join("m.wcn");
    let m = model.to_str().unwrap();
    let toy = format!("{DATA}/toy_hydroxyl.csv");
    let ok = |o: Output| {
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    ok(weakchem(&[
        "pretrain",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        m,
        "--seed",
        "1",
        "--size",
        "32",
        "--depth",
        "1",
        "--filters",
        "4",
        "--max-epochs",
        "1",
        "--descriptors",
        "wiener,hbd",
    ]));
    for suffix in [".manifest.json", ".history.csv", ".rejects.csv"] {
        assert!(dir.join(format!("m.wcn{suffix}")).exists(), "{suffix}");
    }

    let ft = dir.join("ft");
    let printed = ok(weakchem(&[
        "finetune",
        "--model",
        m,
        "--dataset",
        &toy,
        "--label-columns",
        "label",
        "--out-dir",
        ft.to_str().unwrap(),
        "--seed",
        "2",
        "--folds",
        "0",
        "--max-epochs",
        "1",
        "--save-models",
    ]));
    assert!(printed.contains("mean validation auc"));
    let metrics = std::fs::read_to_string(ft.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("fold,validation_auc,test_auc,epochs_to_best"));
    assert_eq!(metrics.lines().count(), 3);

    let fold_model = ft.join("fold0.wcn");
    let printed = ok(weakchem(&[
        "evaluate",
        "--model",
        fold_model.to_str().unwrap(),
        "--dataset",
        &toy,
        "--label-columns",
        "label",
    ]));
    assert!(printed.starts_with("auc "), "{printed}");

    let sw = dir.join("sweep");
    ok(weakchem(&[
        "sweep",
        "--model",
        m,
        "--dataset",
        &toy,
        "--label-columns",
        "label",
        "--out-dir",
        sw.to_str().unwrap(),
        "--seed",
        "2",
        "--seeds",
        "3,4",
        "--folds",
        "0",
        "--max-epochs",
        "1",
    ]));
    let table = std::fs::read_to_string(sw.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "freeze_k,trainable_segments,mean_auc,mean_epochs_to_best,seed_3,seed_4"
    );
    // depth 1: stem, one block pair, head = 4 segments
    assert_eq!(lines.len(), 1 + 5);
    assert_eq!(lines[1].split(',').nth(2), lines[2].split(',').nth(2));

    let report = ok(weakchem(&[
        "report",
        ft.join("manifest.json").to_str().unwrap(),
        sw.join("manifest.json").to_str().unwrap(),
    ]));
    assert_eq!(report.lines().count(), 1 + 1 + 5);
    assert!(report.lines().nth(1).unwrap().contains(",finetune,pretrained,"));

    let fresh = dir.join("fresh");
    ok(weakchem(&[
        "finetune",
        "--fresh",
        "--dataset",
        &toy,
        "--label-columns",
        "label",
        "--out-dir",
        fresh.to_str().unwrap(),
        "--seed",
        "2",
        "--folds",
        "0",
        "--max-epochs",
        "1",
        "--size",
        "32",
        "--depth",
        "1",
        "--filters",
        "4",
    ]));
    let manifest = std::fs::read_to_string(fresh.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"init\": \"random\""));
}
