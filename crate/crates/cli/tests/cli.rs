use brahmi_cli::{Cli, Command};
use brahmi_core::augment::AugmentConfig;
use brahmi_core::dataset::SplitConfig;
use brahmi_core::preprocess::PreprocessConfig;
use brahmi_core::segment::SegmentationParams;
use brahmi_core::RecognitionParams;
use brahmi_net::{Architecture, TrainConfig, TrainHistory, ZooConfig};
use clap::{CommandFactory, Parser};
use serde::Serialize;
use std::path::Path;
use std::process::{Command as Proc, Output};

fn brahmi(args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_brahmi")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field_names<T: Serialize>(cfg: &T) -> Vec<String> {
    match serde_json::to_value(cfg).unwrap() {
        serde_json::Value::Object(m) => m
            .into_iter()
            .filter(|(_, v)| !v.is_object())
            .map(|(k, _)| k)
            .collect(),
        v => panic!("config serialized to {v}"),
    }
}

fn long_flags(sub: &str) -> Vec<String> {
    let cmd = Cli::command();
    let sc = cmd.find_subcommand(sub).unwrap_or_else(|| panic!("no subcommand {sub}"));
    sc.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect()
}

fn assert_fields_have_flags(sub: &str, fields: &[String]) {
    let flags = long_flags(sub);
    for f in fields {
        let flag = f.replace('_', "-");
        let n = flags.iter().filter(|l| **l == flag).count();
        assert_eq!(n, 1, "{sub}: field {f} should map to exactly one --{flag}, flags are {flags:?}");
    }
}

#[test]
fn every_config_field_has_a_flag() {
    let pre = field_names(&PreprocessConfig::default());
    let seg = field_names(&SegmentationParams::default());
    let aug = field_names(&AugmentConfig::default());
    let mut learn = field_names(&SplitConfig::default());
    learn.extend(field_names(&TrainConfig::default()));
    learn.extend(field_names(&ZooConfig::default()));
    learn.extend(aug.clone());
    let mut rec = field_names(&RecognitionParams::default());
    rec.extend(pre.clone());
    rec.extend(seg.clone());
    assert_eq!(pre.len(), 3);
    assert_eq!(seg.len(), 4);
    assert_eq!(aug.len(), 6);
    assert_eq!(rec.len(), 8);

    assert_fields_have_flags("preprocess", &pre);
    assert_fields_have_flags("segment", &[pre.clone(), seg].concat());
    assert_fields_have_flags("augment", &[aug, vec!["seed".into()]].concat());
    assert_fields_have_flags("train", &learn);
    assert_fields_have_flags("evaluate", &learn);
    assert_fields_have_flags("recognize", &rec);
    assert_fields_have_flags("serve", &["body_limit".into(), "token_ttl".into()]);
}

#[test]
fn flag_defaults_match_config_defaults() {
    let cli = Cli::try_parse_from(["brahmi", "recognize", "--image", "p.png", "--model", "m"]).unwrap();
    let Command::Recognize { params, .. } = cli.command else { panic!() };
    assert_eq!(params.config(), RecognitionParams::default());

    let cli = Cli::try_parse_from(["brahmi", "augment", "--data", "d", "--out", "o", "--per-class", "3"]).unwrap();
    let Command::Augment { augment, seed, .. } = cli.command else { panic!() };
    assert_eq!(augment.config(), AugmentConfig::default());
    assert_eq!(seed, 42);

    let cli = Cli::try_parse_from(["brahmi", "train", "--data", "d", "--arch", "lenet", "--out", "m"]).unwrap();
    let Command::Train { data, train, seed, .. } = cli.command else { panic!() };
    assert_eq!(data.split(seed), SplitConfig::default());
    assert_eq!(train.config(Architecture::Lenet, seed), TrainConfig::default());
    assert_eq!(train.zoo(seed), ZooConfig::default());
    let micro = Architecture::parse("mobilenet_micro", None).unwrap();
    assert_eq!(train.config(micro, seed).patience, 4);
}

#[test]
fn flags_reach_configs() {
    let cli = Cli::try_parse_from([
        "brahmi", "segment", "--image", "p.png", "--median-kernel", "5", "--polarity", "ink-light",
        "--threshold-override", "90", "--noise-floor", "1", "--min-band", "4", "--min-gap", "3", "--min-ink", "7",
    ])
    .unwrap();
    let Command::Segment { preprocess, segmentation, .. } = cli.command else { panic!() };
    let p = preprocess.config();
    assert_eq!((p.median_kernel, p.threshold_override), (5, Some(90)));
    assert_eq!(p.polarity, brahmi_core::preprocess::Polarity::InkLight);
    assert_eq!(
        segmentation.config(),
        SegmentationParams { noise_floor: 1, min_band: 4, min_gap: 3, min_ink: 7 }
    );

    let cli = Cli::try_parse_from([
        "brahmi", "augment", "--data", "d", "--out", "o", "--per-class", "3", "--contrast-range", "0.5,1.5",
        "--rotation-deg", "3", "--seed", "9",
    ])
    .unwrap();
    let Command::Augment { augment, seed, .. } = cli.command else { panic!() };
    assert_eq!(augment.config().contrast_range, (0.5, 1.5));
    assert_eq!(augment.config().rotation_deg, 3.0);
    assert_eq!(seed, 9);
}

#[test]
fn usage_errors_exit_two() {
    let none = brahmi(&[]);
    assert_eq!(none.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&none.stderr).contains("Usage"));
    for args in [
        &["preprocess", "--bogus"][..],
        &["recognize", "--image", "p.png"],
        &["segment", "--image", "p.png", "--min-gap", "x"],
        &["frobnicate"],
    ] {
        let o = brahmi(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    let o = brahmi(&["preprocess", "--image", missing.to_str().unwrap(), "--out", "x.png"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = brahmi(&["train", "--data", empty.to_str().unwrap(), "--arch", "lenet", "--out", "m.ckpt"]);
    assert_eq!(o.status.code(), Some(1));
}

fn render(dir: &Path, classes: &str, per_class: &str, seed: &str) -> Output {
    let o = brahmi(&[
        "render-corpus", "--classes", classes, "--per-class", per_class, "--seed", seed, "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn stage_commands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let page = d.join("page.png");
    let corpus = d.join("corpus");
    let o = brahmi(&[
        "render-corpus", "--classes", "4", "--per-class", "3", "--out", corpus.to_str().unwrap(), "--page-out",
        page.to_str().unwrap(), "--page-truth", d.join("truth.txt").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let truth = std::fs::read_to_string(d.join("truth.txt")).unwrap();
    assert_eq!(truth.lines().count(), 2);

    let bin = d.join("bin.pgm");
    let o = brahmi(&["preprocess", "--image", page.to_str().unwrap(), "--out", bin.to_str().unwrap()]);
    assert!(o.status.success());
    let otsu: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(otsu["threshold"].is_u64());
    assert!(std::fs::read(&bin).unwrap().starts_with(b"P5\n"));

    let overlay = d.join("overlay.png");
    let o = brahmi(&["segment", "--image", page.to_str().unwrap(), "--overlay", overlay.to_str().unwrap()]);
    assert!(o.status.success());
    let boxes = brahmi_core::segment::parse_manifest(&stdout(&o)).unwrap();
    assert_eq!(boxes.len(), 10);
    assert_eq!(boxes.iter().filter(|b| b.line_index == 1).count(), 5);
    assert!(overlay.exists());

    let grown = d.join("grown");
    let o = brahmi(&[
        "augment", "--data", corpus.to_str().unwrap(), "--out", grown.to_str().unwrap(), "--per-class", "5",
    ]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(grown.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["provenance"].as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read_dir(grown.join("g000")).unwrap().count(), 5);
}

#[test]
fn identical_invocations_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    render(&a, "3", "4", "7");
    render(&b, "3", "4", "7");
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
    let c = dir.path().join("c");
    render(&c, "3", "4", "8");
    assert_ne!(tree_bytes(&a), tree_bytes(&c));

    let train = |out: &Path| {
        let o = brahmi(&[
            "train", "--data", a.to_str().unwrap(), "--arch", "mobilenet_micro", "--pooling", "max", "--max-epochs",
            "2", "--width", "0.5", "--val-fraction", "0.25", "--augment-per-class", "6", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let (m1, m2) = (dir.path().join("m1.ckpt"), dir.path().join("m2.ckpt"));
    assert_eq!(train(&m1), train(&m2));
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    assert_eq!(
        std::fs::read(m1.with_extension("history.json")).unwrap(),
        std::fs::read(m2.with_extension("history.json")).unwrap()
    );
}

fn parse_row(line: &str) -> (String, f64, f64) {
    let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
    let acc = cells[1].trim_end_matches('%').parse().unwrap();
    (cells[0].to_string(), acc, cells[2].parse().unwrap())
}

#[test]
fn evaluate_row_matches_best_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    render(&data, "4", "10", "3");
    let out = dir.path().join("models");
    let o = brahmi(&[
        "evaluate", "--arch", "mobilenet_micro", "--pooling", "avg", "--data", data.to_str().unwrap(),
        "--max-epochs", "4", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[0].contains("Model") && lines[0].contains("Validation Accuracy") && lines[0].contains("Validation Loss"));
    let (model, acc, loss) = parse_row(lines[2]);
    assert_eq!(model, "MobileNet-micro (with average pooling)");

    let hist: TrainHistory =
        serde_json::from_slice(&std::fs::read(out.join("mobilenet_micro-avg.history.json")).unwrap()).unwrap();
    let best = hist.best();
    assert!((best.val_accuracy * 100.0 - acc).abs() <= 0.005 + 1e-9);
    assert!((best.val_loss - loss).abs() <= 0.00005 + 1e-12);

    // the same run through `train` reproduces the history
    let ck = dir.path().join("single.ckpt");
    let o = brahmi(&[
        "train", "--arch", "mobilenet_micro", "--pooling", "avg", "--data", data.to_str().unwrap(), "--max-epochs",
        "4", "--out", ck.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let again: TrainHistory =
        serde_json::from_slice(&std::fs::read(ck.with_extension("history.json")).unwrap()).unwrap();
    assert_eq!(again, hist);
}

#[test]
fn evaluate_expands_pooling_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    render(&data, "3", "5", "1");
    let o = brahmi(&[
        "evaluate", "--arch", "lenet", "--arch", "mobilenet_micro", "--data", data.to_str().unwrap(),
        "--max-epochs", "1", "--width", "0.25",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let models: Vec<String> = stdout(&o).lines().skip(2).map(|l| parse_row(l).0).collect();
    assert_eq!(
        models,
        ["LeNet", "MobileNet-micro (with max pooling)", "MobileNet-micro (with average pooling)"]
    );
}
