use std::fs;
use std::path::Path;

use brahmi_core::augment::{expand_dataset_with, sample_params, AugmentConfig};
use brahmi_core::dataset::{load_class_tree, stratified_split, write_class_tree, SplitConfig};
use brahmi_core::image::{decode_image, encode_image, ImageFormat};
use brahmi_core::synth::render_synthetic_corpus;
use brahmi_core::{Exec, GrayImage, OcrError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bar(vertical: bool) -> GrayImage {
    GrayImage::from_fn(20, 20, |x, y| {
        let on = if vertical { (8..12).contains(&x) && (3..17).contains(&y) } else { (3..17).contains(&x) && (8..12).contains(&y) };
        if on { 10 } else { 245 }
    })
}

fn put(path: &Path, img: &GrayImage, fmt: ImageFormat) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, encode_image(img, fmt)).unwrap();
}

#[test]
fn class_tree_loads_in_lexicographic_order() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    put(&root.join("ba/1.png"), &bar(false), ImageFormat::Png);
    put(&root.join("a/1.png"), &bar(true), ImageFormat::Png);
    put(&root.join("a/2.pgm"), &bar(true), ImageFormat::Pgm);
    fs::write(root.join("a/notes.txt"), "not an image").unwrap();
    fs::create_dir_all(root.join("empty")).unwrap();
    fs::write(root.join("manifest.json"), "{}").unwrap();

    let ds = load_class_tree(root, 16).unwrap();
    assert_eq!(ds.labels().names(), ["a", "ba"]);
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.class_counts(), [2, 1]);
    assert_eq!(ds.image_dims(), Some((16, 16)));
    assert_eq!(ds.samples()[0], ds.samples()[1]);
    assert_ne!(ds.samples()[0].image, ds.samples()[2].image);
}

#[test]
fn empty_or_broken_trees_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_class_tree(dir.path(), 16), Err(OcrError::EmptyTree(_))));
    assert!(load_class_tree(&dir.path().join("missing"), 16).is_err());
    fs::create_dir_all(dir.path().join("a")).unwrap();
    fs::write(dir.path().join("a/bad.png"), b"not a png").unwrap();
    let err = load_class_tree(dir.path(), 16).unwrap_err();
    assert!(err.to_string().contains("bad.png"), "{err}");
}

#[test]
fn written_tree_reloads_unchanged() {
    let ds = render_synthetic_corpus(4, 3, 24, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_class_tree(dir.path(), &ds, Some(&serde_json::json!({ "seed": 5 }))).unwrap();
    let back = load_class_tree(dir.path(), 24).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.class_counts(), ds.class_counts());
    assert!(dir.path().join("manifest.json").is_file());
    for (i, s) in ds.samples().iter().enumerate() {
        let path = dir.path().join(ds.labels().name(s.label)).join(format!("{i:06}.png"));
        let stored = decode_image(&fs::read(path).unwrap()).unwrap().into_gray();
        assert_eq!(stored, s.image);
    }
}

#[test]
fn nearest_centroid_separates_synthetic_classes() {
    let ds = render_synthetic_corpus(10, 40, 32, 9).unwrap();
    let cfg = SplitConfig { val_fraction: 0.25, seed: 1, stratified: true };
    let (train, val) = stratified_split(&ds, &cfg).unwrap();
    let n = 32 * 32;
    let mut centroids = vec![vec![0.0; n]; 10];
    for s in train.samples() {
        for (c, &v) in centroids[s.label].iter_mut().zip(s.image.pixels()) {
            *c += v as f64;
        }
    }
    for (c, count) in centroids.iter_mut().zip(train.class_counts()) {
        c.iter_mut().for_each(|v| *v /= count as f64);
    }
    let correct = val
        .samples()
        .iter()
        .filter(|s| {
            let dist = |c: &Vec<f64>| c.iter().zip(s.image.pixels()).map(|(a, &b)| (a - b as f64).powi(2)).sum::<f64>();
            let best = (0..10).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
            best == s.label
        })
        .count();
    assert!(correct * 10 > val.len() * 8, "{correct}/{}", val.len());
}

fn augment_config() -> impl Strategy<Value = AugmentConfig> {
    (0.0..30.0f64, 0.0..0.5f64, 0.0..0.3f64, 0.0..30.0f64, 0.0..60.0f64, 0.5..1.0f64, 1.0..1.5f64).prop_map(
        |(rotation_deg, scale_factor, shift_frac, shear_deg, brightness_delta, lo, hi)| AugmentConfig {
            rotation_deg,
            scale_factor,
            shift_frac,
            shear_deg,
            brightness_delta,
            contrast_range: (lo, hi),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drawn_params_stay_in_bounds(cfg in augment_config(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = sample_params(&cfg, &mut rng);
            prop_assert!(p.rotation.abs() <= cfg.rotation_deg);
            prop_assert!((p.scale - 1.0).abs() <= cfg.scale_factor + 1e-12);
            prop_assert!(p.shift_x.abs() <= cfg.shift_frac && p.shift_y.abs() <= cfg.shift_frac);
            prop_assert!(p.shear.abs() <= cfg.shear_deg);
            prop_assert!(p.brightness.abs() <= cfg.brightness_delta);
            prop_assert!(cfg.contrast_range.0 <= p.contrast && p.contrast <= cfg.contrast_range.1);
        }
    }

    #[test]
    fn expansion_keeps_originals_and_fills_classes(cfg in augment_config(), seed in any::<u64>(), target in 3usize..7) {
        let ds = render_synthetic_corpus(3, 2, 16, 3).unwrap();
        let seq = expand_dataset_with(&ds, target, &cfg, seed, Exec::Sequential).unwrap();
        let par = expand_dataset_with(&ds, target, &cfg, seed, Exec::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        let out = &seq.dataset;
        prop_assert_eq!(&out.samples()[..ds.len()], ds.samples());
        prop_assert_eq!(out.class_counts(), vec![target; 3]);
        prop_assert_eq!(seq.provenance.len(), out.len() - ds.len());
        for p in &seq.provenance {
            prop_assert_eq!(out.samples()[p.index].label, ds.samples()[p.source].label);
        }
    }
}
