//! Labelled glyph datasets: class-directory trees, label maps, splits and the
//! conversion to network inputs.

use crate::augment::class_seed;
use crate::error::{OcrError, Result};
use crate::image::{decode_image, encode_image, GrayImage, ImageFormat};
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::segment::normalize_glyph;
use brahmi_net::TensorSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

/// Classifier input side used throughout unless overridden.
pub const DEFAULT_SIDE: usize = 32;
/// Fraction of the canvas left blank on each side of a normalized glyph.
pub const GLYPH_MARGIN: f64 = 0.1;

pub const BRAHMI_VOWELS: usize = 6;
pub const BRAHMI_CONSONANTS: usize = 208;
/// Distinct characters in the Ashokan Brahmi inventory modelled here.
pub const BRAHMI_CLASSES: usize = BRAHMI_VOWELS + BRAHMI_CONSONANTS;

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    /// Keeps the given order; duplicates are rejected.
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(OcrError::invalid("labels", format!("duplicate class name {dup:?}")));
        }
        Ok(Self { names })
    }

    pub fn sorted(mut names: Vec<String>) -> Result<Self> {
        names.sort();
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl TryFrom<Vec<String>> for LabelMap {
    type Error = OcrError;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::new(names)
    }
}

impl From<LabelMap> for Vec<String> {
    fn from(m: LabelMap) -> Self {
        m.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image: GrayImage,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    samples: Vec<Sample>,
    labels: LabelMap,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, labels: LabelMap) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| s.label >= labels.len()) {
            return Err(OcrError::invalid(
                "labels",
                format!("sample label {} but only {} classes", s.label, labels.len()),
            ));
        }
        if let Some(first) = samples.first() {
            let dims = (first.image.width(), first.image.height());
            if samples.iter().any(|s| (s.image.width(), s.image.height()) != dims) {
                return Err(OcrError::invalid("samples", "images differ in size"));
            }
        }
        Ok(Self { samples, labels })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(width, height)` shared by every sample.
    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.image.width(), s.image.height()))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.class_members().iter().map(Vec::len).collect()
    }

    /// Sample indices of each class, in dataset order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.labels.len()];
        for (i, s) in self.samples.iter().enumerate() {
            m[s.label].push(i);
        }
        m
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Single-channel network inputs with ink mapped to 1 and paper to 0.
    pub fn to_tensor_set(&self) -> Result<TensorSet> {
        let (w, h) = self.image_dims().ok_or_else(|| OcrError::invalid("samples", "dataset is empty"))?;
        let inputs = self.samples.iter().flat_map(|s| glyph_input(&s.image)).collect();
        let labels = self.samples.iter().map(|s| s.label).collect();
        Ok(TensorSet::new([1, h, w], inputs, labels)?)
    }
}

/// Intensity to network input: `(255 − v) / 255`.
pub fn glyph_input(img: &GrayImage) -> impl Iterator<Item = f64> + '_ {
    img.pixels().iter().map(|&v| (255 - v) as f64 / 255.0)
}

/// Binarizes a glyph image with default preprocessing and fits its ink into
/// a `side`×`side` canvas.
pub fn condition_glyph(img: &GrayImage, side: usize) -> Result<GrayImage> {
    let (bin, _) = preprocess(img, &PreprocessConfig::default())?;
    normalize_glyph(&bin, side, GLYPH_MARGIN)
}

fn is_image_file(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v = fs::read_dir(dir)
        .map_err(|e| OcrError::from(e).at(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| OcrError::from(e).at(dir))?;
    v.sort();
    Ok(v)
}

/// Reads `root/<class>/<image>`; classes are the subdirectories holding at
/// least one PNG or PGM file, in lexicographic order.
pub fn load_class_tree(root: &Path, side: usize) -> Result<Dataset> {
    let mut classes = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let files: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| is_image_file(p)).collect();
        if files.is_empty() {
            continue;
        }
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| OcrError::invalid("labels", "class directory name is not UTF-8").at(&dir))?
            .to_string();
        classes.push((name, files));
    }
    if classes.is_empty() {
        return Err(OcrError::EmptyTree(root.to_path_buf()));
    }
    let labels = LabelMap::new(classes.iter().map(|(n, _)| n.clone()).collect())?;
    let mut samples = Vec::new();
    for (label, (_, files)) in classes.iter().enumerate() {
        for f in files {
            let load = || -> Result<GrayImage> {
                let bytes = fs::read(f)?;
                condition_glyph(&decode_image(&bytes)?.into_gray(), side)
            };
            samples.push(Sample {
                image: load().map_err(|e| e.at(f))?,
                label,
            });
        }
    }
    Dataset::new(samples, labels)
}

/// Writes `root/<class>/<index>.png` plus an optional `manifest.json`.
pub fn write_class_tree(root: &Path, ds: &Dataset, manifest: Option<&serde_json::Value>) -> Result<()> {
    for name in ds.labels().names() {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|e| OcrError::from(e).at(&dir))?;
    }
    for (i, s) in ds.samples().iter().enumerate() {
        let path = root.join(ds.labels().name(s.label)).join(format!("{i:06}.png"));
        fs::write(&path, encode_image(&s.image, ImageFormat::Png)).map_err(|e| OcrError::from(e).at(&path))?;
    }
    if let Some(m) = manifest {
        let path = root.join("manifest.json");
        let text = serde_json::to_string_pretty(m).expect("JSON value serializes");
        fs::write(&path, text).map_err(|e| OcrError::from(e).at(&path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub val_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            seed: 42,
            stratified: true,
        }
    }
}

/// Shuffles each class (or the whole set when not stratified) and moves
/// `⌈val_fraction·n⌉` samples to validation. Both halves keep dataset order.
pub fn stratified_split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(OcrError::invalid("val_fraction", format!("must be in (0, 1), got {}", cfg.val_fraction)));
    }
    let groups = if cfg.stratified {
        let members = ds.class_members();
        for (c, m) in members.iter().enumerate() {
            if m.len() < 2 {
                return Err(OcrError::ClassTooSmall {
                    class: ds.labels().name(c).to_string(),
                    size: m.len(),
                });
            }
        }
        members
    } else {
        vec![(0..ds.len()).collect()]
    };
    let mut is_val = vec![false; ds.len()];
    for (g, mut idx) in groups.into_iter().enumerate() {
        let take = (cfg.val_fraction * idx.len() as f64 - 1e-9).ceil() as usize;
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(class_seed(cfg.seed, g)));
        for &i in &idx[..take.min(idx.len())] {
            is_val[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| is_val[i]);
    Ok((ds.subset(&train), ds.subset(&val)))
}
