//! Seeded geometric and photometric augmentation.
//!
//! Every random draw comes from [`ChaCha8Rng`]; a class's stream is seeded
//! from the run seed mixed with the class index, so expansion output does not
//! depend on how classes are scheduled across threads.

use crate::dataset::{Dataset, Sample};
use crate::error::{OcrError, Result};
use crate::image::GrayImage;
use brahmi_net::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Recorded in manifests so an expansion can be reproduced.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9)";

const FILL: f64 = 255.0;
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Rotation drawn from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Zoom drawn from `[1 - scale_factor, 1 + scale_factor]`.
    pub scale_factor: f64,
    /// Per-axis translation as a fraction of that dimension.
    pub shift_frac: f64,
    pub shear_deg: f64,
    /// Additive intensity offset bound.
    pub brightness_delta: f64,
    /// Multiplicative contrast bounds around mid-gray.
    pub contrast_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_deg: 10.0,
            scale_factor: 0.2,
            shift_frac: 0.15,
            shear_deg: 10.0,
            brightness_delta: 25.0,
            contrast_range: (0.8, 1.2),
        }
    }
}

impl AugmentConfig {
    /// Draws nothing but identities.
    pub fn none() -> Self {
        Self {
            rotation_deg: 0.0,
            scale_factor: 0.0,
            shift_frac: 0.0,
            shear_deg: 0.0,
            brightness_delta: 0.0,
            contrast_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let magnitudes = [
            ("rotation_deg", self.rotation_deg),
            ("scale_factor", self.scale_factor),
            ("shift_frac", self.shift_frac),
            ("shear_deg", self.shear_deg),
            ("brightness_delta", self.brightness_delta),
        ];
        for (field, v) in magnitudes {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OcrError::invalid(field, format!("must be a finite non-negative number, got {v}")));
            }
        }
        if self.scale_factor >= 1.0 {
            return Err(OcrError::invalid("scale_factor", "must be below 1"));
        }
        if self.shear_deg >= 90.0 {
            return Err(OcrError::invalid("shear_deg", "must be below 90"));
        }
        let (lo, hi) = self.contrast_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(OcrError::invalid("contrast_range", format!("need 0 < low <= high, got ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub rotation: f64,
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub shear: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams {
        rotation: 0.0,
        scale: 1.0,
        shift_x: 0.0,
        shift_y: 0.0,
        shear: 0.0,
        brightness: 0.0,
        contrast: 1.0,
    };
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

fn symmetric<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    rng.random_range(-bound..=bound)
}

/// Field order of the draws is fixed: rotation, scale, shift x, shift y,
/// shear, brightness, contrast.
pub fn sample_params<R: Rng>(cfg: &AugmentConfig, rng: &mut R) -> AugmentParams {
    AugmentParams {
        rotation: symmetric(rng, cfg.rotation_deg),
        scale: 1.0 + symmetric(rng, cfg.scale_factor),
        shift_x: symmetric(rng, cfg.shift_frac),
        shift_y: symmetric(rng, cfg.shift_frac),
        shear: symmetric(rng, cfg.shear_deg),
        brightness: symmetric(rng, cfg.brightness_delta),
        contrast: rng.random_range(cfg.contrast_range.0..=cfg.contrast_range.1),
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Resamples `img` through `p ↦ c + t + R·S·H·(p − c)`, where `c` is the
/// pixel-grid center, `H` a horizontal shear, `S` the zoom, `R` the rotation
/// and `t` the shift in pixels. Each output pixel is read back through the
/// inverse map with bilinear interpolation; samples outside the source read
/// as white.
pub fn affine_transform(img: &GrayImage, p: &AugmentParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (tx, ty) = (p.shift_x * w as f64, p.shift_y * h as f64);
    let (sin, cos) = p.rotation.to_radians().sin_cos();
    let shear = p.shear.to_radians().tan();
    let px = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            FILL
        } else {
            img.get(x as usize, y as usize) as f64
        }
    };
    GrayImage::from_fn(w, h, |ox, oy| {
        let (dx, dy) = (ox as f64 - cx - tx, oy as f64 - cy - ty);
        // R⁻¹
        let (rx, ry) = (cos * dx + sin * dy, -sin * dx + cos * dy);
        // S⁻¹
        let (sx, sy) = (rx / p.scale, ry / p.scale);
        // H⁻¹
        let (ix, iy) = (snap(sx - shear * sy + cx), snap(sy + cy));
        let (x0, y0) = (ix.floor(), iy.floor());
        let (fx, fy) = (ix - x0, iy - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = px(x0, y0) * (1.0 - fx) + if fx > 0.0 { px(x0 + 1, y0) * fx } else { 0.0 };
        let v = if fy > 0.0 {
            let bottom = px(x0, y0 + 1) * (1.0 - fx) + if fx > 0.0 { px(x0 + 1, y0 + 1) * fx } else { 0.0 };
            top * (1.0 - fy) + bottom * fy
        } else {
            top
        };
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// `clamp(round(contrast·(v − 128) + 128 + brightness))`.
pub fn adjust_photometric(img: &GrayImage, brightness: f64, contrast: f64) -> GrayImage {
    let lut: Vec<u8> = (0..256)
        .map(|v| (contrast * (v as f64 - 128.0) + 128.0 + brightness).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::from_fn(img.width(), img.height(), |x, y| lut[img.get(x, y) as usize])
}

pub fn augment(img: &GrayImage, p: &AugmentParams) -> GrayImage {
    adjust_photometric(&affine_transform(img, p), p.brightness, p.contrast)
}

/// Seed of the stream used for one class.
pub fn class_seed(seed: u64, class: usize) -> u64 {
    // splitmix64 finalizer over the seed offset by the class index
    let mut z = seed.wrapping_add((class as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Where an augmented sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Index of the sample in the expanded dataset.
    pub index: usize,
    /// Index of the original it was derived from.
    pub source: usize,
    pub params: AugmentParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub dataset: Dataset,
    pub provenance: Vec<Provenance>,
}

pub fn expand_dataset(ds: &Dataset, per_class_target: usize, cfg: &AugmentConfig, seed: u64) -> Result<Dataset> {
    expand_dataset_with(ds, per_class_target, cfg, seed, Exec::default()).map(|e| e.dataset)
}

/// Keeps every original in place and appends, class by class, augmented
/// copies made by cycling over that class's originals until each class holds
/// exactly `per_class_target` samples.
pub fn expand_dataset_with(
    ds: &Dataset,
    per_class_target: usize,
    cfg: &AugmentConfig,
    seed: u64,
    exec: Exec,
) -> Result<Expansion> {
    cfg.validate()?;
    let members = ds.class_members();
    for (class, idx) in members.iter().enumerate() {
        let name = ds.labels().name(class).to_string();
        if idx.is_empty() {
            return Err(OcrError::EmptyClass(name));
        }
        if idx.len() > per_class_target {
            return Err(OcrError::TargetBelowClassSize {
                class: name,
                size: idx.len(),
                target: per_class_target,
            });
        }
    }
    let generated = exec.map_range(members.len(), |class| {
        let idx = &members[class];
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, class));
        (0..per_class_target - idx.len())
            .map(|k| {
                let source = idx[k % idx.len()];
                let params = sample_params(cfg, &mut rng);
                (source, params, augment(&ds.samples()[source].image, &params))
            })
            .collect::<Vec<_>>()
    });
    let mut samples = ds.samples().to_vec();
    let mut provenance = Vec::new();
    for (class, batch) in generated.into_iter().enumerate() {
        for (source, params, image) in batch {
            provenance.push(Provenance {
                index: samples.len(),
                source,
                params,
            });
            samples.push(Sample { image, label: class });
        }
    }
    Ok(Expansion {
        dataset: Dataset::new(samples, ds.labels().clone())?,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabelMap;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| (x * 37 + y * 11) as u8)
    }

    #[test]
    fn identity_is_exact() {
        let img = ramp(7, 5);
        assert_eq!(affine_transform(&img, &AugmentParams::IDENTITY), img);
        assert_eq!(adjust_photometric(&img, 0.0, 1.0), img);
    }

    #[test]
    fn half_turn_is_point_reflection() {
        let img = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let p = AugmentParams { rotation: 180.0, ..AugmentParams::IDENTITY };
        assert_eq!(affine_transform(&img, &p).pixels(), [4, 3, 2, 1]);
    }

    #[test]
    fn integer_shift() {
        let img = GrayImage::new(4, 1, vec![10, 20, 30, 40]).unwrap();
        let p = AugmentParams { shift_x: 0.5, ..AugmentParams::IDENTITY };
        assert_eq!(affine_transform(&img, &p).pixels(), [255, 255, 10, 20]);
    }

    #[test]
    fn photometric_examples() {
        let img = GrayImage::new(3, 1, vec![0, 128, 255]).unwrap();
        assert_eq!(adjust_photometric(&img, 0.0, 1.7).get(1, 0), 128);
        assert_eq!(adjust_photometric(&img, 300.0, 1.0).get(0, 0), 255);
        assert_eq!(adjust_photometric(&img, -10.0, 0.5).pixels(), [54, 118, 182]);
    }

    #[test]
    fn zero_config_draws_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(sample_params(&AugmentConfig::none(), &mut rng), AugmentParams::IDENTITY);
        }
    }

    #[test]
    fn rotation_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rots: Vec<f64> = (0..10_000)
            .map(|_| sample_params(&AugmentConfig::default(), &mut rng).rotation)
            .collect();
        let min = rots.iter().cloned().fold(f64::MAX, f64::min);
        let max = rots.iter().cloned().fold(f64::MIN, f64::max);
        let mean = rots.iter().sum::<f64>() / rots.len() as f64;
        assert!((-10.0..=-9.0).contains(&min), "{min}");
        assert!((9.0..=10.0).contains(&max), "{max}");
        assert!(mean.abs() < 0.3, "{mean}");
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        let bad = AugmentConfig { contrast_range: (0.0, 1.0), ..Default::default() };
        assert!(matches!(bad.validate(), Err(OcrError::InvalidParameter { field: "contrast_range", .. })));
        let bad = AugmentConfig { rotation_deg: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn tiny_dataset() -> Dataset {
        let labels = LabelMap::new(vec!["a".into(), "b".into()]).unwrap();
        let samples = vec![
            Sample { image: ramp(6, 6), label: 0 },
            Sample { image: GrayImage::filled(6, 6, 40), label: 1 },
            Sample { image: ramp(6, 6), label: 1 },
        ];
        Dataset::new(samples, labels).unwrap()
    }

    #[test]
    fn expansion_counts_and_originals() {
        let ds = tiny_dataset();
        let ex = expand_dataset_with(&ds, 5, &AugmentConfig::default(), 7, Exec::Sequential).unwrap();
        let out = &ex.dataset;
        assert_eq!(out.len(), 10);
        assert_eq!(&out.samples()[..3], ds.samples());
        assert_eq!(out.class_counts(), [5, 5]);
        for p in &ex.provenance {
            assert_eq!(out.samples()[p.index].label, ds.samples()[p.source].label);
        }
        // class b cycles over its two originals
        let b: Vec<usize> = ex.provenance.iter().filter(|p| p.index >= 7).map(|p| p.source).collect();
        assert_eq!(b, [1, 2, 1]);
    }

    #[test]
    fn expansion_is_deterministic_and_schedule_free() {
        let ds = tiny_dataset();
        let cfg = AugmentConfig::default();
        let a = expand_dataset_with(&ds, 6, &cfg, 1, Exec::Sequential).unwrap();
        let b = expand_dataset_with(&ds, 6, &cfg, 1, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = expand_dataset_with(&ds, 6, &cfg, 2, Exec::Sequential).unwrap();
        assert_ne!(a.provenance, c.provenance);
    }

    #[test]
    fn target_equal_to_size_is_noop() {
        let ds = tiny_dataset();
        let labels = LabelMap::new(vec!["a".into()]).unwrap();
        let one = Dataset::new(vec![ds.samples()[0].clone()], labels).unwrap();
        assert_eq!(expand_dataset(&one, 1, &AugmentConfig::default(), 0).unwrap(), one);
        assert!(matches!(
            expand_dataset(&ds, 1, &AugmentConfig::default(), 0),
            Err(OcrError::TargetBelowClassSize { .. })
        ));
    }

    #[test]
    fn empty_class_is_rejected() {
        let labels = LabelMap::new(vec!["a".into(), "b".into()]).unwrap();
        let ds = Dataset::new(vec![Sample { image: ramp(3, 3), label: 0 }], labels).unwrap();
        assert!(matches!(expand_dataset(&ds, 2, &AugmentConfig::default(), 0), Err(OcrError::EmptyClass(c)) if c == "b"));
    }
}
