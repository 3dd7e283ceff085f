//! Median denoising and Otsu binarization.

use crate::error::{OcrError, Result};
use crate::image::{BinaryImage, GrayImage};
use brahmi_net::Exec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; 256],
    total: u64,
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        Self {
            total: bins.iter().sum(),
            bins,
        }
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtsuResult {
    pub threshold: u8,
    pub within_class_variance: f64,
    /// Fractions of pixels at or below / above the threshold.
    pub class_weights: (f64, f64),
    /// Mean intensity of each class; 0 for an empty class.
    pub class_means: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Ink is whichever class is the minority.
    #[default]
    Auto,
    InkDark,
    InkLight,
}

impl std::str::FromStr for Polarity {
    type Err = OcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Polarity::Auto),
            "ink_dark" | "ink-dark" => Ok(Polarity::InkDark),
            "ink_light" | "ink-light" => Ok(Polarity::InkLight),
            _ => Err(OcrError::invalid("polarity", format!("unknown polarity {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub median_kernel: usize,
    pub polarity: Polarity,
    pub threshold_override: Option<u32>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            median_kernel: 3,
            polarity: Polarity::Auto,
            threshold_override: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_kernel == 0 || self.median_kernel % 2 == 0 {
            return Err(OcrError::invalid(
                "median_kernel",
                format!("must be odd and at least 1, got {}", self.median_kernel),
            ));
        }
        if let Some(t) = self.threshold_override {
            if t > 255 {
                return Err(OcrError::invalid("threshold_override", format!("must be in 0..=255, got {t}")));
            }
        }
        Ok(())
    }
}

pub fn median_blur(img: &GrayImage, kernel: usize) -> Result<GrayImage> {
    median_blur_with(img, kernel, Exec::default())
}

/// Exact windowed median with edge replication. Each row keeps a running
/// 256-bin histogram that is updated by one column per step, so the cost per
/// pixel is O(kernel) instead of O(kernel² log kernel).
pub fn median_blur_with(img: &GrayImage, kernel: usize, exec: Exec) -> Result<GrayImage> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(OcrError::EvenKernel(kernel));
    }
    if kernel == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let r = (kernel / 2) as isize;
    let rank = (kernel * kernel / 2) as u32;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0u8; w * h];
    exec.for_each_chunk_mut(&mut out, w, |y, row| {
        let rows: Vec<&[u8]> = (-r..=r).map(|dy| img.row(clamp(y as isize + dy, h))).collect();
        let mut hist = [0u32; 256];
        let column = |hist: &mut [u32; 256], x: isize, delta: i32| {
            let x = clamp(x, w);
            for line in &rows {
                let b = &mut hist[line[x] as usize];
                *b = (*b as i32 + delta) as u32;
            }
        };
        for dx in -r..=r {
            column(&mut hist, dx, 1);
        }
        for (x, slot) in row.iter_mut().enumerate() {
            if x > 0 {
                column(&mut hist, x as isize - 1 - r, -1);
                column(&mut hist, x as isize + r, 1);
            }
            let mut seen = 0;
            for (v, &c) in hist.iter().enumerate() {
                seen += c;
                if seen > rank {
                    *slot = v as u8;
                    break;
                }
            }
        }
    });
    GrayImage::new(w, h, out)
}

pub fn compute_histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &p in img.pixels() {
        bins[p as usize] += 1;
    }
    Histogram::from_bins(bins)
}

/// `s1²/n1 + s2²/n2` as an exact fraction when it fits in 128 bits.
/// Minimizing within-class variance is the same as maximizing this, since
/// `N·σ²w = Σv² − s1²/n1 − s2²/n2`.
#[derive(Clone, Copy)]
struct Separation {
    num: u128,
    den: u128,
}

impl Separation {
    fn at(n1: u128, s1: u128, n2: u128, s2: u128) -> Option<Self> {
        let sq = |s: u128| s.checked_mul(s);
        Some(match (n1, n2) {
            (0, _) => Separation { num: sq(s2)?, den: n2 },
            (_, 0) => Separation { num: sq(s1)?, den: n1 },
            _ => Separation {
                num: sq(s1)?.checked_mul(n2)?.checked_add(sq(s2)?.checked_mul(n1)?)?,
                den: n1.checked_mul(n2)?,
            },
        })
    }

    /// `Some(true)` if strictly greater than `other`, `None` on overflow.
    fn exceeds(&self, other: &Separation) -> Option<bool> {
        Some(self.num.checked_mul(other.den)? > other.num.checked_mul(self.den)?)
    }
}

fn separation_f64(n1: u128, s1: u128, n2: u128, s2: u128) -> f64 {
    let term = |n: u128, s: u128| if n == 0 { 0.0 } else { (s as f64) * (s as f64) / n as f64 };
    term(n1, s1) + term(n2, s2)
}

/// Smallest threshold minimizing within-class variance, where class 1 is
/// intensities `0..=T`. The search is exact in integer arithmetic for any
/// image up to ~10^8 pixels; beyond that it falls back to `f64`.
pub fn otsu_threshold(hist: &Histogram) -> Result<OtsuResult> {
    if hist.total == 0 {
        return Err(OcrError::EmptyHistogram);
    }
    let n = hist.total as u128;
    let s: u128 = hist.bins.iter().enumerate().map(|(v, &c)| v as u128 * c as u128).sum();
    let (mut n1, mut s1) = (0u128, 0u128);
    let mut exact: Option<Vec<Separation>> = Some(Vec::with_capacity(256));
    let mut approx = Vec::with_capacity(256);
    for (v, &c) in hist.bins.iter().enumerate() {
        n1 += c as u128;
        s1 += v as u128 * c as u128;
        approx.push(separation_f64(n1, s1, n - n1, s - s1));
        if let Some(list) = exact.as_mut() {
            match Separation::at(n1, s1, n - n1, s - s1) {
                Some(sep) => list.push(sep),
                None => exact = None,
            }
        }
    }
    let exact_best = exact.and_then(|list| {
        let mut best = 0;
        for t in 1..256 {
            if list[t].exceeds(&list[best])? {
                best = t;
            }
        }
        Some(best)
    });
    let threshold = exact_best.unwrap_or_else(|| {
        let mut best = 0;
        for t in 1..256 {
            if approx[t] > approx[best] {
                best = t;
            }
        }
        best
    });
    Ok(stats_at(hist, threshold as u8))
}

/// Class statistics of `hist` split at `threshold`, with a two-pass variance.
pub fn stats_at(hist: &Histogram, threshold: u8) -> OtsuResult {
    let t = threshold as usize;
    let total = hist.total as f64;
    let class = |range: std::ops::Range<usize>| {
        let n: u64 = hist.bins[range.clone()].iter().sum();
        if n == 0 {
            return (0.0, 0.0, 0.0);
        }
        let mean = range.clone().map(|v| v as f64 * hist.bins[v] as f64).sum::<f64>() / n as f64;
        let ss: f64 = range.map(|v| hist.bins[v] as f64 * (v as f64 - mean).powi(2)).sum();
        (n as f64 / total, mean, ss)
    };
    let (w1, m1, ss1) = class(0..t + 1);
    let (w2, m2, ss2) = class(t + 1..256);
    OtsuResult {
        threshold,
        within_class_variance: (ss1 + ss2) / total,
        class_weights: (w1, w2),
        class_means: (m1, m2),
    }
}

pub fn binarize(img: &GrayImage, threshold: u8, polarity: Polarity) -> BinaryImage {
    let dark = |p: &u8| *p <= threshold;
    let pixels: Vec<bool> = match polarity {
        Polarity::InkDark => img.pixels().iter().map(dark).collect(),
        Polarity::InkLight => img.pixels().iter().map(|p| !dark(p)).collect(),
        Polarity::Auto => {
            let mut px: Vec<bool> = img.pixels().iter().map(dark).collect();
            let fg = px.iter().filter(|&&b| b).count();
            if 2 * fg > px.len() {
                px.iter_mut().for_each(|b| *b = !*b);
            }
            px
        }
    };
    BinaryImage::new(img.width(), img.height(), pixels).expect("same dimensions as the source")
}

pub fn preprocess(img: &GrayImage, cfg: &PreprocessConfig) -> Result<(BinaryImage, OtsuResult)> {
    preprocess_with(img, cfg, Exec::default())
}

/// Median blur then binarization. With a threshold override the returned
/// statistics describe the split at the override, not the Otsu optimum.
pub fn preprocess_with(img: &GrayImage, cfg: &PreprocessConfig, exec: Exec) -> Result<(BinaryImage, OtsuResult)> {
    cfg.validate()?;
    let blurred = median_blur_with(img, cfg.median_kernel, exec)?;
    let hist = compute_histogram(&blurred);
    let otsu = match cfg.threshold_override {
        Some(t) => stats_at(&hist, t as u8),
        None => otsu_threshold(&hist)?,
    };
    Ok((binarize(&blurred, otsu.threshold, cfg.polarity), otsu))
}
