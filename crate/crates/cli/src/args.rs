//! Flag groups, one per module config. Each flag is the kebab-case name of
//! the config field it sets; `--seed` feeds every seed field.

use brahmi_core::augment::AugmentConfig;
use brahmi_core::dataset::{SplitConfig, DEFAULT_SIDE};
use brahmi_core::preprocess::{Polarity, PreprocessConfig};
use brahmi_core::segment::SegmentationParams;
use brahmi_core::RecognitionParams;
use brahmi_net::{Architecture, PoolMode, TrainConfig, ZooConfig};
use clap::{ArgAction, Args};
use std::path::PathBuf;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Args)]
pub struct PreprocessFlags {
    /// Odd median-filter window side.
    #[arg(long, default_value_t = PreprocessConfig::default().median_kernel)]
    pub median_kernel: usize,
    /// Which binarized class is ink: auto, ink-dark or ink-light.
    #[arg(long, default_value = "auto")]
    pub polarity: Polarity,
    /// Fixed threshold in 0..=255 instead of Otsu's.
    #[arg(long)]
    pub threshold_override: Option<u32>,
}

impl PreprocessFlags {
    pub fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            median_kernel: self.median_kernel,
            polarity: self.polarity,
            threshold_override: self.threshold_override,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SegmentFlags {
    /// Projection values at or below this count as blank.
    #[arg(long, default_value_t = SegmentationParams::default().noise_floor)]
    pub noise_floor: usize,
    /// Thinnest line or character band kept.
    #[arg(long, default_value_t = SegmentationParams::default().min_band)]
    pub min_band: usize,
    /// Shortest blank run that separates bands.
    #[arg(long, default_value_t = SegmentationParams::default().min_gap)]
    pub min_gap: usize,
    /// Character boxes with fewer ink pixels are dropped.
    #[arg(long, default_value_t = SegmentationParams::default().min_ink)]
    pub min_ink: usize,
}

impl SegmentFlags {
    pub fn config(&self) -> SegmentationParams {
        SegmentationParams {
            noise_floor: self.noise_floor,
            min_band: self.min_band,
            min_gap: self.min_gap,
            min_ink: self.min_ink,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecognitionFlags {
    #[command(flatten)]
    pub preprocess: PreprocessFlags,
    #[command(flatten)]
    pub segmentation: SegmentFlags,
    /// Candidates reported per character.
    #[arg(long, default_value_t = RecognitionParams::default().top_k)]
    pub top_k: usize,
}

impl RecognitionFlags {
    pub fn config(&self) -> RecognitionParams {
        RecognitionParams {
            preprocess: self.preprocess.config(),
            segmentation: self.segmentation.config(),
            top_k: self.top_k,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AugmentFlags {
    #[arg(long, default_value_t = AugmentConfig::default().rotation_deg)]
    pub rotation_deg: f64,
    #[arg(long, default_value_t = AugmentConfig::default().scale_factor)]
    pub scale_factor: f64,
    /// Translation bound as a fraction of each dimension.
    #[arg(long, default_value_t = AugmentConfig::default().shift_frac)]
    pub shift_frac: f64,
    #[arg(long, default_value_t = AugmentConfig::default().shear_deg)]
    pub shear_deg: f64,
    #[arg(long, default_value_t = AugmentConfig::default().brightness_delta)]
    pub brightness_delta: f64,
    /// Contrast bounds as `LOW,HIGH`.
    #[arg(long, value_name = "LOW,HIGH", value_parser = parse_range, default_value = "0.8,1.2")]
    pub contrast_range: (f64, f64),
}

impl AugmentFlags {
    pub fn config(&self) -> AugmentConfig {
        AugmentConfig {
            rotation_deg: self.rotation_deg,
            scale_factor: self.scale_factor,
            shift_frac: self.shift_frac,
            shear_deg: self.shear_deg,
            brightness_delta: self.brightness_delta,
            contrast_range: self.contrast_range,
        }
    }
}

/// Where training and validation samples come from.
#[derive(Debug, Clone, Args)]
pub struct DataFlags {
    /// Class tree: one subdirectory of PNG/PGM glyphs per class.
    #[arg(long)]
    pub data: PathBuf,
    /// Separate validation tree; without it `--data` is split.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    #[arg(long, default_value_t = SplitConfig::default().val_fraction)]
    pub val_fraction: f64,
    /// Split each class separately.
    #[arg(long, action = ArgAction::Set, default_value_t = SplitConfig::default().stratified)]
    pub stratified: bool,
    /// Glyph canvas side in pixels.
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    pub side: usize,
    /// Expand each training class to this many samples by augmentation.
    #[arg(long)]
    pub augment_per_class: Option<usize>,
    #[command(flatten)]
    pub augment: AugmentFlags,
}

impl DataFlags {
    pub fn split(&self, seed: u64) -> SplitConfig {
        SplitConfig {
            val_fraction: self.val_fraction,
            seed,
            stratified: self.stratified,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    /// Early-stopping patience; defaults to the architecture's own, capped
    /// at `--max-epochs`.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    /// Return the best epoch's weights rather than the last.
    #[arg(long, action = ArgAction::Set, default_value_t = TrainConfig::default().restore_best)]
    pub restore_best: bool,
    /// Channel width multiplier.
    #[arg(long, default_value_t = ZooConfig::default().width)]
    pub width: f64,
}

impl TrainFlags {
    pub fn config(&self, arch: Architecture, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            patience: self
                .patience
                .unwrap_or_else(|| arch.default_patience().min(self.max_epochs)),
            learning_rate: self.learning_rate,
            seed,
            restore_best: self.restore_best,
        }
    }

    pub fn zoo(&self, seed: u64) -> ZooConfig {
        ZooConfig { width: self.width, seed }
    }
}

pub fn parse_pool(s: &str) -> Result<PoolMode, String> {
    s.parse::<PoolMode>().map_err(|e| e.to_string())
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LOW,HIGH")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}
