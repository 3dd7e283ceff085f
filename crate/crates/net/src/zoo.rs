//! Builders for the three compared architectures.
//!
//! | builder | weighted layers | notes |
//! |---|---|---|
//! | [`build_lenet`] | 2 conv + 3 dense | sigmoid everywhere, two 2×2 max pools |
//! | [`build_vgg_small`] | 13 conv + 3 dense | VGG-16 topology, widths /8, sigmoid convs, ELU dense |
//! | [`build_mobilenet_micro`] | stem + 4 separable blocks + 2 dense | ELU, global max/avg pool, 128-unit hidden layer |
//!
//! Every builder takes a width multiplier (channel counts are scaled and
//! rounded, never below 1) and a seed for the weight draw.

use crate::error::{NetError, Result};
use crate::graph::ModelGraph;
use crate::layer::LayerSpec;
use crate::ops::{Activation, PoolMode};
use serde::{Deserialize, Serialize};

/// Width of the dense hidden layer in the MobileNet-style head.
pub const MOBILENET_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Architecture {
    Lenet,
    VggSmall,
    MobilenetMicro { pooling: PoolMode },
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Lenet,
        Architecture::VggSmall,
        Architecture::MobilenetMicro { pooling: PoolMode::Max },
        Architecture::MobilenetMicro { pooling: PoolMode::Avg },
    ];

    /// Parses a family name; `pooling` applies to `mobilenet_micro` only
    /// and defaults to average pooling there.
    pub fn parse(name: &str, pooling: Option<PoolMode>) -> Result<Self> {
        match (name, pooling) {
            ("lenet", None) => Ok(Architecture::Lenet),
            ("vgg_small", None) => Ok(Architecture::VggSmall),
            ("mobilenet_micro", p) => Ok(Architecture::MobilenetMicro {
                pooling: p.unwrap_or(PoolMode::Avg),
            }),
            ("lenet" | "vgg_small", Some(_)) => Err(NetError::InvalidConfig(format!(
                "pooling mode only applies to mobilenet_micro, not {name}"
            ))),
            _ => Err(NetError::InvalidConfig(format!("unknown architecture {name:?}"))),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Architecture::Lenet => "lenet",
            Architecture::VggSmall => "vgg_small",
            Architecture::MobilenetMicro { .. } => "mobilenet_micro",
        }
    }

    pub fn pooling(&self) -> Option<PoolMode> {
        match *self {
            Architecture::MobilenetMicro { pooling } => Some(pooling),
            _ => None,
        }
    }

    /// Human-readable row label for comparison tables.
    pub fn display_name(&self) -> String {
        match self {
            Architecture::Lenet => "LeNet".into(),
            Architecture::VggSmall => "VGG-small".into(),
            Architecture::MobilenetMicro { pooling: PoolMode::Max } => {
                "MobileNet-micro (with max pooling)".into()
            }
            Architecture::MobilenetMicro { pooling: PoolMode::Avg } => {
                "MobileNet-micro (with average pooling)".into()
            }
        }
    }

    /// Early-stopping patience shipped with each family.
    pub fn default_patience(&self) -> usize {
        match self {
            Architecture::Lenet | Architecture::VggSmall => 5,
            Architecture::MobilenetMicro { .. } => 4,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.pooling() {
            Some(p) => write!(f, "{}[{p}]", self.family()),
            None => f.write_str(self.family()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZooConfig {
    pub width: f64,
    pub seed: u64,
}

impl Default for ZooConfig {
    fn default() -> Self {
        Self { width: 1.0, seed: 42 }
    }
}

impl ZooConfig {
    fn channels(&self, base: usize) -> usize {
        ((base as f64 * self.width).round() as usize).max(1)
    }
}

fn check(classes: usize, cfg: &ZooConfig) -> Result<()> {
    if classes < 2 {
        return Err(NetError::InvalidConfig(format!("need at least 2 classes, got {classes}")));
    }
    if !(cfg.width > 0.0 && cfg.width.is_finite()) {
        return Err(NetError::InvalidConfig("width multiplier must be positive".into()));
    }
    Ok(())
}

// Per-sample shape after `layers`, used to size the heads.
fn shape_after(input: [usize; 3], layers: &[LayerSpec]) -> Result<Vec<usize>> {
    layers
        .iter()
        .try_fold(input.to_vec(), |s, l| l.output_shape(&s))
}

pub fn build(arch: Architecture, input: [usize; 3], classes: usize, cfg: &ZooConfig) -> Result<ModelGraph> {
    match arch {
        Architecture::Lenet => build_lenet(input, classes, cfg),
        Architecture::VggSmall => build_vgg_small(input, classes, cfg),
        Architecture::MobilenetMicro { pooling } => build_mobilenet_micro(input, classes, pooling, cfg),
    }
}

pub fn build_lenet(input: [usize; 3], classes: usize, cfg: &ZooConfig) -> Result<ModelGraph> {
    check(classes, cfg)?;
    let (c1, c2) = (cfg.channels(6), cfg.channels(16));
    let (d1, d2) = (cfg.channels(120), cfg.channels(84));
    let mut layers = vec![
        LayerSpec::conv(input[0], c1, 5, 1, 0),
        LayerSpec::act(Activation::Sigmoid),
        LayerSpec::pool(PoolMode::Max, 2, 2),
        LayerSpec::conv(c1, c2, 5, 1, 0),
        LayerSpec::act(Activation::Sigmoid),
        LayerSpec::pool(PoolMode::Max, 2, 2),
        LayerSpec::Flatten,
    ];
    let flat = shape_after(input, &layers)?[0];
    layers.extend([
        LayerSpec::Dense { inputs: flat, units: d1 },
        LayerSpec::act(Activation::Sigmoid),
        LayerSpec::Dense { inputs: d1, units: d2 },
        LayerSpec::act(Activation::Sigmoid),
        LayerSpec::Dense { inputs: d2, units: classes },
        LayerSpec::act(Activation::Softmax),
    ]);
    ModelGraph::new(input, layers, cfg.seed)
}

/// VGG-16 block structure (2, 2, 3, 3, 3 convs) at widths 8..64.
pub fn build_vgg_small(input: [usize; 3], classes: usize, cfg: &ZooConfig) -> Result<ModelGraph> {
    check(classes, cfg)?;
    let blocks = [(2, 8), (2, 16), (3, 32), (3, 64), (3, 64)];
    let mut layers = Vec::new();
    let mut c = input[0];
    for (convs, base) in blocks {
        let out = cfg.channels(base);
        for _ in 0..convs {
            layers.push(LayerSpec::conv(c, out, 3, 1, 1));
            layers.push(LayerSpec::act(Activation::Sigmoid));
            c = out;
        }
        layers.push(LayerSpec::pool(PoolMode::Max, 2, 2));
    }
    layers.push(LayerSpec::Flatten);
    let flat = shape_after(input, &layers)?[0];
    let hidden = cfg.channels(128);
    layers.extend([
        LayerSpec::Dense { inputs: flat, units: hidden },
        LayerSpec::act(Activation::Elu),
        LayerSpec::Dense { inputs: hidden, units: hidden },
        LayerSpec::act(Activation::Elu),
        LayerSpec::Dense { inputs: hidden, units: classes },
        LayerSpec::act(Activation::Softmax),
    ]);
    ModelGraph::new(input, layers, cfg.seed)
}

// (out_channels, stride) per block after the stem.
const MOBILENET_BLOCKS: [(usize, usize); 4] = [(16, 2), (32, 2), (64, 2), (64, 1)];
const MOBILENET_STEM: usize = 8;

fn mobilenet_layers(
    input: [usize; 3],
    classes: usize,
    pooling: PoolMode,
    cfg: &ZooConfig,
    separable: bool,
) -> Result<Vec<LayerSpec>> {
    check(classes, cfg)?;
    let stem = cfg.channels(MOBILENET_STEM);
    let mut layers = vec![
        LayerSpec::conv(input[0], stem, 3, 1, 1),
        LayerSpec::act(Activation::Elu),
    ];
    let mut c = stem;
    for (base, stride) in MOBILENET_BLOCKS {
        let out = cfg.channels(base);
        if separable {
            layers.extend([
                LayerSpec::DepthwiseConv2d {
                    channels: c,
                    kernel: 3,
                    stride,
                    padding: 1,
                    bias: true,
                },
                LayerSpec::act(Activation::Elu),
                LayerSpec::PointwiseConv2d {
                    in_channels: c,
                    out_channels: out,
                    bias: true,
                },
                LayerSpec::act(Activation::Elu),
            ]);
        } else {
            layers.extend([LayerSpec::conv(c, out, 3, stride, 1), LayerSpec::act(Activation::Elu)]);
        }
        c = out;
    }
    let spatial = shape_after(input, &layers)?;
    if spatial[1] != spatial[2] {
        return Err(NetError::InvalidConfig(format!(
            "global pooling needs a square feature map, got {}x{}",
            spatial[1], spatial[2]
        )));
    }
    layers.extend([
        LayerSpec::pool(pooling, spatial[1], spatial[1]),
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: c, units: MOBILENET_HIDDEN },
        LayerSpec::act(Activation::Elu),
        LayerSpec::Dense { inputs: MOBILENET_HIDDEN, units: classes },
        LayerSpec::act(Activation::Softmax),
    ]);
    Ok(layers)
}

/// Stem conv, four depthwise-separable blocks (three at stride 2), global
/// pooling, a 128-unit ELU hidden layer and the softmax head.
pub fn build_mobilenet_micro(
    input: [usize; 3],
    classes: usize,
    pooling: PoolMode,
    cfg: &ZooConfig,
) -> Result<ModelGraph> {
    ModelGraph::new(input, mobilenet_layers(input, classes, pooling, cfg, true)?, cfg.seed)
}

/// The same channel plan with every separable block replaced by a standard
/// 3×3 convolution; the baseline for parameter-count comparisons.
pub fn build_mobilenet_standard(
    input: [usize; 3],
    classes: usize,
    pooling: PoolMode,
    cfg: &ZooConfig,
) -> Result<ModelGraph> {
    ModelGraph::new(input, mobilenet_layers(input, classes, pooling, cfg, false)?, cfg.seed)
}
