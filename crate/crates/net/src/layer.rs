use crate::error::{shape_err, Result};
use crate::ops::{self, Activation, PoolMode};
use crate::tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One node of a sequential model. Shapes below exclude the batch axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    DepthwiseConv2d {
        channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    PointwiseConv2d {
        in_channels: usize,
        out_channels: usize,
        bias: bool,
    },
    Maxpool {
        size: usize,
        stride: usize,
    },
    Avgpool {
        size: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        inputs: usize,
        units: usize,
    },
    Activation {
        function: Activation,
    },
}

impl LayerSpec {
    pub fn conv(cin: usize, cout: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels: cin,
            out_channels: cout,
            kernel,
            stride,
            padding,
            bias: true,
        }
    }

    pub fn pool(mode: PoolMode, size: usize, stride: usize) -> Self {
        match mode {
            PoolMode::Max => LayerSpec::Maxpool { size, stride },
            PoolMode::Avg => LayerSpec::Avgpool { size, stride },
        }
    }

    pub fn act(function: Activation) -> Self {
        LayerSpec::Activation { function }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::DepthwiseConv2d { .. } => "depthwise_conv2d",
            LayerSpec::PointwiseConv2d { .. } => "pointwise_conv2d",
            LayerSpec::Maxpool { .. } => "maxpool",
            LayerSpec::Avgpool { .. } => "avgpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Activation { .. } => "activation",
        }
    }

    fn check_positive(&self) -> Result<()> {
        let fields: &[usize] = match self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, .. } => {
                &[*in_channels, *out_channels, *kernel, *stride]
            }
            LayerSpec::DepthwiseConv2d { channels, kernel, stride, .. } => &[*channels, *kernel, *stride],
            LayerSpec::PointwiseConv2d { in_channels, out_channels, .. } => &[*in_channels, *out_channels],
            LayerSpec::Maxpool { size, stride } | LayerSpec::Avgpool { size, stride } => &[*size, *stride],
            LayerSpec::Dense { inputs, units } => &[*inputs, *units],
            LayerSpec::Flatten | LayerSpec::Activation { .. } => &[],
        };
        if fields.contains(&0) {
            return shape_err(format!("{} has a zero-sized field", self.kind_name()));
        }
        Ok(())
    }

    /// Shapes of the trainable tensors, weight first then bias.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let with_bias = |w: Vec<usize>, bias: bool, n: usize| {
            if bias {
                vec![w, vec![n]]
            } else {
                vec![w]
            }
        };
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, bias, .. } => {
                with_bias(vec![out_channels, in_channels, kernel, kernel], bias, out_channels)
            }
            LayerSpec::DepthwiseConv2d { channels, kernel, bias, .. } => {
                with_bias(vec![channels, 1, kernel, kernel], bias, channels)
            }
            LayerSpec::PointwiseConv2d { in_channels, out_channels, bias } => {
                with_bias(vec![out_channels, in_channels, 1, 1], bias, out_channels)
            }
            LayerSpec::Dense { inputs, units } => vec![vec![inputs, units], vec![units]],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check_positive()?;
        let chw = |what: &str| match *input {
            [c, h, w] => Ok((c, h, w)),
            _ => shape_err(format!("{what} needs a [C, H, W] input, got {input:?}")),
        };
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding, .. } => {
                let (c, h, w) = chw("conv2d")?;
                if c != in_channels {
                    return shape_err(format!("conv2d expects {in_channels} channels, got {c}"));
                }
                Ok(vec![
                    out_channels,
                    ops::conv_out_len(h, kernel, stride, padding)?,
                    ops::conv_out_len(w, kernel, stride, padding)?,
                ])
            }
            LayerSpec::DepthwiseConv2d { channels, kernel, stride, padding, .. } => {
                let (c, h, w) = chw("depthwise_conv2d")?;
                if c != channels {
                    return shape_err(format!("depthwise expects {channels} channels, got {c}"));
                }
                Ok(vec![
                    c,
                    ops::conv_out_len(h, kernel, stride, padding)?,
                    ops::conv_out_len(w, kernel, stride, padding)?,
                ])
            }
            LayerSpec::PointwiseConv2d { in_channels, out_channels, .. } => {
                let (c, h, w) = chw("pointwise_conv2d")?;
                if c != in_channels {
                    return shape_err(format!("pointwise expects {in_channels} channels, got {c}"));
                }
                Ok(vec![out_channels, h, w])
            }
            LayerSpec::Maxpool { size, stride } | LayerSpec::Avgpool { size, stride } => {
                let (c, h, w) = chw("pool")?;
                Ok(vec![
                    c,
                    ops::conv_out_len(h, size, stride, 0)?,
                    ops::conv_out_len(w, size, stride, 0)?,
                ])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, units } => match *input {
                [d] if d == inputs => Ok(vec![units]),
                _ => shape_err(format!("dense expects [{inputs}], got {input:?}")),
            },
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params(&self, rng: &mut impl Rng) -> Vec<Tensor> {
        let (fan_in, fan_out) = match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                (in_channels * kernel * kernel, out_channels * kernel * kernel)
            }
            LayerSpec::DepthwiseConv2d { kernel, .. } => (kernel * kernel, kernel * kernel),
            LayerSpec::PointwiseConv2d { in_channels, out_channels, .. } => (in_channels, out_channels),
            LayerSpec::Dense { inputs, units } => (inputs, units),
            _ => return Vec::new(),
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let shapes = self.param_shapes();
        let mut out = vec![Tensor::from_fn(&shapes[0], |_| rng.random_range(-limit..=limit))];
        out.extend(shapes[1..].iter().map(|s| Tensor::zeros(s)));
        out
    }

    /// Batched forward pass; `x` carries the batch as its first axis.
    pub fn forward(&self, params: &[Tensor], x: &Tensor) -> Result<Tensor> {
        match *self {
            LayerSpec::Conv2d { stride, padding, .. } => {
                ops::conv2d(x, &params[0], params.get(1), stride, padding)
            }
            LayerSpec::DepthwiseConv2d { stride, padding, .. } => {
                ops::depthwise_conv2d(x, &params[0], params.get(1), stride, padding)
            }
            LayerSpec::PointwiseConv2d { .. } => ops::conv2d(x, &params[0], params.get(1), 1, 0),
            LayerSpec::Maxpool { size, stride } => ops::pool2d(x, PoolMode::Max, size, stride),
            LayerSpec::Avgpool { size, stride } => ops::pool2d(x, PoolMode::Avg, size, stride),
            LayerSpec::Flatten => Ok(ops::flatten(x)),
            LayerSpec::Dense { .. } => ops::dense(x, &params[0], &params[1]),
            LayerSpec::Activation { function } => Ok(ops::activate(x, function)),
        }
    }

    /// Returns the gradient with respect to `x` and one gradient per parameter.
    pub fn backward(
        &self,
        params: &[Tensor],
        x: &Tensor,
        y: &Tensor,
        grad_y: &Tensor,
    ) -> Result<(Tensor, Vec<Tensor>)> {
        let unpack = |g: ops::ParamGrads| {
            let mut p = vec![g.weight];
            p.extend(g.bias);
            (g.input, p)
        };
        Ok(match *self {
            LayerSpec::Conv2d { stride, padding, bias, .. } => unpack(ops::conv2d_backward(
                x, &params[0], grad_y, stride, padding, bias,
            )?),
            LayerSpec::DepthwiseConv2d { stride, padding, bias, .. } => unpack(
                ops::depthwise_conv2d_backward(x, &params[0], grad_y, stride, padding, bias)?,
            ),
            LayerSpec::PointwiseConv2d { bias, .. } => {
                unpack(ops::conv2d_backward(x, &params[0], grad_y, 1, 0, bias)?)
            }
            LayerSpec::Maxpool { size, stride } => (
                ops::pool2d_backward(x, grad_y, PoolMode::Max, size, stride)?,
                Vec::new(),
            ),
            LayerSpec::Avgpool { size, stride } => (
                ops::pool2d_backward(x, grad_y, PoolMode::Avg, size, stride)?,
                Vec::new(),
            ),
            LayerSpec::Flatten => (grad_y.clone().reshape(x.shape())?, Vec::new()),
            LayerSpec::Dense { .. } => unpack(ops::dense_backward(x, &params[0], grad_y)?),
            LayerSpec::Activation { function } => {
                (ops::activate_backward(x, y, grad_y, function), Vec::new())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts_follow_formulas() {
        assert_eq!(LayerSpec::Dense { inputs: 128, units: 214 }.param_count(), 27_606);
        assert_eq!(LayerSpec::conv(32, 64, 3, 1, 1).param_count(), 18_496);
        let dw = LayerSpec::DepthwiseConv2d { channels: 32, kernel: 3, stride: 1, padding: 1, bias: false };
        let pw = LayerSpec::PointwiseConv2d { in_channels: 32, out_channels: 64, bias: false };
        assert_eq!(dw.param_count() + pw.param_count(), 2336);
        assert_eq!(LayerSpec::Flatten.param_count(), 0);
    }

    #[test]
    fn shape_propagation() {
        let conv = LayerSpec::conv(1, 8, 3, 2, 1);
        assert_eq!(conv.output_shape(&[1, 32, 32]).unwrap(), vec![8, 16, 16]);
        assert!(conv.output_shape(&[2, 32, 32]).is_err());
        assert_eq!(LayerSpec::Flatten.output_shape(&[4, 2, 2]).unwrap(), vec![16]);
        assert!(LayerSpec::Dense { inputs: 15, units: 3 }.output_shape(&[16]).is_err());
        assert!(LayerSpec::Maxpool { size: 0, stride: 1 }.output_shape(&[1, 4, 4]).is_err());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let s = serde_json::to_string(&LayerSpec::act(Activation::Elu)).unwrap();
        assert_eq!(s, r#"{"kind":"activation","function":"elu"}"#);
        let back: LayerSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, LayerSpec::act(Activation::Elu));
    }
}
