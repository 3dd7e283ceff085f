use crate::error::{shape_err, NetError, Result};
use crate::layer::LayerSpec;
use crate::ops::{self, Activation};
use crate::par::Exec;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trainable tensors grouped per layer, in layer order.
pub type ParamSet = Vec<Vec<Tensor>>;

/// A sequential network ending in a softmax over `num_classes` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    input_shape: [usize; 3],
    num_classes: usize,
    layers: Vec<LayerSpec>,
    params: ParamSet,
}

impl ModelGraph {
    /// Validates the layer chain and draws seeded Glorot-uniform weights.
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let num_classes = validate(input_shape, &layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layers.iter().map(|l| l.init_params(&mut rng)).collect();
        Ok(Self {
            input_shape,
            num_classes,
            layers,
            params,
        })
    }

    /// Reassembles a model from stored parameters, checking every shape.
    pub fn from_parts(input_shape: [usize; 3], layers: Vec<LayerSpec>, params: ParamSet) -> Result<Self> {
        let num_classes = validate(input_shape, &layers)?;
        if params.len() != layers.len() {
            return shape_err(format!("{} parameter groups for {} layers", params.len(), layers.len()));
        }
        for (i, (layer, group)) in layers.iter().zip(&params).enumerate() {
            let expected = layer.param_shapes();
            let got: Vec<&[usize]> = group.iter().map(|t| t.shape()).collect();
            if got.len() != expected.len() || got.iter().zip(&expected).any(|(g, e)| *g != &e[..]) {
                return shape_err(format!("layer {i}: parameter shapes {got:?}, expected {expected:?}"));
            }
        }
        Ok(Self {
            input_shape,
            num_classes,
            layers,
            params,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Trainable element count (weights plus biases).
    pub fn count_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let (n, c, h, w) = x.dims4()?;
        if [c, h, w] != self.input_shape {
            return shape_err(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                &x.shape()[1..]
            ));
        }
        Ok(n)
    }

    /// Class probabilities `[N, num_classes]` for an NCHW batch.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (layer, p) in self.layers.iter().zip(&self.params) {
            cur = layer.forward(p, &cur)?;
        }
        Ok(cur)
    }

    /// Forward pass one sample at a time, fanned out per `exec`.
    pub fn predict(&self, x: &Tensor, exec: Exec) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let per = x.len() / n;
        let shape = [1, self.input_shape[0], self.input_shape[1], self.input_shape[2]];
        let rows = exec.map_range(n, |i| {
            let xi = Tensor::new(shape.to_vec(), x.data()[i * per..(i + 1) * per].to_vec())?;
            self.forward(&xi)
        });
        let mut data = Vec::with_capacity(n * self.num_classes);
        for r in rows {
            data.extend_from_slice(r?.data());
        }
        Tensor::new(vec![n, self.num_classes], data)
    }

    /// Mean cross-entropy of the batch and its gradient for every parameter,
    /// by reverse-mode accumulation over the whole batch at once.
    pub fn loss_and_grads(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, ParamSet)> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (layer, p) in self.layers.iter().zip(&self.params) {
            let next = layer.forward(p, acts.last().expect("non-empty"))?;
            acts.push(next);
        }
        let probs = acts.last().expect("non-empty");
        let loss = ops::scce_loss(probs, labels)?;
        let mut grad = ops::scce_grad(probs, labels)?;
        let mut grads: ParamSet = vec![Vec::new(); self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gx, gp) = layer.backward(&self.params[i], &acts[i], &acts[i + 1], &grad)?;
            grads[i] = gp;
            grad = gx;
        }
        Ok((loss, grads))
    }

    /// Same quantity as [`loss_and_grads`](Self::loss_and_grads), computed
    /// per sample (possibly in parallel) and summed in sample order, so the
    /// result is identical for every `exec`.
    pub fn batch_gradients(&self, x: &Tensor, labels: &[usize], exec: Exec) -> Result<(f64, ParamSet)> {
        let n = self.check_input(x)?;
        if labels.len() != n {
            return shape_err(format!("{} labels for a batch of {n}", labels.len()));
        }
        let per = x.len() / n;
        let shape = [1, self.input_shape[0], self.input_shape[1], self.input_shape[2]];
        let parts = exec.map_range(n, |i| {
            let xi = Tensor::new(shape.to_vec(), x.data()[i * per..(i + 1) * per].to_vec())?;
            self.loss_and_grads(&xi, &labels[i..=i])
        });
        let mut total = 0.0;
        let mut acc: Option<ParamSet> = None;
        for part in parts {
            let (loss, g) = part?;
            total += loss;
            match acc.as_mut() {
                None => acc = Some(g),
                Some(a) => {
                    for (la, lg) in a.iter_mut().zip(&g) {
                        for (ta, tg) in la.iter_mut().zip(lg) {
                            ta.add_assign(tg);
                        }
                    }
                }
            }
        }
        let mut grads = acc.ok_or(NetError::EmptyDataset)?;
        let inv = 1.0 / n as f64;
        grads.iter_mut().flatten().for_each(|t| t.scale(inv));
        Ok((total * inv, grads))
    }
}

/// Gradient of the mean cross-entropy of `labels` under `model` for every
/// trainable parameter.
pub fn backprop(model: &ModelGraph, inputs: &Tensor, labels: &[usize]) -> Result<ParamSet> {
    model.loss_and_grads(inputs, labels).map(|(_, g)| g)
}

fn validate(input_shape: [usize; 3], layers: &[LayerSpec]) -> Result<usize> {
    if input_shape.contains(&0) {
        return shape_err("input dimensions must be positive");
    }
    let mut shape = input_shape.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        shape = layer
            .output_shape(&shape)
            .map_err(|e| NetError::ShapeMismatch(format!("layer {i} ({}): {e}", layer.kind_name())))?;
    }
    match (layers.last(), &shape[..]) {
        (
            Some(LayerSpec::Activation {
                function: Activation::Softmax,
            }),
            [k],
        ) => Ok(*k),
        _ => shape_err("model must end in a softmax over a flat output"),
    }
}
