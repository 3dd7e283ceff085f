//! Central finite-difference gradient oracle.
//!
//! Perturbs individual parameters of a `ModelGraph` by ±ε, re-runs the plain
//! forward pass and the loss, and compares against the analytic gradient.

use brahmi_net::ops::scce_loss;
use brahmi_net::{ModelGraph, Tensor};

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct Mismatch {
    pub layer: usize,
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub fn loss(model: &ModelGraph, x: &Tensor, labels: &[usize]) -> f64 {
    scce_loss(&model.forward(x).unwrap(), labels).unwrap()
}

pub fn agrees(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= ABS_TOL || diff <= REL_TOL * analytic.abs().max(numeric.abs())
}

/// Checks up to `per_tensor` evenly spaced entries of every parameter tensor
/// (all entries when `per_tensor` is `usize::MAX`). Returns the number of
/// entries checked and every disagreement.
pub fn check_model(model: &ModelGraph, x: &Tensor, labels: &[usize], per_tensor: usize) -> (usize, Vec<Mismatch>) {
    let (_, grads) = model.loss_and_grads(x, labels).unwrap();
    let mut probe = model.clone();
    let mut checked = 0;
    let mut bad = Vec::new();
    for layer in 0..model.params().len() {
        for tensor in 0..model.params()[layer].len() {
            let n = model.params()[layer][tensor].len();
            let step = if per_tensor >= n { 1 } else { n.div_ceil(per_tensor) };
            for index in (0..n).step_by(step) {
                let orig = model.params()[layer][tensor].data()[index];
                probe.params_mut()[layer][tensor].data_mut()[index] = orig + EPS;
                let up = loss(&probe, x, labels);
                probe.params_mut()[layer][tensor].data_mut()[index] = orig - EPS;
                let down = loss(&probe, x, labels);
                probe.params_mut()[layer][tensor].data_mut()[index] = orig;
                let numeric = (up - down) / (2.0 * EPS);
                let analytic = grads[layer][tensor].data()[index];
                checked += 1;
                if !agrees(analytic, numeric) {
                    bad.push(Mismatch { layer, tensor, index, analytic, numeric });
                }
            }
        }
    }
    (checked, bad)
}
