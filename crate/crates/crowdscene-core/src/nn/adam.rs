//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::arch::Vgg15Params;
use super::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every trainable tensor.
pub struct AdamState<T> {
    pub step: u64,
    /// (tensor index, m, v) for each trainable tensor.
    moments: Vec<(usize, Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Vgg15Params<T>) -> Self {
        let moments = params
            .trainable_indices()
            .into_iter()
            .map(|i| {
                let n = params.tensors[i].tensor.numel();
                (i, vec![T::zero(); n], vec![T::zero(); n])
            })
            .collect();
        Self { step: 0, moments }
    }
}

/// One Adam update. `grads` must be aligned with `params.tensors`; entries
/// for non-trainable tensors are ignored.
pub fn adam_step<T: Scalar>(
    params: &mut Vgg15Params<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) {
    assert_eq!(grads.len(), params.tensors.len(), "grads misaligned");
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let bias1 = one - b1.powi(t);
    let bias2 = one - b2.powi(t);
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.eps);

    for (idx, m, v) in &mut state.moments {
        let g = &grads[*idx].data;
        let theta = &mut params.tensors[*idx].tensor.data;
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
