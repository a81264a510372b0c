//! Bias-corrected Adam over any parameter set exposed as flat buffers.

use crate::error::{GkdError, Result};
use crate::scalar::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// A set of trainable tensors, visited in a fixed order.
pub trait Parameters<T> {
    fn buffers(&self) -> Vec<&[T]>;
    fn buffers_mut(&mut self) -> Vec<&mut [T]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed accumulators shaped like `params`.
    pub fn new<P: Parameters<T>>(params: &P) -> Self {
        let zeros: Vec<Vec<T>> = params
            .buffers()
            .iter()
            .map(|b| vec![T::zero(); b.len()])
            .collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

pub fn adam_step<T: Scalar, P: Parameters<T>>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState<T>,
    lr: T,
) -> Result<()> {
    let grad_bufs = grads.buffers();
    let mut param_bufs = params.buffers_mut();
    if param_bufs.len() != grad_bufs.len() || param_bufs.len() != state.first_moment.len() {
        return Err(GkdError::shape(format!(
            "adam: {} parameter tensors, {} gradient tensors, {} moment tensors",
            param_bufs.len(),
            grad_bufs.len(),
            state.first_moment.len()
        )));
    }
    for (i, (p, g)) in param_bufs.iter().zip(&grad_bufs).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[i].len() {
            return Err(GkdError::shape(format!(
                "adam: tensor {i} has {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                state.first_moment[i].len()
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::of(BETA1);
    let b2 = T::of(BETA2);
    let eps = T::of(EPSILON);
    let correction1 = T::one() - b1.powi(t);
    let correction2 = T::one() - b2.powi(t);

    for (i, (p, g)) in param_bufs.iter_mut().zip(&grad_bufs).enumerate() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = b1 * m[j] + (T::one() - b1) * gj;
            v[j] = b2 * v[j] + (T::one() - b2) * gj * gj;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
