//! The federated update loop: gradients, aggregation and the model step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{finite, positive, same_len, Error, Result};
use crate::linalg::axpy;
use crate::task::LearningTask;

/// Per-device aggregation weights, inclusion probabilities and path losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub alphas: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub path_loss: Vec<f64>,
}

impl Population {
    pub fn from_task(task: &LearningTask) -> Self {
        Self {
            alphas: task.alphas(),
            inclusion: task.inclusion(),
            path_loss: task.path_loss(),
        }
    }

    /// `α_k = 1/K`, `r_k = N/K`, common path loss.
    pub fn uniform(devices: usize, participants: usize, path_loss: f64) -> Self {
        let k = devices as f64;
        Self {
            alphas: vec![1.0 / k; devices],
            inclusion: vec![participants as f64 / k; devices],
            path_loss: vec![path_loss; devices],
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Global model after `round` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub round: u64,
    pub weights: Vec<f64>,
}

impl ModelState {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { round: 0, weights }
    }

    pub fn initial(task: &LearningTask) -> Self {
        Self::new(task.initial_weights().to_vec())
    }
}

pub fn local_gradient(task: &LearningTask, k: usize, w: &[f64]) -> Result<Vec<f64>> {
    task.local_gradient(k, w)
}

/// `Σ_k α_k g^k`.
pub fn global_gradient(locals: &[Vec<f64>], alphas: &[f64]) -> Result<Vec<f64>> {
    same_len("alphas", locals.len(), alphas.len())?;
    let d = locals.first().map_or(0, Vec::len);
    let mut g = vec![0.0; d];
    for (local, &a) in locals.iter().zip(alphas) {
        same_len("local gradient", d, local.len())?;
        axpy(a, local, &mut g);
    }
    Ok(g)
}

/// `w̃_{m+1} = w̃_m - η ĝ`. Non-finite gradient entries are an error.
pub fn sgd_step(state: &ModelState, g_hat: &[f64], eta: f64) -> Result<ModelState> {
    positive("learning rate", eta)?;
    same_len("gradient estimate", state.weights.len(), g_hat.len())?;
    for &g in g_hat {
        finite("gradient estimate entry", g)?;
    }
    let weights = state
        .weights
        .iter()
        .zip(g_hat)
        .map(|(w, g)| w - eta * g)
        .collect();
    Ok(ModelState {
        round: state.round + 1,
        weights,
    })
}

pub fn optimality_gap(task: &LearningTask, state: &ModelState) -> Result<f64> {
    task.optimality_gap(&state.weights)
}

/// Unbiased participation-only estimate `Σ_{k∈S} α_k / r_k · g^k`.
pub fn debiased_sum(
    locals: &[Vec<f64>],
    alphas: &[f64],
    inclusion: &[f64],
    participants: &[usize],
) -> Result<Vec<f64>> {
    same_len("alphas", locals.len(), alphas.len())?;
    same_len("inclusion", locals.len(), inclusion.len())?;
    let d = locals.first().map_or(0, Vec::len);
    let mut g = vec![0.0; d];
    for &k in participants {
        let local = locals.get(k).ok_or(Error::DeviceIndex {
            index: k,
            len: locals.len(),
        })?;
        axpy(alphas[k] / inclusion[k], local, &mut g);
    }
    Ok(g)
}
