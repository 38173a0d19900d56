//! Second-moment diagnostics for a single round at fixed weights.
//!
//! The proof of the gap bound controls `E‖ĝ - ∇F(w)‖²` by two pieces:
//! the transport distortion `B1` and the spread of the local gradients
//! `B2 = Σ α_k ‖∇F_k(w)‖² - ‖∇F(w)‖²`. The local gradient energy is in
//! turn bounded by `B3 = 2L²‖w - w*‖² + 2L²δ²`. This module assembles those
//! pieces from a task and compares them with the mean squared error of a
//! batch of sampled estimates.

use alloc::vec::Vec;

use crate::bounds::{BoundInputs, Scheme};
use crate::error::{nonnegative, Error, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::task::LearningTask;

/// Fewest estimates accepted by [`variance_decomposition`].
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDiagnostic {
    pub samples: usize,
    /// Sample mean of `‖ĝ - ∇F(w)‖²`.
    pub empirical_mse: f64,
    /// Standard error of `empirical_mse`.
    pub empirical_stderr: f64,
    /// `Σ α_k ‖∇F_k‖² - ‖∇F‖²`.
    pub b2_exact: f64,
    /// `Σ α_k ‖∇F_k - ∇F‖²`, algebraically equal to `b2_exact`.
    pub b2_expansion: f64,
    pub b3_bound: f64,
    pub b1_bound: f64,
    /// `b1_bound + b2_exact`.
    pub total_bound: f64,
    /// Noise energy fed into `b1_bound` (analog only).
    pub noise_power: f64,
    /// `ϕ` as used in the gap bound, and `d ϕ` (analog only).
    pub varphi: Option<f64>,
    pub varphi_scaled: Option<f64>,
    pub dominated: bool,
}

/// Compares sampled estimates of `∇F(w)` against the analytic bound for
/// `scheme`.
///
/// `estimates` are independent transport outcomes at the same `w`;
/// `noise_power` is the mean effective receiver noise energy
/// `E‖z/ζ‖²` of the analog outcomes and is ignored otherwise.
pub fn variance_decomposition(
    task: &LearningTask,
    w: &[f64],
    estimates: &[Vec<f64>],
    inputs: &BoundInputs,
    scheme: Scheme,
    noise_power: f64,
) -> Result<VarianceDiagnostic> {
    if estimates.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: estimates.len(),
            need: MIN_SAMPLES,
        });
    }
    nonnegative("noise power", noise_power)?;
    let alphas = task.alphas();
    let locals = task.local_gradients(w)?;
    let global = task.gradient(w)?;

    let spread: f64 = alphas.iter().zip(&locals).map(|(a, g)| a * norm_sq(g)).sum();
    let b2_exact = spread - norm_sq(&global);
    let b2_expansion = alphas
        .iter()
        .zip(&locals)
        .map(|(a, g)| a * dist_sq(g, &global))
        .sum();

    let c = task.constants();
    let l2 = c.smoothness * c.smoothness;
    let b3_bound = 2.0 * l2 * dist_sq(w, task.optimum()) + 2.0 * l2 * c.delta * c.delta;

    let r = &inputs.inclusion;
    let (b1_bound, noise_power, varphi) = match scheme {
        Scheme::Ideal => {
            let b1 = alphas.iter().zip(r).map(|(a, r)| a * (1.0 / r - 1.0)).sum::<f64>() * b3_bound;
            (b1, 0.0, None)
        }
        Scheme::Digital => {
            let phi = inputs.phi()?;
            let b1 = alphas
                .iter()
                .zip(r)
                .zip(&inputs.success)
                .map(|((a, r), p)| a / (p * r) * phi + a * (1.0 / (p * r) - 1.0) * b3_bound)
                .sum();
            (b1, 0.0, None)
        }
        Scheme::Analog => {
            let second = inputs.second_moment()?;
            let b1 = alphas.iter().zip(r).map(|(a, r)| a * (second / r - 1.0)).sum::<f64>()
                * b3_bound
                + noise_power;
            (b1, noise_power, inputs.varphi().ok())
        }
    };

    let errors: Vec<f64> = estimates.iter().map(|g| dist_sq(g, &global)).collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    let stderr = libm::sqrt(var / n);
    let total_bound = b1_bound + b2_exact;

    Ok(VarianceDiagnostic {
        samples: estimates.len(),
        empirical_mse: mean,
        empirical_stderr: stderr,
        b2_exact,
        b2_expansion,
        b3_bound,
        b1_bound,
        total_bound,
        noise_power,
        varphi,
        varphi_scaled: varphi.map(|v| v * inputs.dim as f64),
        dominated: mean <= total_bound,
    })
}
