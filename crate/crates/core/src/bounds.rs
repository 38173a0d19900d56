//! Closed-form optimality-gap bounds for the two uplinks.
//!
//! For a fixed learning rate below `μ / (2 L² g)` the expected gap after
//! `m + 1` updates is at most
//!
//! ```text
//! (L/2) (1 - ημ + 2η²L²g)^{m+1} E‖w̃_0 - w*‖² + G
//! ```
//!
//! where the amplification `g` and the limit `G` depend on the uplink:
//!
//! * digital: `g_D = Σ α_k / (p_k r_k)`,
//!   `G_D = η (L φ(b) + 2L³δ²) g_D / (2μ - 4ηL² g_D)`;
//! * analog: `g_A = Σ (α_k / r_k) c - 1` with
//!   `c = e^{γ_th} + (1 - ρ²) E1(γ_th) e^{2γ_th} / (2ρ²)`,
//!   `G_A = η (L ϕ + 2L³δ² g_A) / (2μ - 4ηL² g_A)`.
//!
//! The noise constant `ϕ` is implemented as stated, without a dimension
//! factor; [`BoundReport::varphi_scaled`] carries `d ϕ`, which is the mean
//! effective noise energy under the static scaling, for comparison.

use alloc::vec::Vec;

use crate::channel::PowerConvention;
use crate::error::{nonnegative, positive, same_len, unit_interval, Error, Result};
use crate::special::exp_integral_e1;
use crate::task::AssumptionConstants;

/// Which estimator a bound describes. `Ideal` is participation-only
/// sampling: digital with `p_k = 1` and no quantisation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ideal,
    Digital,
    Analog,
}

/// `g_D = Σ α_k / (p_k r_k)`.
pub fn g_digital(alphas: &[f64], inclusion: &[f64], success: &[f64]) -> Result<f64> {
    same_len("inclusion", alphas.len(), inclusion.len())?;
    same_len("success probabilities", alphas.len(), success.len())?;
    let mut g = 0.0;
    for ((&a, &r), &p) in alphas.iter().zip(inclusion).zip(success) {
        unit_interval("inclusion probability", r)?;
        unit_interval("success probability", p)?;
        g += a / (p * r);
    }
    Ok(g)
}

/// `c = E[ξ²]` of the analog distortion under the unit-mean convention.
pub fn analog_second_moment(gamma_th: f64, rho: f64) -> Result<f64> {
    analog_second_moment_for(gamma_th, rho, PowerConvention::Mean1)
}

/// `E[ξ²]` when `E|ĥ|² = mean`: the unit-mean expression at `γ_th / mean`.
/// At `γ_th = 0` the `E1` term is only defined for `ρ = 1`.
pub fn analog_second_moment_for(
    gamma_th: f64,
    rho: f64,
    convention: PowerConvention,
) -> Result<f64> {
    nonnegative("gamma_th", gamma_th)?;
    unit_interval("rho", rho)?;
    let x = gamma_th / convention.mean();
    let base = libm::exp(x);
    if rho == 1.0 {
        return Ok(base);
    }
    if x == 0.0 {
        return Err(Error::Domain {
            name: "gamma_th",
            value: gamma_th,
            domain: "> 0 when rho < 1",
        });
    }
    let rho2 = rho * rho;
    Ok(base + (1.0 - rho2) * exp_integral_e1(x)? * libm::exp(2.0 * x) / (2.0 * rho2))
}

/// `g_A = Σ (α_k / r_k) c - 1`.
pub fn g_analog(alphas: &[f64], inclusion: &[f64], gamma_th: f64, rho: f64) -> Result<f64> {
    g_analog_for(alphas, inclusion, gamma_th, rho, PowerConvention::Mean1)
}

pub fn g_analog_for(
    alphas: &[f64],
    inclusion: &[f64],
    gamma_th: f64,
    rho: f64,
    convention: PowerConvention,
) -> Result<f64> {
    same_len("inclusion", alphas.len(), inclusion.len())?;
    let c = analog_second_moment_for(gamma_th, rho, convention)?;
    let mut s = 0.0;
    for (&a, &r) in alphas.iter().zip(inclusion) {
        unit_interval("inclusion probability", r)?;
        s += a / r;
    }
    Ok(s * c - 1.0)
}

/// `φ(b) = d γ² / (4 (2^b - 1)²)`: the quantiser variance bound with the
/// modulus range `g_max - g_min` bounded by γ.
pub fn phi_quant(d: usize, bits: u32, gamma: f64) -> Result<f64> {
    if bits == 0 {
        return Err(Error::Domain {
            name: "bits",
            value: 0.0,
            domain: ">= 1",
        });
    }
    nonnegative("gamma", gamma)?;
    let levels = libm::exp2(f64::from(bits)) - 1.0;
    Ok(d as f64 * gamma * gamma / (4.0 * levels * levels))
}

/// `ϕ = B N0 γ² e^{2γ_th} / (2 P_max ρ² γ_th) · max_k α_k² / (r_k² L_k²)`.
#[allow(clippy::too_many_arguments)]
pub fn varphi(
    bandwidth: f64,
    noise_density: f64,
    gamma: f64,
    gamma_th: f64,
    rho: f64,
    p_max: f64,
    alphas: &[f64],
    inclusion: &[f64],
    path_loss: &[f64],
) -> Result<f64> {
    varphi_for(
        bandwidth,
        noise_density,
        gamma,
        gamma_th,
        rho,
        p_max,
        alphas,
        inclusion,
        path_loss,
        PowerConvention::Mean1,
    )
}

/// `ϕ` with `e^{2γ_th} / ρ²` replaced by `λ²` for the given convention.
#[allow(clippy::too_many_arguments)]
pub fn varphi_for(
    bandwidth: f64,
    noise_density: f64,
    gamma: f64,
    gamma_th: f64,
    rho: f64,
    p_max: f64,
    alphas: &[f64],
    inclusion: &[f64],
    path_loss: &[f64],
    convention: PowerConvention,
) -> Result<f64> {
    positive("gamma_th", gamma_th)?;
    positive("p_max", p_max)?;
    unit_interval("rho", rho)?;
    same_len("inclusion", alphas.len(), inclusion.len())?;
    same_len("path_loss", alphas.len(), path_loss.len())?;
    let worst = alphas
        .iter()
        .zip(inclusion)
        .zip(path_loss)
        .map(|((a, r), l)| (a * a) / (r * r * l * l))
        .fold(0.0, f64::max);
    let lambda_sq = libm::exp(2.0 * gamma_th / convention.mean()) / (rho * rho);
    Ok(bandwidth * noise_density * gamma * gamma * lambda_sq / (2.0 * p_max * gamma_th) * worst)
}

/// `μ / (2 L² g)`. Infinite when `g = 0`.
pub fn max_learning_rate(constants: &AssumptionConstants, g: f64) -> Result<f64> {
    nonnegative("amplification", g)?;
    let l = constants.smoothness;
    Ok(constants.mu / (2.0 * l * l * g))
}

/// Per-round factor `1 - ημ + 2η²L²g`.
pub fn contraction(eta: f64, constants: &AssumptionConstants, g: f64) -> f64 {
    let l = constants.smoothness;
    1.0 - eta * constants.mu + 2.0 * eta * eta * l * l * g
}

/// Inputs of every bound. `success` holds the per-device digital success
/// probabilities `p_k` at the operating `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub constants: AssumptionConstants,
    pub eta: f64,
    pub alphas: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub path_loss: Vec<f64>,
    pub success: Vec<f64>,
    pub bits: u32,
    pub gamma_th: f64,
    pub rho: f64,
    pub bandwidth: f64,
    pub noise_density: f64,
    pub p_max: f64,
    pub dim: usize,
    /// `E‖w̃_0 - w*‖²`.
    pub init_dist_sq: f64,
    pub participants: usize,
    pub subbands: usize,
    pub theta: f64,
    pub analog_convention: PowerConvention,
}

impl BoundInputs {
    pub fn phi(&self) -> Result<f64> {
        phi_quant(self.dim, self.bits, self.constants.gamma)
    }

    pub fn varphi(&self) -> Result<f64> {
        varphi_for(
            self.bandwidth,
            self.noise_density,
            self.constants.gamma,
            self.gamma_th,
            self.rho,
            self.p_max,
            &self.alphas,
            &self.inclusion,
            &self.path_loss,
            self.analog_convention,
        )
    }

    pub fn second_moment(&self) -> Result<f64> {
        analog_second_moment_for(self.gamma_th, self.rho, self.analog_convention)
    }

    /// The amplification factor `g` of a scheme.
    pub fn amplification(&self, scheme: Scheme) -> Result<f64> {
        match scheme {
            Scheme::Ideal => {
                let ones = alloc::vec![1.0; self.alphas.len()];
                g_digital(&self.alphas, &self.inclusion, &ones)
            }
            Scheme::Digital => g_digital(&self.alphas, &self.inclusion, &self.success),
            Scheme::Analog => g_analog_for(
                &self.alphas,
                &self.inclusion,
                self.gamma_th,
                self.rho,
                self.analog_convention,
            ),
        }
    }

    fn numerator(&self, scheme: Scheme, g: f64) -> Result<f64> {
        let c = &self.constants;
        let l = c.smoothness;
        let hetero = 2.0 * l * l * l * c.delta * c.delta;
        Ok(match scheme {
            Scheme::Ideal => hetero * g,
            Scheme::Digital => (l * self.phi()? + hetero) * g,
            Scheme::Analog => l * self.varphi()? + hetero * g,
        })
    }

    fn check_eta(&self, g: f64) -> Result<f64> {
        positive("eta", self.eta)?;
        let c = &self.constants;
        let denom = 2.0 * c.mu - 4.0 * self.eta * c.smoothness * c.smoothness * g;
        if denom > 0.0 {
            Ok(denom)
        } else {
            Err(Error::LearningRate {
                eta: self.eta,
                max: max_learning_rate(c, g)?,
            })
        }
    }

    pub fn max_learning_rate(&self, scheme: Scheme) -> Result<f64> {
        max_learning_rate(&self.constants, self.amplification(scheme)?)
    }

    pub fn contraction(&self, scheme: Scheme) -> Result<f64> {
        Ok(contraction(self.eta, &self.constants, self.amplification(scheme)?))
    }

    /// Limit `G` of a scheme.
    pub fn limit(&self, scheme: Scheme) -> Result<f64> {
        let g = self.amplification(scheme)?;
        let denom = self.check_eta(g)?;
        Ok(self.eta * self.numerator(scheme, g)? / denom)
    }

    /// Bound on `E[F(w̃_{m+1})] - F(w*)` for `m = 0 .. rounds`.
    pub fn trajectory(&self, scheme: Scheme, rounds: usize) -> Result<Vec<f64>> {
        let g = self.amplification(scheme)?;
        let limit = self.limit(scheme)?;
        let factor = contraction(self.eta, &self.constants, g);
        let scale = 0.5 * self.constants.smoothness * self.init_dist_sq;
        let mut power = 1.0;
        Ok((0..rounds)
            .map(|_| {
                power *= factor;
                scale * power + limit
            })
            .collect())
    }

    /// Bound after `m + 1` updates, evaluated in closed form.
    pub fn bound_at(&self, scheme: Scheme, m: u64) -> Result<f64> {
        let g = self.amplification(scheme)?;
        let limit = self.limit(scheme)?;
        let factor = contraction(self.eta, &self.constants, g);
        let exponent = (m + 1) as f64;
        Ok(0.5 * self.constants.smoothness * self.init_dist_sq * libm::pow(factor, exponent) + limit)
    }

    fn uniform_counts(&self) -> Result<(f64, f64)> {
        let k = self.alphas.len();
        let n = self.participants as f64;
        let kf = k as f64;
        let uniform_alpha = self.alphas.iter().all(|&a| (a - 1.0 / kf).abs() <= 1e-12);
        let uniform_r = self.inclusion.iter().all(|&r| (r - n / kf).abs() <= 1e-12);
        if k == 0 || !uniform_alpha || !uniform_r {
            return Err(Error::Domain {
                name: "alphas/inclusion",
                value: n,
                domain: "uniform: alpha = 1/K, r = N/K",
            });
        }
        Ok((kf, n))
    }

    /// High-power limit of `G_D` in the uniform case,
    /// `η (L φ + 2L³δ²) K / (2μN - 4ηL²K)`.
    pub fn asymptote_digital(&self) -> Result<f64> {
        let (k, n) = self.uniform_counts()?;
        let c = &self.constants;
        let l = c.smoothness;
        let denom = 2.0 * c.mu * n - 4.0 * self.eta * l * l * k;
        if denom <= 0.0 {
            return Err(Error::LearningRate {
                eta: self.eta,
                max: c.mu * n / (2.0 * l * l * k),
            });
        }
        Ok(self.eta * (l * self.phi()? + 2.0 * l * l * l * c.delta * c.delta) * k / denom)
    }

    /// High-power limit of `G_A` in the uniform case,
    /// `2ηL³δ² (Kc - N) / (2μN - 4ηL² (Kc - N))`.
    pub fn asymptote_analog(&self) -> Result<f64> {
        let (k, n) = self.uniform_counts()?;
        let c = &self.constants;
        let l = c.smoothness;
        let excess = k * self.second_moment()? - n;
        let denom = 2.0 * c.mu * n - 4.0 * self.eta * l * l * excess;
        if denom <= 0.0 {
            return Err(Error::LearningRate {
                eta: self.eta,
                max: c.mu * n / (2.0 * l * l * excess),
            });
        }
        Ok(2.0 * self.eta * l * l * l * c.delta * c.delta * excess / denom)
    }

    /// `ε = max_k B N0 θ / (2 N L_k²)`, `ε1 = B N0 / (2 P L²)` for the
    /// weakest device, `ε2 = (b + 1) / M`.
    pub fn rate_constants(&self) -> RateConstants {
        let weakest = self.path_loss.iter().copied().fold(f64::INFINITY, f64::min);
        let bn0 = self.bandwidth * self.noise_density;
        RateConstants {
            eps: bn0 * self.theta / (2.0 * self.participants as f64 * weakest * weakest),
            eps1: bn0 / (2.0 * self.p_max * weakest * weakest),
            eps2: f64::from(self.bits + 1) / self.subbands as f64,
        }
    }

    /// Everything at once. Quantities whose hypotheses fail are `None`.
    pub fn report(&self, rounds: usize) -> Result<BoundReport> {
        let g_d = self.amplification(Scheme::Digital)?;
        let g_a = self.amplification(Scheme::Analog)?;
        let varphi = self.varphi()?;
        Ok(BoundReport {
            g_digital: g_d,
            g_analog: g_a,
            phi: self.phi()?,
            varphi,
            varphi_scaled: self.dim as f64 * varphi,
            second_moment: self.second_moment()?,
            contraction_digital: contraction(self.eta, &self.constants, g_d),
            contraction_analog: contraction(self.eta, &self.constants, g_a),
            max_eta_digital: max_learning_rate(&self.constants, g_d)?,
            max_eta_analog: max_learning_rate(&self.constants, g_a)?,
            trajectory_digital: self.trajectory(Scheme::Digital, rounds).ok(),
            trajectory_analog: self.trajectory(Scheme::Analog, rounds).ok(),
            limit_digital: self.limit(Scheme::Digital).ok(),
            limit_analog: self.limit(Scheme::Analog).ok(),
            asymptote_digital: self.asymptote_digital().ok(),
            asymptote_analog: self.asymptote_analog().ok(),
            rates: self.rate_constants(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub g_digital: f64,
    pub g_analog: f64,
    pub phi: f64,
    pub varphi: f64,
    /// `d ϕ`.
    pub varphi_scaled: f64,
    /// `c`.
    pub second_moment: f64,
    pub contraction_digital: f64,
    pub contraction_analog: f64,
    pub max_eta_digital: f64,
    pub max_eta_analog: f64,
    pub trajectory_digital: Option<Vec<f64>>,
    pub trajectory_analog: Option<Vec<f64>>,
    pub limit_digital: Option<f64>,
    pub limit_analog: Option<f64>,
    pub asymptote_digital: Option<f64>,
    pub asymptote_analog: Option<f64>,
    pub rates: RateConstants,
}

pub fn gap_bound_trajectory(inputs: &BoundInputs, scheme: Scheme, rounds: usize) -> Result<Vec<f64>> {
    inputs.trajectory(scheme, rounds)
}

pub fn limit_gap_digital(inputs: &BoundInputs) -> Result<f64> {
    inputs.limit(Scheme::Digital)
}

pub fn limit_gap_analog(inputs: &BoundInputs) -> Result<f64> {
    inputs.limit(Scheme::Analog)
}

pub fn asymptote_digital(inputs: &BoundInputs) -> Result<f64> {
    inputs.asymptote_digital()
}

pub fn asymptote_analog(inputs: &BoundInputs) -> Result<f64> {
    inputs.asymptote_analog()
}

pub fn rate_constants(inputs: &BoundInputs) -> RateConstants {
    inputs.rate_constants()
}
