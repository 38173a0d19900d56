//! Small-scale Rayleigh fading with imperfect CSI, capacity and outage.
//!
//! The true channel is `h = ρ ĥ + sqrt(1 - ρ²) v` with the device estimate
//! `ĥ` and the error `v` independent circularly-symmetric complex Gaussians.
//! The effective channel seen by the receiver is `L_k h`.
//!
//! Two power conventions are supported. The digital outage law
//! `exp(-B N0 θ / (2 N P L²))` corresponds to `E|h|² = 2`, the analog
//! truncation probability `e^{-γ_th}` to `E|h|² = 1`; [`PowerConvention`]
//! makes the choice explicit wherever it matters.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{nonnegative, positive, unit_interval, Result};

/// Mean small-scale power gain `E|h|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerConvention {
    Mean1,
    Mean2,
}

impl PowerConvention {
    pub fn mean(self) -> f64 {
        match self {
            PowerConvention::Mean1 => 1.0,
            PowerConvention::Mean2 => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Total uplink bandwidth `B` in Hz.
    pub bandwidth: f64,
    /// Noise power spectral density `N0` in W/Hz.
    pub noise_density: f64,
    /// Transmit power budget in W.
    pub p_max: f64,
    /// Number of orthogonal subbands `M`.
    pub subbands: usize,
    /// CSI correlation `ρ`.
    pub rho: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        positive("bandwidth", self.bandwidth)?;
        positive("noise density", self.noise_density)?;
        positive("p_max", self.p_max)?;
        positive("subbands", self.subbands as f64)?;
        unit_interval("rho", self.rho)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    /// Device-side estimate `ĥ`.
    pub h_hat: Complex64,
    /// True small-scale channel `h`.
    pub h: Complex64,
    /// Estimation error component `v`.
    pub v: Complex64,
}

fn complex_gaussian<R: Rng + ?Sized>(std_per_dim: f64, rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(std_per_dim * re, std_per_dim * im)
}

/// Draws `(ĥ, h, v)`. Both `ĥ` and `v` have `E|·|² = convention.mean()`,
/// so the marginal of `h` does too. The draw consumes four standard normals
/// whatever the convention, which keeps paired runs aligned.
pub fn draw_channel<R: Rng + ?Sized>(
    rho: f64,
    convention: PowerConvention,
    rng: &mut R,
) -> Result<ChannelRealization> {
    unit_interval("rho", rho)?;
    let s = libm::sqrt(convention.mean() / 2.0);
    let h_hat = complex_gaussian(s, rng);
    let v = complex_gaussian(s, rng);
    let h = h_hat * rho + v * libm::sqrt(1.0 - rho * rho);
    Ok(ChannelRealization { h_hat, h, v })
}

/// Shannon capacity `B_k log2(1 + P L² |h|² / (B_k N0))` in bit/s.
pub fn capacity(
    power: f64,
    path_loss: f64,
    h: Complex64,
    sub_bandwidth: f64,
    noise_density: f64,
) -> Result<f64> {
    positive("bandwidth", sub_bandwidth)?;
    positive("noise density", noise_density)?;
    nonnegative("power", power)?;
    let snr = power * path_loss * path_loss * h.norm_sqr() / (sub_bandwidth * noise_density);
    Ok(sub_bandwidth * libm::log2(1.0 + snr))
}

/// Common fixed rate `R = (B / N) log2(1 + θ)`.
pub fn fixed_rate(bandwidth: f64, participants: usize, theta: f64) -> f64 {
    bandwidth / participants as f64 * libm::log2(1.0 + theta)
}

/// `Pr{R <= C_k} = exp(-B N0 θ / (mean · N P_k L_k²))`.
pub fn success_probability(
    theta: f64,
    bandwidth: f64,
    participants: usize,
    power: f64,
    path_loss: f64,
    noise_density: f64,
    convention: PowerConvention,
) -> Result<f64> {
    nonnegative("theta", theta)?;
    positive("bandwidth", bandwidth)?;
    positive("power", power)?;
    positive("path loss", path_loss)?;
    positive("participants", participants as f64)?;
    let exponent = bandwidth * noise_density * theta
        / (convention.mean() * participants as f64 * power * path_loss * path_loss);
    Ok(libm::exp(-exponent))
}

/// `Pr{|ĥ|² >= γ_th} = exp(-γ_th / mean)`.
pub fn truncation_probability(gamma_th: f64, convention: PowerConvention) -> Result<f64> {
    nonnegative("gamma_th", gamma_th)?;
    Ok(libm::exp(-gamma_th / convention.mean()))
}
