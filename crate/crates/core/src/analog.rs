//! Analog uplink with over-the-air computation.
//!
//! Participants pre-invert their estimated channel (truncated below
//! `γ_th`), transmit simultaneously on the whole band, and the server reads
//! `ĝ = Re{y} / ζ` off the superposed signal. With imperfect CSI the
//! inversion leaves a per-device distortion
//! `ξ_k = λ Re{h_k* ĥ_k} / |ĥ_k|²`, unbiased for `λ = e^{γ_th}/ρ`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelRealization, PowerConvention, RadioParams};
use crate::error::{finite, nonnegative, positive, same_len, unit_interval, Error, Result};
use crate::fl::{ModelState, Population};
use crate::linalg::norm;
use crate::task::LearningTask;

/// `λ = e^{γ_th} / ρ`.
pub fn compensation(gamma_th: f64, rho: f64) -> Result<f64> {
    compensation_for(gamma_th, rho, PowerConvention::Mean1)
}

/// `λ = e^{γ_th / mean} / ρ`, the unbiasing choice when `E|ĥ|² = mean`.
pub fn compensation_for(gamma_th: f64, rho: f64, convention: PowerConvention) -> Result<f64> {
    nonnegative("gamma_th", gamma_th)?;
    unit_interval("rho", rho)?;
    Ok(libm::exp(gamma_th / convention.mean()) / rho)
}

/// `T_A = d M / B`, independent of the number of participants.
pub fn tx_delay_analog(d: usize, subbands: usize, bandwidth: f64) -> f64 {
    d as f64 * subbands as f64 / bandwidth
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogPrecoder {
    pub beta: Complex64,
    pub truncated: bool,
    pub lambda: f64,
    pub zeta: f64,
}

/// Truncated channel inversion: `β = ζ λ α ĥ* / (r L |ĥ|²)` when
/// `|ĥ|² >= γ_th`, else zero.
pub fn precoder(
    h_hat: Complex64,
    alpha: f64,
    inclusion: f64,
    path_loss: f64,
    gamma_th: f64,
    lambda: f64,
    zeta: f64,
) -> AnalogPrecoder {
    let gain = h_hat.norm_sqr();
    let truncated = gain < gamma_th || gain == 0.0;
    let beta = if truncated {
        Complex64::new(0.0, 0.0)
    } else {
        h_hat.conj() * (zeta * lambda * alpha / (inclusion * path_loss * gain))
    };
    AnalogPrecoder {
        beta,
        truncated,
        lambda,
        zeta,
    }
}

/// How the transmit scaling `ζ` is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZetaMode {
    /// Largest `ζ` keeping every transmitting device within `P_max`.
    Adaptive,
    /// Worst case over `|ĥ|² >= γ_th` and `‖g‖ <= γ`.
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogConfig {
    pub radio: RadioParams,
    pub gamma_th: f64,
    pub convention: PowerConvention,
    pub zeta_mode: ZetaMode,
    /// Gradient norm bound γ, used by the static scaling.
    pub gamma: f64,
    pub t_max: f64,
    /// Receiver noise on or off.
    pub noise: bool,
}

impl AnalogConfig {
    pub fn lambda(&self) -> Result<f64> {
        compensation_for(self.gamma_th, self.radio.rho, self.convention)
    }

    pub fn delay(&self, d: usize) -> f64 {
        tx_delay_analog(d, self.radio.subbands, self.radio.bandwidth)
    }
}

/// `ζ = sqrt(P_max γ_th) / (λ γ) · min_k r_k L_k / α_k`.
///
/// Under the unit-mean convention `1/λ = ρ e^{-γ_th}`. Any device with
/// `|ĥ|² >= γ_th` and `‖g‖ <= γ` then stays within `P_max`.
pub fn static_scaling_factor(cfg: &AnalogConfig, population: &Population) -> Result<f64> {
    let lambda = cfg.lambda()?;
    positive("gamma_th", cfg.gamma_th)?;
    positive("gamma", cfg.gamma)?;
    let worst = population
        .alphas
        .iter()
        .zip(&population.inclusion)
        .zip(&population.path_loss)
        .map(|((a, r), l)| r * l / a)
        .fold(f64::INFINITY, f64::min);
    let zeta = libm::sqrt(cfg.radio.p_max * cfg.gamma_th) * worst / (lambda * cfg.gamma);
    positive("static zeta", zeta)
}

/// Per-round adaptive `ζ = min_k sqrt(P_max) r_k L_k |ĥ_k| / (λ α_k ‖g_k‖)`
/// over non-truncated participants. Devices with a zero gradient place no
/// constraint; if none constrain, the static scaling is returned.
pub fn scaling_factor(
    participants: &[usize],
    locals: &[Vec<f64>],
    channels: &[ChannelRealization],
    population: &Population,
    cfg: &AnalogConfig,
) -> Result<f64> {
    let lambda = cfg.lambda()?;
    let sqrt_p = libm::sqrt(cfg.radio.p_max);
    let mut any = false;
    let mut zeta = f64::INFINITY;
    for &k in participants {
        let gain = channels[k].h_hat.norm_sqr();
        if gain < cfg.gamma_th || gain == 0.0 {
            continue;
        }
        any = true;
        let g = norm(&locals[k]);
        if g > 0.0 {
            let cap = sqrt_p * population.inclusion[k] * population.path_loss[k] * libm::sqrt(gain)
                / (lambda * population.alphas[k] * g);
            zeta = zeta.min(cap);
        }
    }
    if !any {
        return Err(Error::AllTruncated);
    }
    if zeta.is_finite() {
        Ok(zeta)
    } else {
        static_scaling_factor(cfg, population)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogRoundOutcome {
    pub g_hat: Vec<f64>,
    /// Participating devices, sorted.
    pub participants: Vec<usize>,
    /// Realised `ξ_k` per participant (0 when truncated).
    pub xi: Vec<f64>,
    pub truncated: Vec<bool>,
    /// Transmit energy `‖β_k g_k‖²` per participant.
    pub powers: Vec<f64>,
    pub zeta: f64,
    /// Every participant was truncated and the static scaling was used.
    pub all_truncated: bool,
    /// Realised `‖Re{z}‖² / ζ²`.
    pub effective_noise_power: f64,
    pub delay: f64,
}

impl AnalogRoundOutcome {
    pub fn truncations(&self) -> usize {
        self.truncated.iter().filter(|&&t| t).count()
    }

    pub fn max_power(&self) -> f64 {
        self.powers.iter().copied().fold(0.0, f64::max)
    }
}

/// One analog round at the task's current model.
pub fn analog_round<R: Rng + ?Sized>(
    task: &LearningTask,
    state: &ModelState,
    participants: &[usize],
    channels: &[ChannelRealization],
    cfg: &AnalogConfig,
    rng: &mut R,
) -> Result<AnalogRoundOutcome> {
    let mut locals = vec![Vec::new(); task.num_devices()];
    for &k in participants {
        locals[k] = task.local_gradient(k, &state.weights)?;
    }
    let population = Population::from_task(task);
    analog_aggregate(&locals, &population, participants, channels, cfg, rng)
}

/// Analog round from precomputed local gradients. `channels` is indexed by
/// device and must be drawn under `cfg.convention`; `rng` drives the
/// receiver noise.
pub fn analog_aggregate<R: Rng + ?Sized>(
    locals: &[Vec<f64>],
    population: &Population,
    participants: &[usize],
    channels: &[ChannelRealization],
    cfg: &AnalogConfig,
    rng: &mut R,
) -> Result<AnalogRoundOutcome> {
    if participants.is_empty() {
        return Err(Error::NoParticipants);
    }
    cfg.radio.validate()?;
    nonnegative("gamma_th", cfg.gamma_th)?;
    let k_total = population.len();
    same_len("local gradients", k_total, locals.len())?;
    same_len("channels", k_total, channels.len())?;
    for &k in participants {
        if k >= k_total {
            return Err(Error::DeviceIndex {
                index: k,
                len: k_total,
            });
        }
    }
    let d = locals[participants[0]].len();
    for &k in participants {
        same_len("local gradient", d, locals[k].len())?;
        for &x in &locals[k] {
            finite("gradient entry", x)?;
        }
    }
    let delay = cfg.delay(d);
    if delay > cfg.t_max {
        return Err(Error::InfeasibleDelay {
            delay,
            t_max: cfg.t_max,
        });
    }
    let lambda = cfg.lambda()?;
    let (zeta, all_truncated) = match cfg.zeta_mode {
        ZetaMode::Static => (static_scaling_factor(cfg, population)?, false),
        ZetaMode::Adaptive => {
            match scaling_factor(participants, locals, channels, population, cfg) {
                Ok(z) => (z, false),
                Err(Error::AllTruncated) => (static_scaling_factor(cfg, population)?, true),
                Err(e) => return Err(e),
            }
        }
    };
    let all_truncated = all_truncated
        || participants
            .iter()
            .all(|&k| precoder(channels[k].h_hat, 1.0, 1.0, 1.0, cfg.gamma_th, 1.0, 1.0).truncated);

    let mut y = vec![Complex64::new(0.0, 0.0); d];
    let mut xi = Vec::with_capacity(participants.len());
    let mut truncated = Vec::with_capacity(participants.len());
    let mut powers = Vec::with_capacity(participants.len());
    for &k in participants {
        let ch = &channels[k];
        let pre = precoder(
            ch.h_hat,
            population.alphas[k],
            population.inclusion[k],
            population.path_loss[k],
            cfg.gamma_th,
            lambda,
            zeta,
        );
        let g = &locals[k];
        let power = pre.beta.norm_sqr() * crate::linalg::norm_sq(g);
        if power > cfg.radio.p_max * (1.0 + 1e-12) {
            return Err(Error::PowerViolation {
                device: k,
                power,
                p_max: cfg.radio.p_max,
            });
        }
        powers.push(power);
        truncated.push(pre.truncated);
        if pre.truncated {
            xi.push(0.0);
            continue;
        }
        xi.push(lambda * (ch.h.conj() * ch.h_hat).re / ch.h_hat.norm_sqr());
        let coeff = ch.h * population.path_loss[k] * pre.beta;
        for (yi, gi) in y.iter_mut().zip(g) {
            *yi += coeff * *gi;
        }
    }

    let mut noise_energy = 0.0;
    if cfg.noise {
        let std = libm::sqrt(cfg.radio.bandwidth * cfg.radio.noise_density / 2.0);
        for yi in y.iter_mut() {
            let re: f64 = rng.sample::<f64, _>(StandardNormal) * std;
            let im: f64 = rng.sample::<f64, _>(StandardNormal) * std;
            *yi += Complex64::new(re, im);
            noise_energy += re * re;
        }
    }
    let g_hat = y.iter().map(|yi| yi.re / zeta).collect();
    Ok(AnalogRoundOutcome {
        g_hat,
        participants: participants.to_vec(),
        xi,
        truncated,
        powers,
        zeta,
        all_truncated,
        effective_noise_power: noise_energy / (zeta * zeta),
        delay,
    })
}
