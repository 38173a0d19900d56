//! Digital uplink: stochastic quantisation, fixed-rate orthogonal
//! transmission with outage erasures, and the debiased aggregate
//! `ĝ = Σ χ_k α_k ξ_k / r_k · Q(g^k)` with `ξ_k ∈ {0, 1/p_k}`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::channel::{self, ChannelRealization, PowerConvention, RadioParams};
use crate::error::{finite, positive, same_len, Error, Result};
use crate::fl::{ModelState, Population};
use crate::linalg::axpy;
use crate::task::LearningTask;

/// Side information bits carrying `g_min` and `g_max` (two 32-bit floats).
pub const DEFAULT_SIDE_BITS: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGradient {
    pub g_min: f64,
    pub g_max: f64,
    pub bits: u32,
    /// Level indices in `[0, 2^bits - 1]`.
    pub levels: Vec<u32>,
    /// `+1` or `-1`; zero coordinates carry `+1`.
    pub signs: Vec<i8>,
}

impl QuantizedGradient {
    /// Grid spacing `Δ = (g_max - g_min) / (2^b - 1)`.
    pub fn step(&self) -> f64 {
        (self.g_max - self.g_min) / max_level(self.bits)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

fn max_level(bits: u32) -> f64 {
    ((1u64 << bits) - 1) as f64
}

/// Stochastically rounds every coordinate modulus to one of its two
/// neighbouring grid points on `[g_min, g_max]`, choosing the upper one with
/// probability equal to the fractional position. `E[dequantize(q)] = g`.
///
/// A vector whose coordinates all share one modulus is encoded exactly with
/// `Δ = 0` and every level at zero.
pub fn quantize<R: Rng + ?Sized>(g: &[f64], bits: u32, rng: &mut R) -> Result<QuantizedGradient> {
    if !(1..=32).contains(&bits) {
        return Err(Error::Domain {
            name: "bits",
            value: bits as f64,
            domain: "1..=32",
        });
    }
    for &x in g {
        finite("gradient entry", x)?;
    }
    let (g_min, g_max) = g
        .iter()
        .map(|x| x.abs())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
    let g_min = if g.is_empty() { 0.0 } else { g_min };
    let top = max_level(bits);
    let step = (g_max - g_min) / top;

    let mut levels = Vec::with_capacity(g.len());
    let mut signs = Vec::with_capacity(g.len());
    for &x in g {
        signs.push(if x < 0.0 { -1 } else { 1 });
        let level = if step > 0.0 {
            let t = (x.abs() - g_min) / step;
            let lower = libm::floor(t).clamp(0.0, top - 1.0);
            let frac = (t - lower).clamp(0.0, 1.0);
            let up = rng.random::<f64>() < frac;
            lower as u32 + u32::from(up)
        } else {
            0
        };
        levels.push(level);
    }
    Ok(QuantizedGradient {
        g_min,
        g_max,
        bits,
        levels,
        signs,
    })
}

/// `sign_i (g_min + level_i Δ)`.
pub fn dequantize(q: &QuantizedGradient) -> Vec<f64> {
    let step = q.step();
    q.levels
        .iter()
        .zip(&q.signs)
        .map(|(&l, &s)| f64::from(s) * (q.g_min + f64::from(l) * step))
        .collect()
}

/// `d (b + 1) + q`: one sign bit and `b` level bits per coordinate plus the
/// range side information.
pub fn payload_bits(d: u64, b: u64, q: u64) -> u64 {
    d * (b + 1) + q
}

/// Smallest rate parameter meeting the delay target,
/// `θ = 2^{N d (b+1) / (B T_max)} - 1`, nudged up by ulps if rounding would
/// otherwise put the delay a hair above `T_max`.
pub fn min_theta(n: usize, d: usize, b: u32, bandwidth: f64, t_max: f64) -> Result<f64> {
    positive("t_max", t_max)?;
    positive("bandwidth", bandwidth)?;
    let exponent = (n * d) as f64 * f64::from(b + 1) / (bandwidth * t_max);
    let mut theta = libm::expm1(exponent * core::f64::consts::LN_2);
    finite("theta", theta)?;
    while theta > 0.0 && tx_delay_digital(n, d, b, bandwidth, theta)? > t_max {
        theta = theta.next_up();
    }
    Ok(theta)
}

/// `T_D = N d (b + 1) / (B log2(1 + θ))`.
pub fn tx_delay_digital(n: usize, d: usize, b: u32, bandwidth: f64, theta: f64) -> Result<f64> {
    positive("theta", theta)?;
    positive("bandwidth", bandwidth)?;
    Ok((n * d) as f64 * f64::from(b + 1) / (bandwidth * libm::log2(1.0 + theta)))
}

/// How packet success is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutageMode {
    /// Compare the fixed rate with the capacity of the drawn channel.
    Empirical,
    /// Bernoulli draw with the closed-form success probability.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalConfig {
    pub radio: RadioParams,
    pub bits: u32,
    /// Number of participants `N`.
    pub participants: usize,
    pub theta: f64,
    pub t_max: f64,
    pub convention: PowerConvention,
    pub outage_mode: OutageMode,
}

impl DigitalConfig {
    /// Config with `θ` at its minimum for the delay target.
    pub fn at_min_theta(
        radio: RadioParams,
        bits: u32,
        participants: usize,
        d: usize,
        t_max: f64,
        convention: PowerConvention,
        outage_mode: OutageMode,
    ) -> Result<Self> {
        let theta = min_theta(participants, d, bits, radio.bandwidth, t_max)?;
        Ok(Self {
            radio,
            bits,
            participants,
            theta,
            t_max,
            convention,
            outage_mode,
        })
    }

    /// Per-device `p_k` at full power `P_k = P_max`.
    pub fn success_probabilities(&self, path_loss: &[f64]) -> Result<Vec<f64>> {
        path_loss
            .iter()
            .map(|&l| {
                channel::success_probability(
                    self.theta,
                    self.radio.bandwidth,
                    self.participants,
                    self.radio.p_max,
                    l,
                    self.radio.noise_density,
                    self.convention,
                )
            })
            .collect()
    }

    pub fn delay(&self, d: usize) -> Result<f64> {
        tx_delay_digital(self.participants, d, self.bits, self.radio.bandwidth, self.theta)
    }

    fn check_feasible(&self, d: usize) -> Result<f64> {
        self.radio.validate()?;
        let delay = self.delay(d)?;
        if delay > self.t_max {
            return Err(Error::InfeasibleTheta {
                theta: self.theta,
                delay,
                t_max: self.t_max,
            });
        }
        Ok(delay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalRoundOutcome {
    pub g_hat: Vec<f64>,
    /// Participating devices, sorted.
    pub participants: Vec<usize>,
    /// Packet success per participant.
    pub success: Vec<bool>,
    /// Realised `ξ_k` per participant: `1/p_k` on success, else 0.
    pub xi: Vec<f64>,
    pub theta: f64,
    pub delay: f64,
}

impl DigitalRoundOutcome {
    pub fn successes(&self) -> usize {
        self.success.iter().filter(|&&s| s).count()
    }
}

/// One digital round at the task's current model.
pub fn digital_round<R: Rng + ?Sized>(
    task: &LearningTask,
    state: &ModelState,
    participants: &[usize],
    channels: &[ChannelRealization],
    cfg: &DigitalConfig,
    rng: &mut R,
) -> Result<DigitalRoundOutcome> {
    let mut locals = vec![Vec::new(); task.num_devices()];
    for &k in participants {
        locals[k] = task.local_gradient(k, &state.weights)?;
    }
    let population = Population::from_task(task);
    digital_aggregate(&locals, &population, participants, channels, cfg, rng)
}

/// Digital round from precomputed local gradients. Only participants'
/// entries of `locals` are read; `channels` is indexed by device and must
/// be drawn under `cfg.convention`.
pub fn digital_aggregate<R: Rng + ?Sized>(
    locals: &[Vec<f64>],
    population: &Population,
    participants: &[usize],
    channels: &[ChannelRealization],
    cfg: &DigitalConfig,
    rng: &mut R,
) -> Result<DigitalRoundOutcome> {
    if participants.is_empty() {
        return Err(Error::NoParticipants);
    }
    let k_total = population.len();
    same_len("local gradients", k_total, locals.len())?;
    same_len("channels", k_total, channels.len())?;
    same_len("participants", cfg.participants, participants.len())?;
    let d = locals[participants[0]].len();
    let delay = cfg.check_feasible(d)?;
    let p = cfg.success_probabilities(&population.path_loss)?;
    let rate = channel::fixed_rate(cfg.radio.bandwidth, cfg.participants, cfg.theta);
    let sub_bandwidth = cfg.radio.bandwidth / cfg.participants as f64;

    let mut g_hat = vec![0.0; d];
    let mut success = Vec::with_capacity(participants.len());
    let mut xi = Vec::with_capacity(participants.len());
    for &k in participants {
        if k >= k_total {
            return Err(Error::DeviceIndex {
                index: k,
                len: k_total,
            });
        }
        same_len("local gradient", d, locals[k].len())?;
        let q = quantize(&locals[k], cfg.bits, rng)?;
        let ok = match cfg.outage_mode {
            OutageMode::Empirical => {
                let c = channel::capacity(
                    cfg.radio.p_max,
                    population.path_loss[k],
                    channels[k].h,
                    sub_bandwidth,
                    cfg.radio.noise_density,
                )?;
                rate <= c
            }
            OutageMode::Analytic => rng.random::<f64>() < p[k],
        };
        let x = if ok { 1.0 / p[k] } else { 0.0 };
        if ok {
            axpy(
                population.alphas[k] * x / population.inclusion[k],
                &dequantize(&q),
                &mut g_hat,
            );
        }
        success.push(ok);
        xi.push(x);
    }
    Ok(DigitalRoundOutcome {
        g_hat,
        participants: participants.to_vec(),
        success,
        xi,
        theta: cfg.theta,
        delay,
    })
}
