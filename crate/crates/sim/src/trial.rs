//! A single seeded training run: sample, compute local gradients,
//! transport, aggregate, step.

use fedwire_core::analog::{analog_aggregate, AnalogConfig};
use fedwire_core::bounds::{BoundInputs, Scheme};
use fedwire_core::channel::{draw_channel, ChannelRealization, PowerConvention, RadioParams};
use fedwire_core::digital::{digital_aggregate, min_theta, DigitalConfig};
use fedwire_core::fl::{debiased_sum, sgd_step, ModelState, Population};
use fedwire_core::linalg::dist_sq;
use fedwire_core::rng::{Purpose, Streams};
use fedwire_core::sampling::sample_participants;
use fedwire_core::task::{
    make_logistic_task, make_quadratic_task, LearningTask, LogisticSpec, QuadraticSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Paradigm, TaskFamily};

#[derive(Debug, Error)]
pub enum SimError {
    /// The configuration cannot run as specified.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A transport or task failure inside a trial.
    #[error("seed {seed}, round {round}, {paradigm}: {source}")]
    Trial {
        seed: u64,
        round: usize,
        paradigm: Paradigm,
        source: fedwire_core::Error,
    },
    #[error(transparent)]
    Core(#[from] fedwire_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    /// Whether the error is the user's configuration rather than a fault.
    pub fn is_infeasible(&self) -> bool {
        use fedwire_core::Error as E;
        match self {
            SimError::Infeasible(_) | SimError::Config(ConfigError::Invalid { .. }) => true,
            SimError::Core(e) => matches!(
                e,
                E::InfeasibleTheta { .. } | E::InfeasibleDelay { .. } | E::LearningRate { .. }
            ),
            _ => false,
        }
    }
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    /// Gap after this round's update.
    pub gap: f64,
    /// `‖ĝ - ∇F(w)‖²` of this round's estimate.
    pub mse: f64,
    /// Gap bound after this round's update; `None` if η breaks the
    /// hypothesis.
    pub bound: Option<f64>,
    pub delay: f64,
    pub successes: usize,
    pub truncations: usize,
    /// Largest transmit energy of the round (analog only).
    pub max_power: f64,
    /// Held-out accuracy after the update (logistic tasks).
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub paradigm: Paradigm,
    pub seed: u64,
    pub rows: Vec<RoundTrace>,
}

/// Everything derived from a config before any seed is drawn.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub task: LearningTask,
    pub population: Population,
    pub radio: RadioParams,
    pub digital: DigitalConfig,
    pub analog: AnalogConfig,
    pub bounds: BoundInputs,
}

pub fn build_task(cfg: &ExperimentConfig) -> Result<LearningTask, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.task.seed);
    let mut task = match cfg.task.family {
        TaskFamily::Quadratic => make_quadratic_task(
            &QuadraticSpec {
                dim: cfg.dim,
                devices: cfg.num_devices,
                heterogeneity: cfg.task.heterogeneity,
                conditioning: cfg.task.conditioning,
                init_distance: cfg.task.init_distance,
                alphas: None,
            },
            &mut rng,
        )?,
        TaskFamily::Logistic => make_logistic_task(
            &LogisticSpec {
                dim: cfg.dim,
                devices: cfg.num_devices,
                samples_per_device: cfg.task.samples_per_device,
                holdout_samples: cfg.task.holdout_samples,
                heterogeneity: cfg.task.heterogeneity,
                regularization: cfg.task.regularization,
                alphas: None,
            },
            &mut rng,
        )?,
    };
    task.set_links(&cfg.inclusion(), &cfg.path_losses())?;
    Ok(task)
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let task = build_task(cfg)?;
        let population = Population::from_task(&task);
        let radio = RadioParams {
            bandwidth: cfg.bandwidth,
            noise_density: cfg.noise_density,
            p_max: cfg.p_max,
            subbands: cfg.subbands,
            rho: cfg.rho,
        };
        let t_max = cfg.t_max();
        let theta = match cfg.theta {
            Some(t) => t,
            None => min_theta(cfg.participants, cfg.dim, cfg.bits, cfg.bandwidth, t_max)?,
        };
        let digital = DigitalConfig {
            radio,
            bits: cfg.bits,
            participants: cfg.participants,
            theta,
            t_max,
            convention: cfg.power_convention.digital(),
            outage_mode: cfg.outage_mode,
        };
        if cfg.paradigm.includes_digital() {
            let delay = digital.delay(cfg.dim)?;
            if delay > t_max {
                return Err(fedwire_core::Error::InfeasibleTheta { theta, delay, t_max }.into());
            }
        }
        let analog = AnalogConfig {
            radio,
            gamma_th: cfg.gamma_th,
            convention: cfg.power_convention.analog(),
            zeta_mode: cfg.zeta_mode,
            gamma: task.constants().gamma,
            t_max,
            noise: cfg.receiver_noise,
        };
        let bounds = BoundInputs {
            constants: *task.constants(),
            eta: cfg.eta,
            alphas: task.alphas(),
            inclusion: task.inclusion(),
            path_loss: task.path_loss(),
            success: digital.success_probabilities(&task.path_loss())?,
            bits: cfg.bits,
            gamma_th: cfg.gamma_th,
            rho: cfg.rho,
            bandwidth: cfg.bandwidth,
            noise_density: cfg.noise_density,
            p_max: cfg.p_max,
            dim: cfg.dim,
            init_dist_sq: task.init_dist_sq(),
            participants: cfg.participants,
            subbands: cfg.subbands,
            theta,
            analog_convention: analog.convention,
        };
        Ok(Self {
            config: cfg.clone(),
            task,
            population,
            radio,
            digital,
            analog,
            bounds,
        })
    }

    /// Checks η against the step-size maximum of every paradigm the config
    /// runs.
    pub fn check_learning_rate(&self) -> Result<(), SimError> {
        for &p in self.config.paradigm.expand() {
            let max = self.bounds.max_learning_rate(scheme(p))?;
            if !(self.config.eta < max) {
                return Err(SimError::Infeasible(format!(
                    "eta = {} is not below the {p} maximum {max:e}",
                    self.config.eta
                )));
            }
        }
        Ok(())
    }

    /// Bound trajectory of a paradigm, `None` if η breaks the hypothesis.
    pub fn bound_trajectory(&self, paradigm: Paradigm) -> Option<Vec<f64>> {
        self.bounds
            .trajectory(scheme(paradigm), self.config.rounds)
            .ok()
    }
}

pub fn scheme(p: Paradigm) -> Scheme {
    match p {
        Paradigm::Digital => Scheme::Digital,
        Paradigm::Analog => Scheme::Analog,
        Paradigm::Ideal => Scheme::Ideal,
        Paradigm::Both => unreachable!("expanded before use"),
    }
}

fn channels(streams: &Streams, round: u64, k: usize, rho: f64, conv: PowerConvention) -> fedwire_core::Result<Vec<ChannelRealization>> {
    (0..k)
        .map(|dev| draw_channel(rho, conv, &mut streams.get(Purpose::Channel, round, dev as u32)))
        .collect()
}

/// Runs every paradigm of the config on one seed.
pub fn run_trial(setup: &Setup, seed: u64) -> Result<Vec<TrialTrace>, SimError> {
    setup
        .config
        .paradigm
        .expand()
        .iter()
        .map(|&p| run_paradigm(setup, p, seed))
        .collect()
}

fn run_paradigm(setup: &Setup, paradigm: Paradigm, seed: u64) -> Result<TrialTrace, SimError> {
    let cfg = &setup.config;
    let task = &setup.task;
    let streams = Streams::new(seed);
    let bound = setup.bound_trajectory(paradigm);
    let n = cfg.participants;
    let k = cfg.num_devices;
    let t_max = cfg.t_max();
    let mut state = ModelState::initial(task);
    let mut rows = Vec::with_capacity(cfg.rounds);

    for m in 0..cfg.rounds {
        let fail = |source| SimError::Trial {
            seed,
            round: m,
            paradigm,
            source,
        };
        let round = m as u64;
        let locals = task.local_gradients(&state.weights).map_err(fail)?;
        task.check_gradient_bound(&locals).map_err(fail)?;
        let truth = task.gradient(&state.weights).map_err(fail)?;
        let participants =
            sample_participants(&setup.population.inclusion, n, &mut streams.round(Purpose::Sampler, round))
                .map_err(fail)?;

        let (g_hat, delay, successes, truncations, max_power) = match paradigm {
            Paradigm::Ideal => {
                let g = debiased_sum(&locals, &setup.population.alphas, &setup.population.inclusion, &participants)
                    .map_err(fail)?;
                (g, 0.0, n, 0, 0.0)
            }
            Paradigm::Digital => {
                let ch = channels(&streams, round, k, cfg.rho, setup.digital.convention).map_err(fail)?;
                let mut rng = streams.round(Purpose::Quantizer, round);
                let out = digital_aggregate(&locals, &setup.population, &participants, &ch, &setup.digital, &mut rng)
                    .map_err(fail)?;
                let s = out.successes();
                (out.g_hat, out.delay, s, 0, 0.0)
            }
            Paradigm::Analog => {
                let ch = channels(&streams, round, k, cfg.rho, setup.analog.convention).map_err(fail)?;
                let mut rng = streams.round(Purpose::Noise, round);
                let out = analog_aggregate(&locals, &setup.population, &participants, &ch, &setup.analog, &mut rng)
                    .map_err(fail)?;
                let t = out.truncations();
                let p = out.max_power();
                (out.g_hat, out.delay, n - t, t, p)
            }
            Paradigm::Both => unreachable!("expanded before use"),
        };
        if delay > t_max {
            return Err(fail(fedwire_core::Error::InfeasibleDelay { delay, t_max }));
        }
        if max_power > cfg.p_max * (1.0 + 1e-12) {
            return Err(fail(fedwire_core::Error::PowerViolation {
                device: usize::MAX,
                power: max_power,
                p_max: cfg.p_max,
            }));
        }
        let mse = dist_sq(&g_hat, &truth);
        state = sgd_step(&state, &g_hat, cfg.eta).map_err(fail)?;
        let gap = task.optimality_gap(&state.weights).map_err(fail)?;
        rows.push(RoundTrace {
            round: m,
            gap,
            mse,
            bound: bound.as_ref().map(|b| b[m]),
            delay,
            successes,
            truncations,
            max_power,
            accuracy: task.accuracy(&state.weights),
        });
    }
    Ok(TrialTrace { paradigm, seed, rows })
}
