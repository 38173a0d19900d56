//! Seed-parallel trials and parameter sweeps.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Paradigm};
use crate::output::{float, opt};
use crate::trial::{run_trial, scheme, Setup, SimError, TrialTrace};

/// Seed-averaged statistics of one paradigm.
#[derive(Debug, Clone, PartialEq)]
pub struct Averaged {
    pub paradigm: Paradigm,
    pub seeds: usize,
    /// Mean and standard error of the gap at every round.
    pub gap_mean: Vec<f64>,
    pub gap_stderr: Vec<f64>,
    pub mse_mean: Vec<f64>,
    pub delay_mean: Vec<f64>,
    pub successes_mean: Vec<f64>,
    pub truncations_mean: Vec<f64>,
    pub bound: Option<Vec<f64>>,
    /// Largest delay and transmit energy seen in any round of any seed.
    pub max_delay: f64,
    pub max_power: f64,
}

impl Averaged {
    pub fn final_gap(&self) -> Option<(f64, f64)> {
        Some((*self.gap_mean.last()?, *self.gap_stderr.last()?))
    }
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages traces of one paradigm over seeds.
pub fn average(setup: &Setup, paradigm: Paradigm, traces: &[&TrialTrace]) -> Averaged {
    let rounds = setup.config.rounds;
    let col = |f: &dyn Fn(usize, &TrialTrace) -> f64| -> Vec<(f64, f64)> {
        (0..rounds)
            .map(|m| mean_sd(traces.iter().map(|t| f(m, t))))
            .collect()
    };
    let gap = col(&|m, t| t.rows[m].gap);
    let flat = |f: &dyn Fn(usize, &TrialTrace) -> f64| col(f).into_iter().map(|x| x.0).collect();
    let rows = traces.iter().flat_map(|t| &t.rows);
    Averaged {
        paradigm,
        seeds: traces.len(),
        gap_mean: gap.iter().map(|x| x.0).collect(),
        gap_stderr: gap.iter().map(|x| x.1).collect(),
        mse_mean: flat(&|m, t| t.rows[m].mse),
        delay_mean: flat(&|m, t| t.rows[m].delay),
        successes_mean: flat(&|m, t| t.rows[m].successes as f64),
        truncations_mean: flat(&|m, t| t.rows[m].truncations as f64),
        bound: setup.bound_trajectory(paradigm),
        max_delay: rows.clone().map(|r| r.delay).fold(0.0, f64::max),
        max_power: rows.map(|r| r.max_power).fold(0.0, f64::max),
    }
}

/// Runs every seed of the config in parallel and averages per paradigm.
pub fn run_seeds(setup: &Setup) -> Result<Vec<Averaged>, SimError> {
    let all: Vec<Vec<TrialTrace>> = setup
        .config
        .seeds
        .par_iter()
        .map(|&s| run_trial(setup, s))
        .collect::<Result<_, _>>()?;
    Ok(setup
        .config
        .paradigm
        .expand()
        .iter()
        .map(|&p| {
            let traces: Vec<&TrialTrace> = all.iter().flatten().filter(|t| t.paradigm == p).collect();
            average(setup, p, &traces)
        })
        .collect())
}

/// Result of one swept value.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    /// `Err` holds the reason the point could not run.
    pub outcome: Result<Vec<Averaged>, String>,
    pub limits: Vec<(Paradigm, Option<f64>, Option<f64>)>,
    pub bound_valid: Vec<(Paradigm, bool)>,
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "sweep_value",
    "paradigm",
    "mean_final_gap",
    "stderr",
    "bound_limit",
    "bound_asymptote",
    "feasible",
    "bound_valid",
];

pub fn limit_and_asymptote(setup: &Setup, p: Paradigm) -> (Option<f64>, Option<f64>) {
    let b = &setup.bounds;
    let limit = b.limit(scheme(p)).ok();
    let asym = match p {
        Paradigm::Digital => b.asymptote_digital().ok(),
        Paradigm::Analog => b.asymptote_analog().ok(),
        _ => None,
    };
    (limit, asym)
}

/// Runs one point of a sweep. Infeasible points are reported, not raised.
pub fn sweep_point(base: &ExperimentConfig, param: &str, value: &str) -> Result<SweepPoint, SimError> {
    let mut cfg = base.clone();
    cfg.set(param, value)?;
    cfg.sweep = None;
    let paradigms = cfg.paradigm.expand();
    let setup = match Setup::new(&cfg) {
        Ok(s) => s,
        Err(e) if e.is_infeasible() => {
            return Ok(SweepPoint {
                value: value.to_string(),
                outcome: Err(e.to_string()),
                limits: paradigms.iter().map(|&p| (p, None, None)).collect(),
                bound_valid: paradigms.iter().map(|&p| (p, false)).collect(),
            })
        }
        Err(e) => return Err(e),
    };
    let limits = paradigms
        .iter()
        .map(|&p| {
            let (l, a) = limit_and_asymptote(&setup, p);
            (p, l, a)
        })
        .collect();
    let bound_valid = paradigms
        .iter()
        .map(|&p| (p, setup.bounds.limit(scheme(p)).is_ok()))
        .collect();
    let outcome = match run_seeds(&setup) {
        Ok(a) => Ok(a),
        Err(e @ SimError::Trial { .. }) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(SweepPoint {
        value: value.to_string(),
        outcome,
        limits,
        bound_valid,
    })
}

pub fn run_sweep(base: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<SweepPoint>, SimError> {
    base.validate()?;
    if !crate::config::KEYS.contains(&param) {
        return Err(crate::config::ConfigError::UnknownKey(param.to_string()).into());
    }
    values.iter().map(|v| sweep_point(base, param, v)).collect()
}

fn averaged_rows(w: &mut csv::Writer<fs::File>, a: &Averaged) -> csv::Result<()> {
    for m in 0..a.gap_mean.len() {
        w.write_record([
            a.paradigm.to_string(),
            m.to_string(),
            float(a.gap_mean[m]),
            float(a.mse_mean[m]),
            opt(a.bound.as_ref().map(|b| b[m])),
            float(a.delay_mean[m]),
            float(a.successes_mean[m]),
            float(a.truncations_mean[m]),
            float(a.gap_stderr[m]),
        ])?;
    }
    Ok(())
}

/// Writes `sweep_<param>_<i>.csv` per value and `summary.csv`.
pub fn write_sweep(dir: &Path, param: &str, points: &[SweepPoint]) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
    summary.write_record(SUMMARY_HEADER)?;
    for (i, pt) in points.iter().enumerate() {
        let mut per = csv::Writer::from_path(dir.join(format!("sweep_{param}_{i}.csv")))?;
        per.write_record([
            "paradigm",
            "round",
            "m_gap",
            "mse",
            "bound",
            "delay",
            "successes",
            "truncations",
            "m_gap_stderr",
        ])?;
        for (p, limit, asym) in &pt.limits {
            let valid = pt.bound_valid.iter().any(|(q, v)| q == p && *v);
            let avg = pt.outcome.as_ref().ok().and_then(|v| v.iter().find(|a| a.paradigm == *p));
            if let Some(a) = avg {
                averaged_rows(&mut per, a)?;
            }
            let (mean, se) = avg.and_then(Averaged::final_gap).map_or((None, None), |(m, s)| (Some(m), Some(s)));
            summary.write_record([
                pt.value.clone(),
                p.to_string(),
                opt(mean),
                opt(se),
                opt(*limit),
                opt(*asym),
                avg.is_some().to_string(),
                valid.to_string(),
            ])?;
        }
        per.flush()?;
    }
    summary.flush()?;
    Ok(())
}
