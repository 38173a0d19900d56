//! Bound overlays: the gap-bound trajectory per paradigm in the trace row
//! layout, plus a key/value summary of every bound constant.

use std::fs;
use std::path::Path;

use crate::config::Paradigm;
use crate::output::{float, opt, TRACE_HEADER};
use crate::sweep::limit_and_asymptote;
use crate::trial::{scheme, Setup, SimError};

/// Writes `bounds_<paradigm>.csv` and `bounds_summary.csv`. Fails if η
/// breaks the hypothesis for any paradigm of the config.
pub fn emit_bound_overlay(setup: &Setup, dir: &Path) -> Result<(), SimError> {
    setup.check_learning_rate()?;
    fs::create_dir_all(dir)?;
    let cfg = &setup.config;
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    header.extend(["limit", "asymptote"]);
    for &p in cfg.paradigm.expand() {
        let traj = setup.bounds.trajectory(scheme(p), cfg.rounds)?;
        let (limit, asym) = limit_and_asymptote(setup, p);
        let delay = match p {
            Paradigm::Digital => setup.digital.delay(cfg.dim)?,
            Paradigm::Analog => setup.analog.delay(cfg.dim),
            _ => 0.0,
        };
        let mut w = csv::Writer::from_path(dir.join(format!("bounds_{p}.csv")))?;
        w.write_record(&header)?;
        for (m, b) in traj.iter().enumerate() {
            w.write_record([
                m.to_string(),
                "nan".into(),
                "nan".into(),
                float(*b),
                float(delay),
                "nan".into(),
                "nan".into(),
                opt(limit),
                opt(asym),
            ])?;
        }
        w.flush()?;
    }
    let report = setup.bounds.report(0)?;
    let b = &setup.bounds;
    let mean_p = b.success.iter().sum::<f64>() / b.success.len() as f64;
    let entries: Vec<(&str, Option<f64>)> = vec![
        ("g_digital", Some(report.g_digital)),
        ("g_analog", Some(report.g_analog)),
        ("phi", Some(report.phi)),
        ("varphi", Some(report.varphi)),
        ("varphi_scaled", Some(report.varphi_scaled)),
        ("second_moment", Some(report.second_moment)),
        ("contraction_digital", Some(report.contraction_digital)),
        ("contraction_analog", Some(report.contraction_analog)),
        ("max_eta_digital", Some(report.max_eta_digital)),
        ("max_eta_analog", Some(report.max_eta_analog)),
        ("limit_digital", report.limit_digital),
        ("limit_analog", report.limit_analog),
        ("asymptote_digital", report.asymptote_digital),
        ("asymptote_analog", report.asymptote_analog),
        ("eps", Some(report.rates.eps)),
        ("eps1", Some(report.rates.eps1)),
        ("eps2", Some(report.rates.eps2)),
        ("theta", Some(b.theta)),
        ("mean_success_probability", Some(mean_p)),
        ("mu", Some(b.constants.mu)),
        ("smoothness", Some(b.constants.smoothness)),
        ("gamma", Some(b.constants.gamma)),
        ("delta", Some(b.constants.delta)),
        ("init_dist_sq", Some(b.init_dist_sq)),
    ];
    let mut w = csv::Writer::from_path(dir.join("bounds_summary.csv"))?;
    w.write_record(["quantity", "value"])?;
    for (k, v) in entries {
        w.write_record([k.to_string(), opt(v)])?;
    }
    w.flush()?;
    Ok(())
}
