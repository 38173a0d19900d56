//! End-to-end acceptance suite. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line under `cargo test`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fedwire::config::{ExperimentConfig, Paradigm};
use fedwire::output::trace_to_string;
use fedwire::sweep::{run_seeds, sweep_point, Averaged};
use fedwire::trial::{run_trial, Setup};
use fedwire_core::analog::analog_aggregate;
use fedwire_core::bounds::{BoundInputs, Scheme};
use fedwire_core::channel::{
    capacity, draw_channel, fixed_rate, success_probability, PowerConvention,
};
use fedwire_core::digital::{dequantize, digital_aggregate, quantize};
use fedwire_core::rng::{Purpose, Streams};
use fedwire_core::sampling::sample_participants;
use fedwire_core::special::exp_integral_e1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("shipped config loads")
}

/// Worst transmit energy and delay seen by any run, for criterion 9.
#[derive(Default)]
struct Feasibility {
    rounds: usize,
    max_power_ratio: f64,
    max_delay_ratio: f64,
}

impl Feasibility {
    fn record(&mut self, power: f64, p_max: f64, delay: f64, t_max: f64) {
        self.rounds += 1;
        self.max_power_ratio = self.max_power_ratio.max(power / p_max);
        self.max_delay_ratio = self.max_delay_ratio.max(delay / t_max);
    }

    fn record_averaged(&mut self, setup: &Setup, a: &Averaged) {
        let cfg = &setup.config;
        self.record(a.max_power, cfg.p_max, a.max_delay, cfg.t_max());
    }
}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn within_runtime(v: Verdict, elapsed: Duration, limit: Duration) -> Verdict {
    let fast = elapsed <= limit;
    verdict(
        v.ok && fast,
        format!("{} [{:.2?} of {:.0?}]", v.detail, elapsed, limit),
    )
}

/// Streaming per-coordinate mean and variance.
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / self.n;
            *s += delta * (v - *m);
        }
    }

    fn stderr(&self, i: usize) -> f64 {
        (self.m2[i] / (self.n - 1.0) / self.n).sqrt()
    }
}

fn c1_unbiasedness(feas: &mut Feasibility) -> Verdict {
    let setup = Setup::new(&load("default.toml")).unwrap();
    let task = &setup.task;
    let w: Vec<f64> = task.optimum().iter().map(|x| x + 0.05).collect();
    let locals = task.local_gradients(&w).unwrap();
    let truth = task.gradient(&w).unwrap();
    let rounds = 100_000u64;
    let k = setup.config.num_devices;
    let n = setup.config.participants;
    let streams = Streams::new(2024);
    let mut dig = Moments::new(truth.len());
    let mut ana = Moments::new(truth.len());
    for m in 0..rounds {
        let part =
            sample_participants(&setup.population.inclusion, n, &mut streams.round(Purpose::Sampler, m))
                .unwrap();
        let draw = |conv| -> Vec<_> {
            (0..k)
                .map(|dev| {
                    draw_channel(setup.config.rho, conv, &mut streams.get(Purpose::Channel, m, dev as u32))
                        .unwrap()
                })
                .collect()
        };
        let ch = draw(setup.digital.convention);
        let mut rng = streams.round(Purpose::Quantizer, m);
        let d = digital_aggregate(&locals, &setup.population, &part, &ch, &setup.digital, &mut rng).unwrap();
        feas.record(0.0, setup.config.p_max, d.delay, setup.config.t_max());
        dig.push(&d.g_hat);
        let ch = draw(setup.analog.convention);
        let mut rng = streams.round(Purpose::Noise, m);
        let a = analog_aggregate(&locals, &setup.population, &part, &ch, &setup.analog, &mut rng).unwrap();
        feas.record(a.max_power(), setup.config.p_max, a.delay, setup.config.t_max());
        ana.push(&a.g_hat);
    }
    let worst = |mo: &Moments| {
        (0..truth.len())
            .map(|i| (mo.mean[i] - truth[i]).abs() / mo.stderr(i))
            .fold(0.0, f64::max)
    };
    let (wd, wa) = (worst(&dig), worst(&ana));
    verdict(
        wd <= 4.0 && wa <= 4.0,
        format!("max |mean - g| / stderr: digital {wd:.2}, analog {wa:.2} (limit 4)"),
    )
}

fn c2_outage_law() -> Verdict {
    let (b, n0) = (1e6, 1e-11);
    let draws = 100_000;
    // (θ, N, P, L): success probabilities spread over (0, 1)
    let points = [
        (21.6, 10, 1e-3, 0.22),
        (5.5, 6, 1e-3, 0.22),
        (146.0, 16, 1e-3, 0.22),
        (21.6, 10, 1e-4, 0.22),
        (2.0, 4, 1e-4, 0.05),
    ];
    let conv = PowerConvention::Mean2;
    let mut worst = 0.0f64;
    let mut ok = true;
    for (i, &(theta, n, p_tx, l)) in points.iter().enumerate() {
        let p = success_probability(theta, b, n, p_tx, l, n0, conv).unwrap();
        let rate = fixed_rate(b, n, theta);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let hits = (0..draws)
            .filter(|_| {
                let h = draw_channel(0.9, conv, &mut rng).unwrap().h;
                rate <= capacity(p_tx, l, h, b / n as f64, n0).unwrap()
            })
            .count();
        let f = hits as f64 / draws as f64;
        let half = 2.5758 * (p * (1.0 - p) / draws as f64).sqrt();
        ok &= (f - p).abs() <= half;
        worst = worst.max((f - p).abs() / half);
    }
    verdict(
        ok,
        format!("5 points, worst |freq - p| at {worst:.2} of the 99% half-width"),
    )
}

fn c3_quantizer() -> Verdict {
    // 1000 moduli on a grid across the range, with alternating signs
    let g: Vec<f64> = (0..1000)
        .map(|i| {
            let x = 0.1 + 2.9 * i as f64 / 999.0;
            if i % 2 == 0 { x } else { -x }
        })
        .collect();
    let reps = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok_err = true;
    let mut sum = vec![0.0; g.len()];
    let mut sq = vec![0.0; g.len()];
    let mut step = 0.0;
    for _ in 0..reps {
        let q = quantize(&g, 3, &mut rng).unwrap();
        step = q.step();
        for (i, x) in dequantize(&q).iter().enumerate() {
            let e = x - g[i];
            ok_err &= e.abs() <= step * (1.0 + 1e-12);
            sum[i] += e;
            sq[i] += e * e;
        }
    }
    let r = reps as f64;
    let mut ok_var = true;
    let mut worst_mean: f64 = 0.0;
    for i in 0..g.len() {
        let mean = sum[i] / r;
        let var = sq[i] / r - mean * mean;
        ok_var &= var <= step * step / 4.0 * (1.0 + 1e-9);
        // the error is bounded by Δ/2 in standard deviation
        worst_mean = worst_mean.max(mean.abs() / (0.5 * step / r.sqrt()));
    }
    let grand = sum.iter().sum::<f64>() / (r * g.len() as f64);
    let grand_tol = 4.0 * 0.5 * step / (r * g.len() as f64).sqrt();
    let ok = ok_err && ok_var && worst_mean <= 5.0 && grand.abs() <= grand_tol;
    verdict(
        ok,
        format!(
            "|e| <= Δ: {ok_err}; var <= Δ²/4: {ok_var}; worst coordinate mean {worst_mean:.2} sd; overall mean {grand:.1e} (tol {grand_tol:.1e})"
        ),
    )
}

fn c4_dominance(feas: &mut Feasibility) -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for paradigm in [Paradigm::Digital, Paradigm::Analog] {
        let mut cfg = load("default.toml");
        cfg.paradigm = paradigm;
        cfg.rounds = 501;
        cfg.seeds = (0..200).collect();
        let base = Setup::new(&cfg).unwrap();
        let scheme = if paradigm == Paradigm::Digital { Scheme::Digital } else { Scheme::Analog };
        cfg.eta = 0.5 * base.bounds.max_learning_rate(scheme).unwrap();
        let setup = Setup::new(&cfg).unwrap();
        let avg = run_seeds(&setup).unwrap().remove(0);
        feas.record_averaged(&setup, &avg);
        let bound = avg.bound.as_ref().expect("η satisfies the hypothesis");
        let mut worst = f64::NEG_INFINITY;
        for m in 0..cfg.rounds {
            let excess = avg.gap_mean[m] - bound[m] - 3.0 * avg.gap_stderr[m];
            worst = worst.max(excess);
            ok &= excess <= 0.0;
        }
        details.push(format!(
            "{paradigm}: eta {:.4}, max(gap - bound - 3se) {worst:.3e}",
            cfg.eta
        ));
    }
    verdict(ok, details.join("; "))
}

fn c5_limits() -> Verdict {
    let setup = Setup::new(&load("default.toml")).unwrap();
    let b = &setup.bounds;
    let mut rel = 0.0f64;
    for scheme in [Scheme::Digital, Scheme::Analog] {
        let tail = b.bound_at(scheme, 1_000_000).unwrap();
        let limit = b.limit(scheme).unwrap();
        rel = rel.max(((tail - limit) / limit).abs());
    }
    let mut strong = load("default.toml");
    strong.p_max = 1e9;
    let strong = Setup::new(&strong).unwrap();
    let gd = strong.bounds.limit(Scheme::Digital).unwrap();
    let gd_inf = strong.bounds.asymptote_digital().unwrap();
    let rel_p = ((gd - gd_inf) / gd_inf).abs();
    let mut flat = load("default.toml");
    flat.task.heterogeneity = 0.0;
    let flat = Setup::new(&flat).unwrap();
    let ga_inf = flat.bounds.asymptote_analog().unwrap();
    let ok = rel <= 1e-9 && rel_p <= 1e-6 && ga_inf == 0.0;
    verdict(
        ok,
        format!("tail vs limit {rel:.1e}; G_D(p->1) vs asymptote {rel_p:.1e}; G_A^inf(delta=0) = {ga_inf}"),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn bounds_for(cfg: &ExperimentConfig) -> BoundInputs {
    Setup::new(cfg).unwrap().bounds
}

fn c6_rates() -> Verdict {
    let mut base = load("default.toml");
    base.eta = 1e-3;

    // low SNR: the receiver-noise term dominates G_A
    let powers: Vec<f64> = (0..6).map(|i| 1e-9 * 2f64.powi(i)).collect();
    let ga_p: Vec<f64> = powers
        .iter()
        .map(|&p| {
            let mut c = base.clone();
            c.p_max = p;
            bounds_for(&c).limit(Scheme::Analog).unwrap()
        })
        .collect();
    let s_p = slope(&powers, &ga_p);

    // small ρ: η tiny enough that the denominator stays near 2μ
    let rhos: Vec<f64> = (0..6).map(|i| 1e-3 * 1.5f64.powi(i)).collect();
    let mut tiny = base.clone();
    tiny.eta = 1e-12;
    let ga_rho: Vec<f64> = rhos
        .iter()
        .map(|&r| {
            let mut c = tiny.clone();
            c.rho = r;
            bounds_for(&c).limit(Scheme::Analog).unwrap()
        })
        .collect();
    let s_rho = slope(&rhos, &ga_rho);

    let ns: Vec<usize> = (1..=20).collect();
    let per_n = |scheme| -> Vec<f64> {
        ns.iter()
            .map(|&n| {
                let mut c = base.clone();
                c.participants = n;
                bounds_for(&c).limit(scheme).unwrap()
            })
            .collect()
    };
    let gd = per_n(Scheme::Digital);
    let ga = per_n(Scheme::Analog);
    let n0 = (0..gd.len()).min_by(|&a, &b| gd[a].total_cmp(&gd[b])).unwrap();
    let gd_up = n0 + 1 < gd.len() && gd[n0..].windows(2).all(|w| w[1] > w[0]);
    let ga_down = ga.windows(2).all(|w| w[1] < w[0]);

    let ok = (s_p + 1.0).abs() <= 0.05 && (s_rho + 2.0).abs() <= 0.1 && gd_up && ga_down;
    verdict(
        ok,
        format!(
            "dlogG_A/dlogP {s_p:.4}; dlogG_A/dlogrho {s_rho:.4}; G_D(N) increasing from N0 = {}: {gd_up}; G_A(N) decreasing: {ga_down}",
            ns[n0]
        ),
    )
}

/// Spearman rank correlation (no ties expected).
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Final seed-averaged gaps of one paradigm along a sweep.
fn sweep_finals(
    base: &ExperimentConfig,
    paradigm: Paradigm,
    param: &str,
    values: &[&str],
    feas: &mut Feasibility,
) -> (Vec<f64>, Vec<f64>, Duration) {
    let start = Instant::now();
    let mut cfg = base.clone();
    cfg.paradigm = paradigm;
    let mut means = Vec::new();
    let mut ses = Vec::new();
    for v in values {
        let pt = sweep_point(&cfg, param, v).unwrap();
        let avg = pt.outcome.expect("trend points are feasible").remove(0);
        let mut point_cfg = cfg.clone();
        point_cfg.set(param, v).unwrap();
        let setup = Setup::new(&point_cfg).unwrap();
        feas.record_averaged(&setup, &avg);
        let (m, s) = avg.final_gap().unwrap();
        means.push(m);
        ses.push(s);
    }
    (means, ses, start.elapsed())
}

fn c7_trends(feas: &mut Feasibility) -> Verdict {
    let base = load("trends.toml");
    let limit = Duration::from_secs(300);
    let mut ok = true;
    let mut details = Vec::new();

    let p_vals = ["1e-4", "3e-4", "1e-3", "3e-3", "1e-2", "3e-2", "1e-1"];
    let (g, s, t) = sweep_finals(&base, Paradigm::Digital, "p_max", &p_vals, feas);
    let xs: Vec<f64> = p_vals.iter().map(|v| v.parse().unwrap()).collect();
    let rho_p = spearman(&xs, &g);
    let total = g[0] - g[g.len() - 1];
    let tail = g[g.len() - 3] - g[g.len() - 1];
    let flat = tail.abs() < 0.1 * total;
    let drop = total > 3.0 * (s[0] + s[s.len() - 1]);
    let pass = rho_p <= -0.8 && flat && drop && t <= limit;
    ok &= pass;
    details.push(format!(
        "digital vs P_max: spearman {rho_p:.2}, last-third share {:.3}, {t:.1?}",
        tail / total
    ));

    let n_vals = ["2", "5", "10", "15", "20"];
    let xs: Vec<f64> = n_vals.iter().map(|v| v.parse().unwrap()).collect();
    let (g, _, t) = sweep_finals(&base, Paradigm::Analog, "participants", &n_vals, feas);
    let rho_n = spearman(&xs, &g);
    let pass = rho_n <= -0.8 && t <= limit;
    ok &= pass;
    details.push(format!("analog vs N: spearman {rho_n:.2}, {t:.1?}"));

    let (g, s, t) = sweep_finals(&base, Paradigm::Digital, "participants", &n_vals, feas);
    let imin = (0..g.len()).min_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
    let last = g.len() - 1;
    let rises = imin < last && g[last] - g[imin] > 3.0 * (s[last] + s[imin]);
    ok &= rises && t <= limit;
    details.push(format!(
        "digital vs N: minimum at N = {}, rises after: {rises}, {t:.1?}",
        n_vals[imin]
    ));

    let r_vals = ["0.3", "0.5", "0.7", "0.9", "1.0"];
    let xs: Vec<f64> = r_vals.iter().map(|v| v.parse().unwrap()).collect();
    let (g, _, t) = sweep_finals(&base, Paradigm::Analog, "rho", &r_vals, feas);
    let rho_r = spearman(&xs, &g);
    let pass = rho_r <= -0.8 && t <= limit;
    ok &= pass;
    details.push(format!("analog vs rho: spearman {rho_r:.2}, {t:.1?}"));
    verdict(ok, details.join("; "))
}

fn c8_e1() -> Verdict {
    // ∫_0^∞ exp(-x e^v) dv by composite Simpson on a fine grid
    fn oracle(x: f64) -> f64 {
        let upper = (800.0 / x).ln().max(1.0);
        let panels = 200_000;
        let h = upper / panels as f64;
        let f = |v: f64| (-x * v.exp()).exp();
        let mut s = f(0.0) + f(upper);
        for i in 1..panels {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }
    let mut worst = 0.0f64;
    for x in [0.01, 0.1, 0.5, 1.0, 5.0, 20.0] {
        let want = oracle(x);
        let got = exp_integral_e1(x).unwrap();
        worst = worst.max(((got - want) / want).abs());
    }
    verdict(worst <= 1e-12, format!("worst relative error {worst:.1e}"))
}

fn c10_reproducible(feas: &mut Feasibility) -> Verdict {
    let setup = Setup::new(&load("default.toml")).unwrap();
    let first = run_trial(&setup, 99).unwrap();
    let second = run_trial(&setup, 99).unwrap();
    for t in &first {
        let power = t.rows.iter().map(|r| r.max_power).fold(0.0, f64::max);
        let delay = t.rows.iter().map(|r| r.delay).fold(0.0, f64::max);
        feas.record(power, setup.config.p_max, delay, setup.config.t_max());
    }
    let a: Vec<String> = first.iter().map(trace_to_string).collect();
    let b: Vec<String> = second.iter().map(trace_to_string).collect();
    let bytes: usize = a.iter().map(String::len).sum();
    verdict(a == b, format!("{} traces, {bytes} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let mut feas = Feasibility::default();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let timed = |f: &mut dyn FnMut() -> Verdict, limit: Duration| {
        let start = Instant::now();
        let v = f();
        within_runtime(v, start.elapsed(), limit)
    };

    results.push((1, "unbiased estimators", timed(&mut || c1_unbiasedness(&mut feas), Duration::from_secs(60))));
    results.push((2, "outage law", timed(&mut c2_outage_law, Duration::from_secs(10))));
    results.push((3, "quantizer contract", timed(&mut c3_quantizer, Duration::from_secs(10))));
    results.push((4, "bound dominance", timed(&mut || c4_dominance(&mut feas), Duration::from_secs(300))));
    results.push((5, "limit consistency", timed(&mut c5_limits, Duration::from_secs(1))));
    results.push((6, "rate constants", timed(&mut c6_rates, Duration::from_secs(1))));
    results.push((7, "trend reproduction", timed(&mut || c7_trends(&mut feas), Duration::from_secs(1200))));
    results.push((8, "exponential integral", timed(&mut c8_e1, Duration::from_secs(1))));
    let c10 = timed(&mut || c10_reproducible(&mut feas), Duration::from_secs(10));
    let c9 = verdict(
        feas.max_power_ratio <= 1.0 + 1e-12 && feas.max_delay_ratio <= 1.0,
        format!(
            "{} rounds checked; max power / P_max {:.6}; max delay / T_max {:.6}",
            feas.rounds, feas.max_power_ratio, feas.max_delay_ratio
        ),
    );
    results.push((9, "power and delay feasibility", c9));
    results.push((10, "reproducibility", c10));

    let mut failed = 0;
    for (n, name, v) in &results {
        let tag = if v.ok { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag}  {name}: {}", v.detail);
        failed += usize::from(!v.ok);
    }
    if failed == 0 {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", results.len());
        ExitCode::FAILURE
    }
}
