//! Strongly convex learning tasks whose assumption constants are known.
//!
//! Two families are provided. Quadratic tasks,
//! `F_k(w) = ½ (w - w_k*)ᵀ A_k (w - w_k*)`, have every constant exact.
//! ℓ2-regularised logistic regression has bounded constants and optima
//! found by Newton's method.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{finite, nonnegative, positive, same_len, unit_interval, Error, Result};
use crate::linalg::{
    self, axpy, cholesky_solve, compose_spectral, dot, mat_vec, norm, quad_form,
    random_orthogonal,
};

/// Constants of the convergence assumptions: strong convexity `mu`,
/// gradient Lipschitz constant `smoothness`, sample-gradient norm bound
/// `gamma` and local-to-global optimum distance `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub mu: f64,
    pub smoothness: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl AssumptionConstants {
    pub fn new(mu: f64, smoothness: f64, gamma: f64, delta: f64) -> Result<Self> {
        positive("mu", mu)?;
        positive("smoothness", smoothness)?;
        nonnegative("gamma", gamma)?;
        nonnegative("delta", delta)?;
        if mu > smoothness {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                domain: "<= smoothness",
            });
        }
        Ok(Self {
            mu,
            smoothness,
            gamma,
            delta,
        })
    }
}

/// Local quadratic loss with its spectral decomposition kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Local logistic regression data. Labels are 0 or 1; rows of `features`
/// are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub regularization: f64,
}

impl LogisticData {
    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    fn rows(&self, d: usize) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.chunks_exact(d).zip(self.labels.iter().copied())
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let d = w.len();
        let n = self.samples() as f64;
        let data: f64 = self
            .rows(d)
            .map(|(x, y)| softplus(dot(x, w)) - y * dot(x, w))
            .sum();
        data / n + 0.5 * self.regularization * linalg::norm_sq(w)
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let d = w.len();
        let n = self.samples() as f64;
        let mut g: Vec<f64> = w.iter().map(|wi| self.regularization * wi).collect();
        for (x, y) in self.rows(d) {
            axpy((sigmoid(dot(x, w)) - y) / n, x, &mut g);
        }
        g
    }

    fn hessian(&self, w: &[f64]) -> Vec<f64> {
        let d = w.len();
        let n = self.samples() as f64;
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = self.regularization;
        }
        for (x, _) in self.rows(d) {
            let s = sigmoid(dot(x, w));
            let c = s * (1.0 - s) / n;
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += c * x[i] * x[j];
                }
            }
        }
        h
    }

    fn gram(&self, d: usize) -> Vec<f64> {
        let n = self.samples() as f64;
        let mut g = vec![0.0; d * d];
        for (x, _) in self.rows(d) {
            for i in 0..d {
                for j in 0..d {
                    g[i * d + j] += x[i] * x[j] / n;
                }
            }
        }
        g
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalLoss {
    Quadratic(QuadraticLoss),
    Logistic(LogisticData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    /// Aggregation weight α_k.
    pub alpha: f64,
    /// Per-round inclusion probability r_k.
    pub inclusion: f64,
    /// Large-scale path-loss amplitude L_k.
    pub path_loss: f64,
    pub loss: LocalLoss,
    pub local_optimum: Vec<f64>,
}

/// Held-out samples for classification accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTask {
    dim: usize,
    devices: Vec<DeviceProfile>,
    optimum: Vec<f64>,
    optimum_value: f64,
    constants: AssumptionConstants,
    initial: Vec<f64>,
    /// `Σ α_k A_k` for quadratic tasks.
    hessian: Option<Vec<f64>>,
    holdout: Option<Holdout>,
}

/// Parameters of [`make_quadratic_task`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub dim: usize,
    pub devices: usize,
    /// Exact reported δ: the largest local-optimum distance from `w*`.
    pub heterogeneity: f64,
    /// `L / μ`, with `L = 1`.
    pub conditioning: f64,
    /// `‖w̃_0 - w*‖`; the model starts at the origin.
    pub init_distance: f64,
    /// Aggregation weights; uniform when `None`.
    pub alphas: Option<Vec<f64>>,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            dim: 32,
            devices: 20,
            heterogeneity: 1.0,
            conditioning: 4.0,
            init_distance: 1.0,
            alphas: None,
        }
    }
}

/// Parameters of [`make_logistic_task`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSpec {
    pub dim: usize,
    pub devices: usize,
    pub samples_per_device: usize,
    pub holdout_samples: usize,
    /// Norm of the per-device feature mean shift (non-IID knob).
    pub heterogeneity: f64,
    pub regularization: f64,
    pub alphas: Option<Vec<f64>>,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            devices: 20,
            samples_per_device: 50,
            holdout_samples: 1000,
            heterogeneity: 1.0,
            regularization: 0.1,
            alphas: None,
        }
    }
}

fn resolve_alphas(alphas: Option<&[f64]>, k: usize) -> Result<Vec<f64>> {
    match alphas {
        None => Ok(vec![1.0 / k as f64; k]),
        Some(a) => {
            same_len("alphas", k, a.len())?;
            for &x in a {
                positive("alpha", x)?;
            }
            let sum: f64 = a.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Domain {
                    name: "sum of alphas",
                    value: sum,
                    domain: "= 1",
                });
            }
            Ok(a.to_vec())
        }
    }
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Builds a quadratic task with `L = 1` and `μ = 1 / conditioning`.
///
/// For `d >= 2` every `A_k` has both extreme eigenvalues, so every local
/// loss is exactly μ-strongly convex and L-smooth. For `d = 1` the devices'
/// scalar curvatures are spread geometrically over `[μ, L]`; a single
/// one-dimensional device can only realise `μ = L = 1`.
///
/// The local optima satisfy `Σ α_k A_k (w* - w_k*) = 0` and are scaled so
/// that the farthest one sits at distance `heterogeneity` from `w*`. With a
/// single device `w_1* = w*` and δ is 0.
pub fn make_quadratic_task<R: Rng + ?Sized>(
    spec: &QuadraticSpec,
    rng: &mut R,
) -> Result<LearningTask> {
    let d = spec.dim;
    let k = spec.devices;
    if d == 0 {
        return Err(Error::Domain {
            name: "dim",
            value: 0.0,
            domain: ">= 1",
        });
    }
    if k == 0 {
        return Err(Error::Domain {
            name: "devices",
            value: 0.0,
            domain: ">= 1",
        });
    }
    nonnegative("heterogeneity", spec.heterogeneity)?;
    nonnegative("init_distance", spec.init_distance)?;
    finite("conditioning", spec.conditioning)?;
    if spec.conditioning < 1.0 {
        return Err(Error::Domain {
            name: "conditioning",
            value: spec.conditioning,
            domain: ">= 1",
        });
    }
    let alphas = resolve_alphas(spec.alphas.as_deref(), k)?;
    let l_max = 1.0;
    let mu = 1.0 / spec.conditioning;
    let ln_cond = libm::log(spec.conditioning);

    let mut losses = Vec::with_capacity(k);
    for dev in 0..k {
        let mut eig = vec![0.0; d];
        if d == 1 {
            eig[0] = if k == 1 {
                l_max
            } else {
                mu * libm::exp(ln_cond * dev as f64 / (k - 1) as f64)
            };
        } else {
            eig[0] = mu;
            eig[d - 1] = l_max;
            for e in eig.iter_mut().take(d - 1).skip(1) {
                *e = mu * libm::exp(ln_cond * rng.random::<f64>());
            }
            eig.shuffle(rng);
        }
        let q = random_orthogonal(d, rng);
        let matrix = compose_spectral(&q, &eig);
        losses.push(QuadraticLoss {
            matrix,
            eigenvalues: eig,
            eigenvectors: q,
        });
    }

    let optimum: Vec<f64> = random_unit(d, rng)
        .into_iter()
        .map(|x| x * spec.init_distance)
        .collect();

    // Offsets x_k with Σ α_k A_k x_k = 0: draw, then subtract A_k^{-1} c.
    let mut offsets: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut c = vec![0.0; d];
    for ((loss, x), &a) in losses.iter().zip(&offsets).zip(&alphas) {
        axpy(a, &mat_vec(&loss.matrix, x), &mut c);
    }
    for (loss, x) in losses.iter().zip(offsets.iter_mut()) {
        let corr = apply_inverse(loss, &c);
        axpy(-1.0, &corr, x);
    }
    let widest = offsets.iter().map(|x| norm(x)).fold(0.0, f64::max);
    let scale = if spec.heterogeneity > 0.0 && widest > 1e-12 {
        spec.heterogeneity / widest
    } else {
        0.0
    };
    let local_optima: Vec<Vec<f64>> = offsets
        .iter()
        .map(|x| optimum.iter().zip(x).map(|(w, xi)| w + scale * xi).collect())
        .collect();
    let delta = local_optima
        .iter()
        .map(|wk| libm::sqrt(linalg::dist_sq(wk, &optimum)))
        .fold(0.0, f64::max);

    let mut hessian = vec![0.0; d * d];
    for (loss, &a) in losses.iter().zip(&alphas) {
        axpy(a, &loss.matrix, &mut hessian);
    }

    let initial = vec![0.0; d];
    let radius = 2.0 * spec.init_distance;
    let gamma = losses
        .iter()
        .zip(&local_optima)
        .map(|(loss, wk)| {
            let offset = linalg::sub(&optimum, wk);
            max_gradient_norm_in_ball(loss, &offset, radius)
        })
        .fold(0.0, f64::max);

    let mu_all = losses
        .iter()
        .flat_map(|l| l.eigenvalues.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let l_all = losses
        .iter()
        .flat_map(|l| l.eigenvalues.iter().copied())
        .fold(0.0, f64::max);

    let optimum_value = losses
        .iter()
        .zip(&local_optima)
        .zip(&alphas)
        .map(|((loss, wk), &a)| a * 0.5 * quad_form(&loss.matrix, &linalg::sub(&optimum, wk)))
        .sum();

    let devices = losses
        .into_iter()
        .zip(local_optima)
        .zip(&alphas)
        .map(|((loss, local_optimum), &alpha)| DeviceProfile {
            alpha,
            inclusion: 1.0,
            path_loss: 1.0,
            loss: LocalLoss::Quadratic(loss),
            local_optimum,
        })
        .collect();

    Ok(LearningTask {
        dim: d,
        devices,
        optimum,
        optimum_value,
        constants: AssumptionConstants::new(mu_all, l_all, gamma, delta)?,
        initial,
        hessian: Some(hessian),
        holdout: None,
    })
}

fn apply_inverse(loss: &QuadraticLoss, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (q, &l) in loss.eigenvectors.iter().zip(&loss.eigenvalues) {
        axpy(dot(q, v) / l, q, &mut out);
    }
    out
}

/// Exact `max ‖A (x + offset)‖` over `‖x‖ <= radius`, solved in the
/// eigenbasis of `A` through the secular equation of the constrained
/// maximisation.
pub fn max_gradient_norm_in_ball(loss: &QuadraticLoss, offset: &[f64], radius: f64) -> f64 {
    let lam = &loss.eigenvalues;
    let c: Vec<f64> = loss.eigenvectors.iter().map(|q| dot(q, offset)).collect();
    let value = |x: &[f64]| -> f64 {
        libm::sqrt(
            lam.iter()
                .zip(x)
                .zip(&c)
                .map(|((l, xi), ci)| (l * (xi + ci)) * (l * (xi + ci)))
                .sum(),
        )
    };
    let n = lam.len();
    if radius == 0.0 {
        return value(&vec![0.0; n]);
    }
    let a: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let s: Vec<f64> = a.iter().zip(&c).map(|(ai, ci)| ai * ci).collect();
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let top = |i: usize| a[i] >= a_max * (1.0 - 1e-12);
    let top_weight: f64 = (0..n).filter(|&i| top(i)).map(|i| s[i] * s[i]).sum();

    if top_weight == 0.0 {
        let mut x: Vec<f64> = (0..n)
            .map(|i| if top(i) { 0.0 } else { s[i] / (a_max - a[i]) })
            .collect();
        let used = linalg::norm_sq(&x);
        if used <= radius * radius {
            let first_top = (0..n).find(|&i| top(i)).unwrap_or(0);
            x[first_top] = libm::sqrt(radius * radius - used);
            return value(&x);
        }
    }

    let s_norm = norm(&s);
    let x_at = |nu: f64| -> Vec<f64> { (0..n).map(|i| s[i] / (nu - a[i])).collect() };
    let mut lo = a_max;
    let mut hi = a_max + s_norm / radius;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if linalg::norm_sq(&x_at(mid)) > radius * radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` keeps ‖x‖ <= radius; `lo` overshoots by at most an ulp of ν.
    let x_hi = x_at(hi);
    let x_lo = x_at(lo);
    let lo_ok = lo > a_max && x_lo.iter().all(|v| v.is_finite());
    if lo_ok {
        value(&x_lo).max(value(&x_hi))
    } else {
        value(&x_hi)
    }
}

/// Builds an ℓ2-regularised logistic regression task.
///
/// Features are standard Gaussian around a per-device mean of norm
/// `heterogeneity`; labels follow a logistic model around a shared random
/// weight vector. `μ` is the regulariser, `L` adds a quarter of the largest
/// local Gram eigenvalue, and `γ` bounds every sample gradient on the ball
/// of radius `2 ‖w̃_0 - w*‖` around `w*`. The optima come from Newton's method.
pub fn make_logistic_task<R: Rng + ?Sized>(
    spec: &LogisticSpec,
    rng: &mut R,
) -> Result<LearningTask> {
    let d = spec.dim;
    let k = spec.devices;
    if d == 0 || k == 0 || spec.samples_per_device == 0 {
        return Err(Error::Domain {
            name: "dim/devices/samples_per_device",
            value: 0.0,
            domain: ">= 1",
        });
    }
    nonnegative("heterogeneity", spec.heterogeneity)?;
    positive("regularization", spec.regularization)?;
    let alphas = resolve_alphas(spec.alphas.as_deref(), k)?;
    let truth: Vec<f64> = random_unit(d, rng).into_iter().map(|x| 2.0 * x).collect();

    let draw_samples = |n: usize, shift: &[f64], rng: &mut R| {
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = shift
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let p = sigmoid(dot(&x, &truth));
            labels.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            features.extend_from_slice(&x);
        }
        (features, labels)
    };

    let mut datasets = Vec::with_capacity(k);
    for _ in 0..k {
        let shift: Vec<f64> = random_unit(d, rng)
            .into_iter()
            .map(|x| x * spec.heterogeneity)
            .collect();
        let (features, labels) = draw_samples(spec.samples_per_device, &shift, rng);
        datasets.push(LogisticData {
            features,
            labels,
            regularization: spec.regularization,
        });
    }
    let zero = vec![0.0; d];
    let (hf, hl) = draw_samples(spec.holdout_samples, &zero, rng);

    let optimum = newton(d, |w| {
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut f = 0.0;
        for (data, &a) in datasets.iter().zip(&alphas) {
            f += a * data.loss(w);
            axpy(a, &data.gradient(w), &mut g);
            axpy(a, &data.hessian(w), &mut h);
        }
        (f, g, h)
    });
    let local_optima: Vec<Vec<f64>> = datasets
        .iter()
        .map(|data| newton(d, |w| (data.loss(w), data.gradient(w), data.hessian(w))))
        .collect();

    let delta = local_optima
        .iter()
        .map(|wk| libm::sqrt(linalg::dist_sq(wk, &optimum)))
        .fold(0.0, f64::max);
    let gram_max = datasets
        .iter()
        .map(|data| linalg::max_eigenvalue_psd(&data.gram(d), d))
        .fold(0.0, f64::max);
    let smoothness = spec.regularization + 0.25 * gram_max;
    let initial = vec![0.0; d];
    let radius = 2.0 * norm(&optimum);
    let max_feature = datasets
        .iter()
        .flat_map(|data| data.features.chunks_exact(d).map(norm))
        .fold(0.0, f64::max);
    let gamma = max_feature + spec.regularization * (norm(&optimum) + radius);
    let optimum_value = datasets
        .iter()
        .zip(&alphas)
        .map(|(data, &a)| a * data.loss(&optimum))
        .sum();

    let devices = datasets
        .into_iter()
        .zip(local_optima)
        .zip(&alphas)
        .map(|((data, local_optimum), &alpha)| DeviceProfile {
            alpha,
            inclusion: 1.0,
            path_loss: 1.0,
            loss: LocalLoss::Logistic(data),
            local_optimum,
        })
        .collect();

    Ok(LearningTask {
        dim: d,
        devices,
        optimum,
        optimum_value,
        constants: AssumptionConstants::new(spec.regularization, smoothness, gamma, delta)?,
        initial,
        hessian: None,
        holdout: Some(Holdout {
            features: hf,
            labels: hl,
        }),
    })
}

/// Damped Newton iteration from the origin for a strongly convex objective.
fn newton<F>(d: usize, mut eval: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>, Vec<f64>),
{
    let mut w = vec![0.0; d];
    for _ in 0..100 {
        let (f, g, h) = eval(&w);
        if norm(&g) < 1e-14 {
            break;
        }
        let Some(step) = cholesky_solve(&h, &g) else {
            break;
        };
        let slope = dot(&g, &step);
        let mut t = 1.0;
        let mut next;
        loop {
            next = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect::<Vec<_>>();
            if eval(&next).0 <= f - 0.25 * t * slope || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let moved = t * norm(&step);
        w = next;
        if moved < 1e-15 * (1.0 + norm(&w)) {
            break;
        }
    }
    w
}

impl LearningTask {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn devices(&self) -> &[DeviceProfile] {
        &self.devices
    }

    pub fn device(&self, k: usize) -> Result<&DeviceProfile> {
        self.devices.get(k).ok_or(Error::DeviceIndex {
            index: k,
            len: self.devices.len(),
        })
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn optimum_value(&self) -> f64 {
        self.optimum_value
    }

    /// Starting model `w̃_0`.
    pub fn initial_weights(&self) -> &[f64] {
        &self.initial
    }

    /// `‖w̃_0 - w*‖²`.
    pub fn init_dist_sq(&self) -> f64 {
        linalg::dist_sq(&self.initial, &self.optimum)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.alpha).collect()
    }

    pub fn inclusion(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.inclusion).collect()
    }

    pub fn path_loss(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.path_loss).collect()
    }

    pub fn is_quadratic(&self) -> bool {
        self.hessian.is_some()
    }

    /// `Σ α_k A_k` for quadratic tasks.
    pub fn global_hessian(&self) -> Option<&[f64]> {
        self.hessian.as_deref()
    }

    /// Attaches inclusion probabilities and path losses to the devices.
    pub fn set_links(&mut self, inclusion: &[f64], path_loss: &[f64]) -> Result<()> {
        same_len("inclusion", self.devices.len(), inclusion.len())?;
        same_len("path_loss", self.devices.len(), path_loss.len())?;
        for (&r, &l) in inclusion.iter().zip(path_loss) {
            unit_interval("inclusion probability", r)?;
            positive("path loss", l)?;
        }
        for ((dev, &r), &l) in self.devices.iter_mut().zip(inclusion).zip(path_loss) {
            dev.inclusion = r;
            dev.path_loss = l;
        }
        Ok(())
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        same_len("weights", self.dim, w.len())?;
        for &x in w {
            finite("weight", x)?;
        }
        Ok(())
    }

    /// `∇F_k(w)`: closed form for quadratic devices, full-batch average for
    /// logistic ones.
    pub fn local_gradient(&self, k: usize, w: &[f64]) -> Result<Vec<f64>> {
        let dev = self.device(k)?;
        self.check_dim(w)?;
        Ok(match &dev.loss {
            LocalLoss::Quadratic(q) => mat_vec(&q.matrix, &linalg::sub(w, &dev.local_optimum)),
            LocalLoss::Logistic(data) => data.gradient(w),
        })
    }

    pub fn local_loss(&self, k: usize, w: &[f64]) -> Result<f64> {
        let dev = self.device(k)?;
        self.check_dim(w)?;
        Ok(match &dev.loss {
            LocalLoss::Quadratic(q) => 0.5 * quad_form(&q.matrix, &linalg::sub(w, &dev.local_optimum)),
            LocalLoss::Logistic(data) => data.loss(w),
        })
    }

    pub fn local_gradients(&self, w: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.devices.len())
            .map(|k| self.local_gradient(k, w))
            .collect()
    }

    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        let mut f = 0.0;
        for (k, dev) in self.devices.iter().enumerate() {
            f += dev.alpha * self.local_loss(k, w)?;
        }
        Ok(f)
    }

    /// `∇F(w) = Σ α_k ∇F_k(w)`.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        for (k, dev) in self.devices.iter().enumerate() {
            axpy(dev.alpha, &self.local_gradient(k, w)?, &mut g);
        }
        Ok(g)
    }

    /// `F(w) - F(w*)`. Quadratic tasks use `½ (w - w*)ᵀ H (w - w*)`, which
    /// is exact and never negative.
    pub fn optimality_gap(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        match &self.hessian {
            Some(h) => Ok((0.5 * quad_form(h, &linalg::sub(w, &self.optimum))).max(0.0)),
            None => Ok((self.loss(w)? - self.optimum_value).max(0.0)),
        }
    }

    /// Classification accuracy on the held-out set (logistic tasks only).
    pub fn accuracy(&self, w: &[f64]) -> Option<f64> {
        let h = self.holdout.as_ref()?;
        if h.labels.is_empty() {
            return None;
        }
        let hits = h
            .features
            .chunks_exact(self.dim)
            .zip(&h.labels)
            .filter(|(x, &y)| (dot(x, w) > 0.0) == (y > 0.5))
            .count();
        Some(hits as f64 / h.labels.len() as f64)
    }

    /// Checks every device gradient against the assumed norm bound γ.
    pub fn check_gradient_bound(&self, gradients: &[Vec<f64>]) -> Result<()> {
        let gamma = self.constants.gamma;
        for (device, g) in gradients.iter().enumerate() {
            let n = norm(g);
            if n > gamma * (1.0 + 1e-12) {
                return Err(Error::GradientBound {
                    device,
                    norm: n,
                    gamma,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn zero_heterogeneity_collapses_local_optima() {
        let spec = QuadraticSpec {
            dim: 5,
            devices: 4,
            heterogeneity: 0.0,
            ..QuadraticSpec::default()
        };
        let task = make_quadratic_task(&spec, &mut rng()).unwrap();
        assert_eq!(task.constants().delta, 0.0);
        for dev in task.devices() {
            assert_eq!(dev.local_optimum, task.optimum());
        }
    }

    #[test]
    fn single_device_task_is_its_own_optimum() {
        let spec = QuadraticSpec {
            dim: 3,
            devices: 1,
            heterogeneity: 0.7,
            ..QuadraticSpec::default()
        };
        let task = make_quadratic_task(&spec, &mut rng()).unwrap();
        assert_eq!(task.devices()[0].alpha, 1.0);
        assert_eq!(task.devices()[0].local_optimum, task.optimum());
        let w = [0.3, -0.2, 0.9];
        let g = task.gradient(&w).unwrap();
        assert_eq!(g, task.local_gradient(0, &w).unwrap());
    }

    #[test]
    fn heterogeneity_is_reported_exactly() {
        let spec = QuadraticSpec {
            dim: 6,
            devices: 7,
            heterogeneity: 0.4,
            ..QuadraticSpec::default()
        };
        let task = make_quadratic_task(&spec, &mut rng()).unwrap();
        assert!((task.constants().delta - 0.4).abs() < 1e-12);
        let g = task.gradient(task.optimum()).unwrap();
        assert!(norm(&g) < 1e-9);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut spec = QuadraticSpec {
            conditioning: 0.5,
            ..QuadraticSpec::default()
        };
        assert!(make_quadratic_task(&spec, &mut rng()).is_err());
        spec.conditioning = f64::NAN;
        assert!(make_quadratic_task(&spec, &mut rng()).is_err());
        spec.conditioning = 2.0;
        spec.heterogeneity = f64::INFINITY;
        assert!(make_quadratic_task(&spec, &mut rng()).is_err());
        spec.heterogeneity = 1.0;
        spec.alphas = Some(vec![0.5; 3]);
        assert!(make_quadratic_task(&spec, &mut rng()).is_err());
    }

    #[test]
    fn gradient_at_local_optimum_vanishes() {
        let task = make_quadratic_task(&QuadraticSpec::default(), &mut rng()).unwrap();
        for k in 0..task.num_devices() {
            let wk = task.devices()[k].local_optimum.clone();
            assert!(task.local_gradient(k, &wk).unwrap().iter().all(|&x| x == 0.0));
        }
        assert!(matches!(
            task.local_gradient(99, task.optimum()),
            Err(Error::DeviceIndex { .. })
        ));
    }

    #[test]
    fn hard_case_ball_maximum() {
        // A = diag(1, 2), offset orthogonal to the top eigenvector.
        let loss = QuadraticLoss {
            matrix: vec![1.0, 0.0, 0.0, 2.0],
            eigenvalues: vec![1.0, 2.0],
            eigenvectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let got = max_gradient_norm_in_ball(&loss, &[0.1, 0.0], 1.0);
        // x_1 = 1*0.1/(4-1) = 1/30, x_2 = sqrt(1 - 1/900)
        let x1 = 0.1 / 3.0;
        let x2 = libm::sqrt(1.0 - x1 * x1);
        let want = libm::sqrt((x1 + 0.1) * (x1 + 0.1) + 4.0 * x2 * x2);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert_eq!(max_gradient_norm_in_ball(&loss, &[0.0, 0.0], 1.5), 3.0);
    }

    #[test]
    fn logistic_optima_are_stationary() {
        let spec = LogisticSpec {
            dim: 4,
            devices: 3,
            samples_per_device: 40,
            holdout_samples: 200,
            ..LogisticSpec::default()
        };
        let task = make_logistic_task(&spec, &mut rng()).unwrap();
        assert!(norm(&task.gradient(task.optimum()).unwrap()) < 1e-10);
        for (k, dev) in task.devices().iter().enumerate() {
            assert!(norm(&task.local_gradient(k, &dev.local_optimum).unwrap()) < 1e-10);
        }
        let acc = task.accuracy(task.optimum()).unwrap();
        assert!(acc > 0.6, "accuracy {acc}");
        assert_eq!(task.optimality_gap(task.optimum()).unwrap(), 0.0);
    }
}
