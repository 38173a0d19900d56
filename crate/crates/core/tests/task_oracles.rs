use fedwire_core::fl::{global_gradient, sgd_step, ModelState};
use fedwire_core::linalg::{dist_sq, norm, norm_sq};
use fedwire_core::task::{
    make_logistic_task, make_quadratic_task, LocalLoss, LogisticSpec, QuadraticSpec,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym_eigen(m: &[f64], d: usize) -> Vec<f64> {
    let mat = DMatrix::from_row_slice(d, d, m);
    let mut e: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn conditioning_matches_eigen_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = QuadraticSpec {
        dim: 2,
        devices: 3,
        conditioning: 10.0,
        ..QuadraticSpec::default()
    };
    let task = make_quadratic_task(&spec, &mut rng).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for dev in task.devices() {
        let LocalLoss::Quadratic(q) = &dev.loss else {
            panic!("quadratic task with a non-quadratic device")
        };
        let e = sym_eigen(&q.matrix, 2);
        lo = lo.min(e[0]);
        hi = hi.max(e[1]);
    }
    let c = task.constants();
    assert!((hi / lo - 10.0).abs() < 1e-9);
    assert!((c.smoothness / c.mu - 10.0).abs() < 1e-9);
    assert!((c.mu - lo).abs() < 1e-12 && (c.smoothness - hi).abs() < 1e-12);
}

#[test]
fn every_device_meets_the_reported_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let task = make_quadratic_task(&QuadraticSpec::default(), &mut rng).unwrap();
    let c = *task.constants();
    for dev in task.devices() {
        let LocalLoss::Quadratic(q) = &dev.loss else { unreachable!() };
        let e = sym_eigen(&q.matrix, task.dim());
        assert!(e[0] >= c.mu * (1.0 - 1e-10));
        assert!(e[e.len() - 1] <= c.smoothness * (1.0 + 1e-10));
    }
}

#[test]
fn heterogeneity_is_exact_and_optimum_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = QuadraticSpec {
        heterogeneity: 0.7,
        ..QuadraticSpec::default()
    };
    let task = make_quadratic_task(&spec, &mut rng).unwrap();
    let dmax = task
        .devices()
        .iter()
        .map(|d| dist_sq(&d.local_optimum, task.optimum()).sqrt())
        .fold(0.0, f64::max);
    assert!((dmax - 0.7).abs() < 1e-12);
    assert!((task.constants().delta - 0.7).abs() < 1e-12);
    assert!(norm(&task.gradient(task.optimum()).unwrap()) < 1e-12);

    let flat = QuadraticSpec {
        heterogeneity: 0.0,
        ..QuadraticSpec::default()
    };
    let task = make_quadratic_task(&flat, &mut rng).unwrap();
    assert_eq!(task.constants().delta, 0.0);
    for d in task.devices() {
        assert!(dist_sq(&d.local_optimum, task.optimum()) < 1e-24);
    }
}

#[test]
fn gamma_dominates_gradients_in_the_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let task = make_quadratic_task(&QuadraticSpec::default(), &mut rng).unwrap();
    let radius = 2.0 * task.init_dist_sq().sqrt();
    let gamma = task.constants().gamma;
    let mut largest = 0.0f64;
    for _ in 0..2000 {
        let dir: Vec<f64> = (0..task.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let n = norm(&dir);
        let t = radius * rng.random::<f64>().powf(0.1);
        let w: Vec<f64> = task
            .optimum()
            .iter()
            .zip(&dir)
            .map(|(o, x)| o + t * x / n)
            .collect();
        for g in task.local_gradients(&w).unwrap() {
            largest = largest.max(norm(&g));
        }
    }
    assert!(largest <= gamma * (1.0 + 1e-12));
    // sampled maximum should not be wildly below the exact one
    assert!(largest > 0.5 * gamma, "{largest} vs {gamma}");
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let spec = LogisticSpec {
        dim: 5,
        devices: 4,
        ..LogisticSpec::default()
    };
    let task = make_logistic_task(&spec, &mut rng).unwrap();
    let h = 1e-5;
    for _ in 0..5 {
        let w: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for k in 0..task.num_devices() {
            let g = task.local_gradient(k, &w).unwrap();
            for i in 0..5 {
                let mut up = w.clone();
                let mut dn = w.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (task.local_loss(k, &up).unwrap() - task.local_loss(k, &dn).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{fd} vs {}", g[i]);
            }
        }
    }
    assert!(norm(&task.gradient(task.optimum()).unwrap()) < 1e-10);
}

#[test]
fn local_gradients_aggregate_to_the_global_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let task = make_quadratic_task(&QuadraticSpec::default(), &mut rng).unwrap();
    let w: Vec<f64> = (0..task.dim()).map(|_| rng.random::<f64>()).collect();
    let locals = task.local_gradients(&w).unwrap();
    let agg = global_gradient(&locals, &task.alphas()).unwrap();
    assert!(dist_sq(&agg, &task.gradient(&w).unwrap()).sqrt() < 1e-9);
}

#[test]
fn gap_dominates_strong_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let task = make_quadratic_task(&QuadraticSpec::default(), &mut rng).unwrap();
    let mu = task.constants().mu;
    for _ in 0..200 {
        let w: Vec<f64> = (0..task.dim()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let gap = task.optimality_gap(&w).unwrap();
        assert!(gap >= 0.5 * mu * dist_sq(&w, task.optimum()) * (1.0 - 1e-12));
        let direct = task.loss(&w).unwrap() - task.optimum_value();
        assert!((gap - direct).abs() < 1e-10 * (1.0 + gap));
    }
}

#[test]
fn exact_gradient_descent_converges() {
    for (seed, cond) in [(17u64, 4.0), (18, 10.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = QuadraticSpec {
            conditioning: cond,
            ..QuadraticSpec::default()
        };
        let task = make_quadratic_task(&spec, &mut rng).unwrap();
        let c = *task.constants();
        let eta = 1.0 / c.smoothness;
        let mut state = ModelState::initial(&task);
        let mut prev = dist_sq(&state.weights, task.optimum());
        let budget = (200.0 * c.smoothness / c.mu) as usize;
        let mut reached = None;
        for m in 0..budget {
            let g = task.gradient(&state.weights).unwrap();
            state = sgd_step(&state, &g, eta).unwrap();
            let dist = dist_sq(&state.weights, task.optimum());
            assert!(dist <= prev * (1.0 + 1e-12) + 1e-24);
            prev = dist;
            if reached.is_none() && task.optimality_gap(&state.weights).unwrap() <= 1e-8 {
                reached = Some(m);
            }
        }
        assert!(reached.is_some());
        assert_eq!(state.round, budget as u64);
        assert!(norm_sq(&task.gradient(&state.weights).unwrap()) < 1e-16);
    }
}

mod soundness {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn smoothness_and_strong_convexity_hold(
            seed in any::<u64>(),
            dim in 1usize..12,
            devices in 1usize..8,
            cond in 1.0f64..50.0,
            hetero in 0.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = QuadraticSpec {
                dim,
                devices,
                conditioning: cond,
                heterogeneity: hetero,
                ..QuadraticSpec::default()
            };
            let task = make_quadratic_task(&spec, &mut rng).unwrap();
            let c = *task.constants();
            for _ in 0..10 {
                let w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let diff = dist_sq(&w, &v);
                for k in 0..devices {
                    let gw = task.local_gradient(k, &w).unwrap();
                    let gv = task.local_gradient(k, &v).unwrap();
                    let lip = dist_sq(&gw, &gv).sqrt();
                    prop_assert!(lip <= c.smoothness * diff.sqrt() * (1.0 + 1e-10) + 1e-12);
                    let lin: f64 = gv.iter().zip(w.iter().zip(&v)).map(|(g, (a, b))| g * (a - b)).sum();
                    let lower = task.local_loss(k, &v).unwrap() + lin + 0.5 * c.mu * diff;
                    prop_assert!(task.local_loss(k, &w).unwrap() >= lower - 1e-10 * (1.0 + lower.abs()));
                }
            }
        }
    }
}
