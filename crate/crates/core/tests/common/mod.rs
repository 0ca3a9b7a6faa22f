//! Independent oracles shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use noise_adapt::adaptive::{isserlis_variances, DesignMatrix};
use noise_adapt::linalg::vech;
use noise_adapt::models::{DoubleIntegrator, GaussMarkovIntegrator};
use noise_adapt::process_noise::{dmc_q_analytic, q_numeric, snc_q_analytic};
use noise_adapt::scenarios::{Scenario, ScenarioConfig};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

pub fn load(name: &str) -> (ScenarioConfig, Scenario) {
    let cfg = ScenarioConfig::load(&scenario_path(name)).unwrap();
    let sc = Scenario::from_config(&cfg).unwrap();
    (cfg, sc)
}

/// Largest entrywise relative difference, with entries below `floor · max|b|` compared absolutely.
pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    let scale = b.amax().max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor * scale))
        .fold(0.0, f64::max)
}

pub const DMC_BETAS: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DMC_DTS: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 300.0];

/// Worst relative mismatch between the analytic DMC `Q` and quadrature over the β × Δt grid.
pub fn dmc_quadrature_worst() -> f64 {
    let mut worst: f64 = 0.0;
    for &beta in &DMC_BETAS {
        for &dt in &DMC_DTS {
            let model = GaussMarkovIntegrator::new(vec![beta]);
            let x0 = DVector::zeros(3);
            let num = q_numeric(&model, &x0, &[1.0], 0.0, dt).unwrap();
            let ana = dmc_q_analytic(&[1.0], &[beta], dt).unwrap();
            worst = worst.max(max_rel(&ana, &num, 1e-14));
        }
    }
    worst
}

/// Worst relative mismatch between the analytic SNC `Q` and quadrature at random Δt ∈ (0, 10].
pub fn snc_quadrature_worst(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let model = DoubleIntegrator::new(3);
    let x0 = DVector::zeros(6);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let dt = 10.0 * (1.0 - rng.random::<f64>());
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..5.0)).collect();
        let num = q_numeric(&model, &x0, &q, 0.0, dt).unwrap();
        let ana = snc_q_analytic(&q, dt).unwrap();
        worst = worst.max(max_rel(&ana, &num, 1e-14));
    }
    worst
}

/// A random separable WLS instance: each row of `X` touches one column.
pub struct WlsInstance {
    pub x: DesignMatrix,
    pub b: DVector<f64>,
    pub w: DVector<f64>,
    pub lb: Vec<f64>,
    pub ub: Option<Vec<f64>>,
}

pub fn random_separable_instance(rng: &mut ChaCha20Rng) -> WlsInstance {
    let cols = rng.random_range(1..=6);
    let per_col = rng.random_range(1..=3);
    let rows = cols * per_col;
    let scale = 10f64.powf(rng.random_range(-6.0..3.0));
    let mut x = DMatrix::zeros(rows, cols);
    let mut order: Vec<usize> = (0..rows).collect();
    for i in (1..rows).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for (k, &r) in order.iter().enumerate() {
        x[(r, k % cols)] = scale * rng.random_range(0.1..10.0);
    }
    let truth: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..2.0)).collect();
    let b = DVector::from_fn(rows, |r, _| {
        let c = (0..cols).find(|&c| x[(r, c)] != 0.0).unwrap();
        x[(r, c)] * truth[c] + scale * rng.random_range(-0.5..0.5)
    });
    let w = DVector::from_fn(rows, |_, _| 10f64.powf(rng.random_range(-3.0..3.0)));
    let lb: Vec<f64> = (0..cols).map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) }).collect();
    let ub = rng
        .random_bool(0.5)
        .then(|| lb.iter().map(|l| l + rng.random_range(0.0..1.5)).collect());
    WlsInstance {
        x: DesignMatrix::new(x),
        b,
        w,
        lb,
        ub,
    }
}

/// Brute-force minimizer of the separable problem. Per column, a 41-point grid over the
/// feasible interval is refined around the sign change of the objective's slope until the
/// bracket is below `resolution` relative to its endpoint magnitude. The slope is used
/// instead of objective values because the objective is flat at the minimum.
pub fn wls_grid_oracle(inst: &WlsInstance, resolution: f64) -> Vec<f64> {
    let x = &inst.x.x;
    (0..x.ncols())
        .map(|c| {
            let rows: Vec<usize> = (0..x.nrows()).filter(|&r| x[(r, c)] != 0.0).collect();
            let slope = |q: f64| -> f64 { rows.iter().map(|&r| x[(r, c)] * (x[(r, c)] * q - inst.b[r]) / inst.w[r]).sum() };
            // beyond max |b/x| every residual grows
            let reach = rows.iter().map(|&r| (inst.b[r] / x[(r, c)]).abs()).fold(0.0, f64::max);
            let mut lo = inst.lb[c];
            let mut hi = lo.max(reach) + 1.0;
            if let Some(ub) = &inst.ub {
                hi = hi.min(ub[c]);
            }
            if slope(lo) >= 0.0 {
                return lo;
            }
            if slope(hi) <= 0.0 {
                return hi;
            }
            while hi - lo > resolution * hi.abs().max(lo.abs()) {
                let n = 40;
                let pts: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
                let k = (1..=n).find(|&k| slope(pts[k]) > 0.0).unwrap_or(n);
                (lo, hi) = (pts[k - 1], pts[k]);
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Random symmetric positive-definite matrix with entries of order one.
pub fn random_spd(n: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Largest relative gap between the Isserlis variances of `vech(Δx Δxᵀ)` and their
/// sample variances over `draws` Gaussian samples `Δx ~ N(0, Σ)`.
pub fn isserlis_mc_worst(sigma: &DMatrix<f64>, draws: usize, rng: &mut ChaCha20Rng) -> f64 {
    let n = sigma.nrows();
    let l = sigma.clone().cholesky().unwrap().l();
    let m = n * (n + 1) / 2;
    let mut sum = DVector::zeros(m);
    let mut sum2 = DVector::zeros(m);
    for _ in 0..draws {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        let v = vech(&(&x * x.transpose()));
        sum += &v;
        sum2 += v.component_mul(&v);
    }
    let d = draws as f64;
    let mean = sum / d;
    let var = (sum2 / d - mean.component_mul(&mean)) * (d / (d - 1.0));
    let theory = isserlis_variances(sigma);
    var.iter().zip(theory.iter()).map(|(e, t)| (e - t).abs() / t).fold(0.0, f64::max)
}
