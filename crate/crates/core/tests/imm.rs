use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use noise_adapt::adaptive::NoiseLayout;
use noise_adapt::baselines::{imm_step, ImmBank, DEFAULT_TRANSITION};
use noise_adapt::filter::{FilterKind, LinearMeasurement, StateEstimate};
use noise_adapt::linalg::check_psd;
use noise_adapt::models::DoubleIntegrator;
use noise_adapt::process_noise::snc_q_analytic;

/// Mean probability of the low-noise mode over the second half of a run whose truth uses `q_true`.
fn low_mode_share(q_true: f64, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let model = DoubleIntegrator::new(1);
    let dt = 0.1;
    let lq = snc_q_analytic(&[q_true], dt).unwrap().cholesky().unwrap().l();
    let meas = LinearMeasurement {
        h: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        r: DMatrix::from_element(1, 1, 0.01),
    };
    let start = StateEstimate::new(DVector::zeros(2), DMatrix::identity(2, 2), 0.0).unwrap();
    let mut bank = ImmBank::new(start, [0.01, 10.0], [0.5, 0.5], DEFAULT_TRANSITION, NoiseLayout::snc(1, 1)).unwrap();
    let mut truth = DVector::zeros(2);
    let steps = 2000;
    let mut share = 0.0;
    for k in 1..=steps {
        truth = model.transition(dt) * truth + &lq * DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &meas.h * &truth + DVector::from_element(1, 0.1 * rng.sample::<f64, _>(StandardNormal));
        let out = imm_step(&mut bank, FilterKind::Kalman, &model, &meas, &z, k as f64 * dt).unwrap();
        assert!(check_psd(&out.q).is_ok());
        assert!(bank.mu.iter().all(|m| (0.0..=1.0).contains(m)));
        assert!((bank.mu[0] + bank.mu[1] - 1.0).abs() < 1e-12);
        if k > steps / 2 {
            share += bank.mu[0];
        }
    }
    share / (steps / 2) as f64
}

#[test]
fn mode_probabilities_follow_the_true_noise_level() {
    let low = low_mode_share(0.01, 1);
    let high = low_mode_share(10.0, 2);
    assert!(low > 0.5, "low-noise truth: {low}");
    assert!(high < 0.5, "high-noise truth: {high}");
}
