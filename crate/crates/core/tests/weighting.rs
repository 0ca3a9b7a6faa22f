mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use noise_adapt::adaptive::{isserlis_variances, weighting_matrix, SlidingWindow, WindowEntry};
use noise_adapt::filter::InnovationRecord;

#[test]
fn isserlis_variances_match_monte_carlo() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    for _ in 0..3 {
        let sigma = common::random_spd(3, &mut rng);
        let worst = common::isserlis_mc_worst(&sigma, 1_000_000, &mut rng);
        assert!(worst < 0.05, "worst relative gap {worst}");
    }
}

fn entry(sigma: &DMatrix<f64>) -> WindowEntry {
    let n = sigma.nrows();
    WindowEntry {
        record: InnovationRecord {
            innovation: DVector::zeros(1),
            innovation_cov: DMatrix::identity(1, 1),
            gain: DMatrix::zeros(n, 1),
            correction: DVector::zeros(n),
            correction_cov: sigma.clone(),
            dt: 1.0,
            outage: false,
        },
        posterior: DMatrix::identity(n, n),
        transported: DMatrix::identity(n, n),
    }
}

#[test]
fn scaled_weighting_equals_isserlis_variances() {
    let mut rng = ChaCha20Rng::seed_from_u64(78);
    let sigma = common::random_spd(4, &mut rng);
    let mut window = SlidingWindow::new(6);
    for _ in 0..6 {
        window.push(entry(&sigma));
    }
    let ss = [0, 1, 2, 3];
    let theory = isserlis_variances(&sigma);
    for steady in [true, false] {
        let w = weighting_matrix(&window, &ss, steady).unwrap();
        let scaled = w.diag * 6.0;
        assert!((scaled - &theory).amax() < 1e-12 * theory.amax());
    }
}

#[test]
fn weighting_uses_only_state_rows() {
    let mut rng = ChaCha20Rng::seed_from_u64(79);
    let sigma = common::random_spd(3, &mut rng);
    let mut window = SlidingWindow::new(1);
    window.push(entry(&sigma));
    let w = weighting_matrix(&window, &[0, 2], true).unwrap();
    let sub = DMatrix::from_fn(2, 2, |i, j| sigma[(2 * i, 2 * j)]);
    assert_eq!(w.diag, isserlis_variances(&sub));
}
