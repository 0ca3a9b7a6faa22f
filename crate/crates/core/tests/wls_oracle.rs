mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use noise_adapt::adaptive::{solve_wls_boxed, solve_wls_qp, wls_objective, DesignMatrix};

#[test]
fn fast_path_matches_grid_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    for case in 0..200 {
        let inst = common::random_separable_instance(&mut rng);
        let fast = solve_wls_boxed(&inst.x, &inst.b, &inst.w, &inst.lb, inst.ub.as_deref()).unwrap();
        assert!(fast.fast_path);
        let oracle = common::wls_grid_oracle(&inst, 1e-10);
        for (c, (a, o)) in fast.q.iter().zip(&oracle).enumerate() {
            assert!(common::rel_close(*a, *o, 1e-8, 1e-12), "case {case} column {c}: {a} vs {o}");
        }
    }
}

#[test]
fn active_set_agrees_with_fast_path_on_separable_problems() {
    let mut rng = ChaCha20Rng::seed_from_u64(405);
    for _ in 0..100 {
        let inst = common::random_separable_instance(&mut rng);
        let fast = solve_wls_boxed(&inst.x, &inst.b, &inst.w, &inst.lb, inst.ub.as_deref()).unwrap();
        let qp = solve_wls_qp(&inst.x, &inst.b, &inst.w, &inst.lb, inst.ub.as_deref()).unwrap();
        for (a, b) in fast.q.iter().zip(&qp.q) {
            assert!(common::rel_close(*a, *b, 1e-9, 1e-12), "{a} vs {b}");
        }
    }
}

/// Exact cyclic coordinate descent; converges to the unique minimizer of a strictly convex box QP.
fn coordinate_descent(x: &DMatrix<f64>, b: &DVector<f64>, w: &DVector<f64>, lb: &[f64], ub: Option<&[f64]>) -> Vec<f64> {
    let n = x.ncols();
    let xw = DMatrix::from_fn(x.nrows(), n, |r, c| x[(r, c)] / w[r]);
    let h = xw.transpose() * x;
    let g = xw.transpose() * b;
    let mut q = lb.to_vec();
    for _ in 0..200_000 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let rest: f64 = (0..n).filter(|&j| j != i).map(|j| h[(i, j)] * q[j]).sum();
            let mut v = ((g[i] - rest) / h[(i, i)]).max(lb[i]);
            if let Some(u) = ub {
                v = v.min(u[i]);
            }
            moved = moved.max((v - q[i]).abs());
            q[i] = v;
        }
        if moved < 1e-16 {
            break;
        }
    }
    q
}

#[test]
fn active_set_matches_coordinate_descent_on_coupled_problems() {
    let mut rng = ChaCha20Rng::seed_from_u64(406);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let rows = n + rng.random_range(1..=6);
        let x = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(rows, |_, _| rng.random_range(-2.0..2.0));
        let w = DVector::from_fn(rows, |_, _| rng.random_range(0.1..3.0));
        let lb: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
        let ub: Option<Vec<f64>> = rng.random_bool(0.5).then(|| lb.iter().map(|l| l + rng.random_range(0.1..1.0)).collect());
        let design = DesignMatrix::new(x.clone());
        let qp = solve_wls_qp(&design, &b, &w, &lb, ub.as_deref()).unwrap();
        let cd = coordinate_descent(&x, &b, &w, &lb, ub.as_deref());
        let f_qp = wls_objective(&design, &b, &w, &qp.q);
        let f_cd = wls_objective(&design, &b, &w, &cd);
        assert!(f_qp <= f_cd * (1.0 + 1e-10) + 1e-14, "{f_qp} vs {f_cd}");
        for (a, c) in qp.q.iter().zip(&cd) {
            assert!((a - c).abs() < 1e-6, "{:?} vs {cd:?}", qp.q);
        }
    }
}

proptest! {
    #[test]
    fn solution_respects_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inst = common::random_separable_instance(&mut rng);
        let sol = solve_wls_boxed(&inst.x, &inst.b, &inst.w, &inst.lb, inst.ub.as_deref()).unwrap();
        for (i, q) in sol.q.iter().enumerate() {
            prop_assert!(*q >= inst.lb[i]);
            if let Some(ub) = &inst.ub {
                prop_assert!(*q <= ub[i]);
            }
        }
    }
}
