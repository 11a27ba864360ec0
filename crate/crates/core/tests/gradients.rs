mod common;

use common::{normal_vector, random_pu, rng};
use nalgebra::DVector;
use proptest::prelude::*;
use pu_jerm::glm::{
    empirical_risk, empirical_risk_grad, joint_loss, joint_loss_partials, risk_grad_with_offsets,
    risk_with_offsets, Theta,
};

fn central_difference(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(at.len(), |k, _| {
        let mut hi = at.clone();
        let mut lo = at.clone();
        hi[k] += h;
        lo[k] -= h;
        (f(&hi) - f(&lo)) / (2.0 * h)
    })
}

#[test]
fn joint_gradient_matches_finite_differences() {
    let mut r = rng(11);
    for _ in 0..50 {
        let data = random_pu(&mut r, 20, 4, 0.4);
        let theta = Theta::from_vector(&normal_vector(&mut r, 10, 1.0));
        let g = empirical_risk_grad(&theta, &data).unwrap();
        let fd = central_difference(
            |v| empirical_risk(&Theta::from_vector(v), &data).unwrap(),
            &theta.to_vector(),
            1e-6,
        );
        let rel = (&g - &fd).norm() / g.norm().max(1e-12);
        assert!(rel <= 1e-5, "relative error {rel}");
    }
}

#[test]
fn offset_gradient_matches_finite_differences() {
    let mut r = rng(12);
    for _ in 0..20 {
        let data = random_pu(&mut r, 30, 3, 0.3);
        let offsets: Vec<f64> = normal_vector(&mut r, 30, 2.0).iter().copied().collect();
        let beta = normal_vector(&mut r, 4, 1.0);
        let g = risk_grad_with_offsets(&data, &beta, &offsets).unwrap();
        let fd = central_difference(|b| risk_with_offsets(&data, b, &offsets).unwrap(), &beta, 1e-6);
        assert!((&g - &fd).norm() / g.norm().max(1e-12) <= 1e-5);
    }
}

#[test]
fn extreme_scores_stay_finite() {
    for &(a, b) in &[(500.0, 500.0), (-500.0, -500.0), (500.0, -500.0), (-500.0, 500.0)] {
        for s in [0, 1] {
            let v = joint_loss(a, b, s);
            let (da, db) = joint_loss_partials(a, b, s);
            assert!(v.is_finite() && v >= 0.0);
            assert!(da.is_finite() && db.is_finite());
        }
    }
    // -log(1 - sigma(-500) sigma(-500)) underflows only in the last bits
    assert!(joint_loss(-500.0, -500.0, 0) < 1e-300);
    assert!((joint_loss(-500.0, 500.0, 1) - 500.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn partials_match_scalar_differences(a in -30.0f64..30.0, b in -30.0f64..30.0, s in 0u8..2) {
        let h = 1e-6;
        let (da, db) = joint_loss_partials(a, b, s);
        let fa = (joint_loss(a + h, b, s) - joint_loss(a - h, b, s)) / (2.0 * h);
        let fb = (joint_loss(a, b + h, s) - joint_loss(a, b - h, s)) / (2.0 * h);
        prop_assert!((da - fa).abs() <= 1e-6 * (1.0 + da.abs()));
        prop_assert!((db - fb).abs() <= 1e-6 * (1.0 + db.abs()));
    }

    #[test]
    fn loss_curvature_is_bounded_by_a_quarter(a in -20.0f64..20.0, b in -20.0f64..20.0, s in 0u8..2) {
        // largest eigenvalue of the 2x2 Hessian from second differences
        let h = 1e-4;
        let f = |x: f64, y: f64| joint_loss(x, y, s);
        let faa = (f(a + h, b) - 2.0 * f(a, b) + f(a - h, b)) / (h * h);
        let fbb = (f(a, b + h) - 2.0 * f(a, b) + f(a, b - h)) / (h * h);
        let fab = (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4.0 * h * h);
        let mean = 0.5 * (faa + fbb);
        let lam = mean + (0.25 * (faa - fbb).powi(2) + fab * fab).sqrt();
        prop_assert!(lam <= 0.25 + 1e-5, "lambda_max {lam}");
    }
}
