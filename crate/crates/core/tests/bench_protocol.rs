mod common;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use pu_jerm::bench::{
    compare, run_experiment, run_repeat, sample_sd, ExperimentOptions, Method, ReportSummary,
    Verdict,
};
use pu_jerm::bench::{excess_risk_sweep_with, ExcessRiskOptions};
use pu_jerm::scenarios::Strategy;
use pu_jerm::synthetic::{DoubleLogistic, PuSampler};
use pu_jerm::PUDataset;

fn toy(n: usize, seed: u64) -> PUDataset {
    let d = DoubleLogistic::reference(3).sample(n, seed).unwrap();
    let x = d.features().columns(0, 3).into_owned();
    PUDataset::new(x, vec![0; n], d.y_hidden().map(<[u8]>::to_vec)).unwrap()
}

fn quick() -> ExperimentOptions {
    ExperimentOptions { repeats: 3, base_seed: 5, ..ExperimentOptions::default() }
}

#[test]
fn test_rows_never_used_for_training() {
    let data = toy(200, 1);
    for r in 0..5 {
        let out = run_repeat(&data, Strategy::S2, 0.5, &Method::ALL, r, &quick()).unwrap();
        let train: BTreeSet<_> = out.train_rows.iter().collect();
        assert!(out.test_rows.iter().all(|i| !train.contains(i)));
        assert_eq!(out.train_rows.len() + out.test_rows.len(), 200);
        assert_eq!(out.train_rows.len(), 150);
        assert!(out.labeled > 0);
    }
}

#[test]
fn reports_are_consistent_and_deterministic() {
    let data = toy(300, 2);
    let a = run_experiment("toy", &data, Strategy::S3, 0.5, &Method::ALL, &quick()).unwrap();
    let b = run_experiment("toy", &data, Strategy::S3, 0.5, &Method::ALL, &quick()).unwrap();
    assert_eq!(a, b);
    for r in &a {
        assert_eq!(r.accuracies.len() + r.failed.len(), 3);
        assert!(r.accuracies.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = r.accuracies.iter().sum::<f64>() / r.accuracies.len() as f64;
        assert!((r.mean - mean).abs() < 1e-15);
        assert!((r.sd - sample_sd(&r.accuracies)).abs() < 1e-15);
    }
    let oracle = a.iter().find(|r| r.method == Method::Oracle).unwrap();
    assert!(oracle.mean > 0.65);
}

#[test]
fn experiment_requires_hidden_class() {
    let data = PUDataset::new(DMatrix::from_element(10, 1, 1.0), vec![0; 10], None).unwrap();
    assert!(run_experiment("x", &data, Strategy::S1, 0.5, &Method::ALL, &quick()).is_err());
    let none = ExperimentOptions { repeats: 0, ..quick() };
    assert!(run_experiment("x", &toy(50, 3), Strategy::S1, 0.5, &Method::ALL, &none).is_err());
}

#[test]
fn sweep_of_the_truth_is_zero() {
    let opts = ExcessRiskOptions { mc_size: 10_000, ..ExcessRiskOptions::default() };
    let rows = excess_risk_sweep_with(3, &[100, 200], 3, 1, &opts, |_, _, _| {
        Ok(DoubleLogistic::reference(3).theta)
    })
    .unwrap();
    assert!(rows.iter().all(|r| r.median == 0.0));
    assert!(rows[0].radius < rows[1].radius);
    assert!(excess_risk_sweep_with(3, &[200, 100], 3, 1, &opts, |_, _, _| unreachable!()).is_err());
}

fn summary(mean: f64, sd: f64, method: &str) -> ReportSummary {
    ReportSummary {
        dataset: "d".into(),
        strategy: Strategy::S1,
        c: 0.5,
        method: method.into(),
        mean,
        sd,
        repeats: 10,
    }
}

proptest! {
    #[test]
    fn comparison_is_antisymmetric(m1 in 0.0f64..1.0, s1 in 0.0f64..0.2, m2 in 0.0f64..1.0, s2 in 0.0f64..0.2) {
        let a = summary(m1, s1, "a");
        let b = summary(m2, s2, "b");
        let ab = compare(&a, &b).verdict;
        let ba = compare(&b, &a).verdict;
        let expected = match ab {
            Verdict::Win => Verdict::Loss,
            Verdict::Loss => Verdict::Win,
            Verdict::Draw => Verdict::Draw,
        };
        prop_assert_eq!(ba, expected);
        let overlap = (m1 - s1).max(m2 - s2) <= (m1 + s1).min(m2 + s2);
        prop_assert_eq!(ab == Verdict::Draw, overlap);
    }
}
