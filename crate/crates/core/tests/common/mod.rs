#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pu_jerm::data::add_intercept;
use pu_jerm::PUDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Standard-normal features plus intercept, labels `s` drawn with
/// probability `label_rate` (at least one of each value).
pub fn random_pu(rng: &mut ChaCha8Rng, n: usize, p: usize, label_rate: f64) -> PUDataset {
    assert!(n >= 2);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut s: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < label_rate)).collect();
    s[0] = 1;
    s[1] = 0;
    let raw = PUDataset::new(x, s, None).unwrap();
    add_intercept(&raw).unwrap()
}

/// Repository-level data directory.
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}
