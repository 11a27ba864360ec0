//! Samplers for PU data with known ground truth.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::glm::{sigmoid, Theta};

/// Anything that can draw a fresh PU sample of a given size.
pub trait PuSampler: Sync {
    fn sample(&self, n: usize, seed: u64) -> Result<PUDataset>;
}

/// Both the posterior and the propensity are logistic in the features:
/// `y(x) = sigma(beta^T x)`, `e(x) = sigma(gamma^T x)`.
///
/// Features are i.i.d. standard normal with a trailing constant-1 column,
/// so `theta` has one entry per raw feature plus an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleLogistic {
    pub theta: Theta,
}

impl DoubleLogistic {
    pub fn new(theta: Theta) -> Result<Self> {
        if theta.dim() == 0 {
            return Err(Error::InvalidArgument("empty parameter vector".into()));
        }
        Ok(Self { theta })
    }

    /// A fixed, well-separated parameter pair with `|beta|_1 > |gamma|_1`
    /// for `raw_features` standard-normal features.
    pub fn reference(raw_features: usize) -> Self {
        let beta_pattern = [1.5, -1.0, 0.5, 0.0, 0.25];
        let gamma_pattern = [0.5, 0.0, 0.0, 0.5, -0.5];
        let d = raw_features + 1;
        let beta = DVector::from_fn(d, |k, _| {
            if k == raw_features {
                0.25
            } else {
                beta_pattern[k % beta_pattern.len()]
            }
        });
        let gamma = DVector::from_fn(d, |k, _| {
            if k == raw_features {
                0.5
            } else {
                gamma_pattern[k % gamma_pattern.len()]
            }
        });
        Self { theta: Theta { beta, gamma } }
    }

    /// [`Self::reference`] with the posterior coefficients scaled by 8, so
    /// the classes are nearly linearly separable.
    pub fn well_separated(raw_features: usize) -> Self {
        let mut gen = Self::reference(raw_features);
        gen.theta.beta *= 8.0;
        gen
    }

    pub fn raw_features(&self) -> usize {
        self.theta.dim() - 1
    }
}

impl PuSampler for DoubleLogistic {
    fn sample(&self, n: usize, seed: u64) -> Result<PUDataset> {
        let p = self.raw_features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, p + 1);
        let mut y = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
            x[(i, p)] = 1.0;
            let row = x.row(i);
            let yi = u8::from(rng.random::<f64>() < sigmoid(row.dot(&self.theta.beta.transpose())));
            let ei = sigmoid(row.dot(&self.theta.gamma.transpose()));
            let si = yi * u8::from(rng.random::<f64>() < ei);
            y.push(yi);
            s.push(si);
        }
        let data = PUDataset::new(x, s, Some(y))?;
        crate::data::mark_intercept(data)
    }
}
