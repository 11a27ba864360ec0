//! Turning fully labeled binary data into PU data.
//!
//! Negatives always stay unlabeled. Each positive is labeled independently
//! with probability `e(x)`, which depends on the strategy:
//!
//! | strategy | `e(x)`                                 |
//! |----------|----------------------------------------|
//! | S1       | `c`                                    |
//! | S2       | `sigma(x^T beta* + a)`                 |
//! | S3       | `1/2 + atan(x^T beta* + a) / pi`       |
//! | S4       | `sigma(x^T beta* + a)^10`              |
//!
//! `beta*` is the logistic fit of the true class, and the shift `a` is
//! calibrated so the mean of `e(x)` over the positives equals `c`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, sigmoid, LogisticOptions};

pub const CALIBRATION_BRACKET: (f64, f64) = (-50.0, 50.0);
pub const CALIBRATION_TOL: f64 = 1e-10;
const S4_EXPONENT: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    S1,
    S2,
    S3,
    S4,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::S1, Strategy::S2, Strategy::S3, Strategy::S4];

    /// Propensity for a linear score `t = x^T beta* + a`; S1 ignores `t`.
    /// The result is in `(0, 1]`.
    pub fn propensity(self, c: f64, t: f64) -> f64 {
        let v = match self {
            Strategy::S1 => c,
            Strategy::S2 => sigmoid(t),
            Strategy::S3 => 0.5 + t.atan() / std::f64::consts::PI,
            Strategy::S4 => sigmoid(t).powi(S4_EXPONENT),
        };
        v.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
            Strategy::S3 => "s3",
            Strategy::S4 => "s4",
        };
        f.write_str(s)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Strategy::S1),
            "s2" => Ok(Strategy::S2),
            "s3" => Ok(Strategy::S3),
            "s4" => Ok(Strategy::S4),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub strategy: Strategy,
    /// Target labeling frequency `P(S = 1 | Y = 1)`.
    pub c: f64,
    /// Calibrated shift; unused by S1.
    pub a: Option<f64>,
    /// Logistic fit of the true class; unused by S1.
    pub beta_star: Option<DVector<f64>>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Fits `beta*` on `data` and calibrates `a` on its positive rows.
    pub fn prepare(data: &PUDataset, strategy: Strategy, c: f64, seed: u64) -> Result<Self> {
        check_frequency(c)?;
        if strategy == Strategy::S1 {
            return Ok(Self { strategy, c, a: None, beta_star: None, seed });
        }
        let beta_star = oracle_beta(data)?;
        let positives = positive_rows(data)?;
        let a = calibrate_a(strategy, c, &beta_star, &positives)?;
        Ok(Self {
            strategy,
            c,
            a: Some(a),
            beta_star: Some(beta_star),
            seed,
        })
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        match (&self.beta_star, self.a) {
            (Some(b), Some(a)) => {
                if b.len() != x.len() {
                    return Err(Error::Dimension { expected: b.len(), got: x.len() });
                }
                Ok(x.iter().zip(b.iter()).map(|(xi, bi)| xi * bi).sum::<f64>() + a)
            }
            _ => Err(Error::InvalidArgument(format!(
                "strategy {} needs beta* and a calibrated shift",
                self.strategy
            ))),
        }
    }
}

fn check_frequency(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("labeling frequency {c} is not in (0, 1)")))
    }
}

fn positive_rows(data: &PUDataset) -> Result<DMatrix<f64>> {
    let y = data
        .y_hidden()
        .ok_or_else(|| Error::InvalidArgument("scenario needs the hidden class".into()))?;
    let idx: Vec<usize> = (0..data.n()).filter(|&i| y[i] == 1).collect();
    if idx.is_empty() {
        return Err(Error::Degenerate("no positive rows".into()));
    }
    Ok(data.features().select_rows(&idx))
}

/// Logistic fit of the hidden class on all columns of `data`.
pub fn oracle_beta(data: &PUDataset) -> Result<DVector<f64>> {
    let y = data
        .y_hidden()
        .ok_or_else(|| Error::InvalidArgument("oracle fit needs the hidden class".into()))?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Degenerate("oracle fit needs both classes".into()));
    }
    Ok(fit_logistic(data.features(), y, LogisticOptions::default())?.weights)
}

/// Propensity of one feature row under a prepared spec.
pub fn propensity_value(spec: &ScenarioSpec, x: &[f64]) -> Result<f64> {
    match spec.strategy {
        Strategy::S1 => Ok(spec.c),
        s => Ok(s.propensity(spec.c, spec.score(x)?)),
    }
}

/// Mean propensity over rows whose base scores are `scores`, after `shift`.
pub fn mean_propensity(strategy: Strategy, c: f64, scores: &[f64], shift: f64) -> f64 {
    scores.iter().map(|&t| strategy.propensity(c, t + shift)).sum::<f64>() / scores.len() as f64
}

/// Bisection for the shift `a` that makes the mean propensity over
/// `positive_rows` equal `c`. The mean is increasing in `a` for S2-S4.
pub fn calibrate_a(
    strategy: Strategy,
    c: f64,
    beta_star: &DVector<f64>,
    positive_rows: &DMatrix<f64>,
) -> Result<f64> {
    check_frequency(c)?;
    if strategy == Strategy::S1 {
        return Err(Error::InvalidArgument("S1 has no shift to calibrate".into()));
    }
    if positive_rows.nrows() == 0 {
        return Err(Error::Degenerate("no positive rows to calibrate on".into()));
    }
    if positive_rows.ncols() != beta_star.len() {
        return Err(Error::Dimension { expected: beta_star.len(), got: positive_rows.ncols() });
    }
    let scores: Vec<f64> = (positive_rows * beta_star).iter().copied().collect();
    let mean = |a: f64| mean_propensity(strategy, c, &scores, a);

    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    let (m_lo, m_hi) = (mean(lo), mean(hi));
    if m_lo > c {
        return Err(Error::Calibration { target: c, achieved: m_lo });
    }
    if m_hi < c {
        return Err(Error::Calibration { target: c, achieved: m_hi });
    }
    while hi - lo > CALIBRATION_TOL {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Labels each hidden positive with its own probability from `propensity`.
pub fn label_with_propensity(data: &PUDataset, propensity: &[f64], seed: u64) -> Result<PUDataset> {
    let y = data
        .y_hidden()
        .ok_or_else(|| Error::InvalidArgument("labeling needs the hidden class".into()))?;
    if propensity.len() != data.n() {
        return Err(Error::Dimension { expected: data.n(), got: propensity.len() });
    }
    if !y.contains(&1) {
        return Err(Error::Degenerate("no positive rows to label".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = y
        .iter()
        .zip(propensity)
        .map(|(&yi, &e)| {
            if yi == 1 {
                u8::from(rng.random::<f64>() < e)
            } else {
                0
            }
        })
        .collect();
    data.clone().with_labels(s)
}

/// Draws PU labels for `data` under a prepared spec.
pub fn apply_labels(data: &PUDataset, spec: &ScenarioSpec, seed: u64) -> Result<PUDataset> {
    let propensity = (0..data.n())
        .map(|i| {
            let row: Vec<f64> = data.features().row(i).iter().copied().collect();
            propensity_value(spec, &row)
        })
        .collect::<Result<Vec<_>>>()?;
    label_with_propensity(data, &propensity, seed)
}
