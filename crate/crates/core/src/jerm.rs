//! The alternating joint empirical risk minimization fit.
//!
//! Spies are found once. The propensity starts from `0.5 (1 + s_hat(x))`,
//! where `s_hat` is the naive logistic fit of `s`. Each alternation then
//!
//! 1. minimizes the joint risk in the posterior coefficients by MM, with
//!    the current propensity held fixed and the previous posterior as start
//!    (zero on the first pass by default);
//! 2. rebuilds the likely-positive set and the estimated positive set;
//! 3. refits the propensity by logistic regression of `s` on that set.
//!
//! The loop stops when the posterior coefficients move less than
//! `param_tol` in the infinity norm.

use nalgebra::{DMatrix, DVector};

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::glm::{
    empirical_risk, fit_logistic, sigmoid, LinearModel, LogisticOptions, Theta,
};
use crate::mm::{minimize_beta_with_offsets, MMConfig};
use crate::spy::{find_spies, partition_with_spies, PartitionSizes};
use crate::synthetic::PuSampler;

/// Starting point of the first posterior fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaStart {
    /// Weights of the naive fit of `s`.
    Naive,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JermConfig {
    pub max_alternations: usize,
    /// Infinity-norm change in the posterior coefficients that ends the loop.
    pub param_tol: f64,
    pub mm: MMConfig,
    /// Ridge for the propensity fit on the estimated positive set.
    pub ridge_propensity: f64,
    /// Ridge for the naive fit used to initialize the propensity.
    pub ridge_init: f64,
    pub beta_start: BetaStart,
    pub seed: u64,
}

impl Default for JermConfig {
    fn default() -> Self {
        Self {
            max_alternations: 50,
            param_tol: 1e-4,
            mm: MMConfig::default(),
            ridge_propensity: 1e-6,
            ridge_init: 1e-6,
            beta_start: BetaStart::Zero,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JermFit {
    pub theta: Theta,
    pub partition_history: Vec<PartitionSizes>,
    /// Joint risk after each posterior update.
    pub risk_history: Vec<f64>,
    pub converged: bool,
    pub alternations: usize,
}

/// Initial propensity `0.5 (1 + s_hat(x_i))` per row, with the naive model.
pub fn init_propensity(data: &PUDataset, ridge: f64) -> Result<(Vec<f64>, LinearModel)> {
    let labeled = data.labeled_count();
    if labeled == 0 || labeled == data.n() {
        return Err(Error::Degenerate(
            "propensity initialization needs both labeled and unlabeled rows".into(),
        ));
    }
    let opts = LogisticOptions { ridge, ..LogisticOptions::default() };
    let naive = fit_logistic(data.features(), data.s(), opts)?;
    let e = naive
        .predict_proba(data.features())?
        .into_iter()
        .map(|s_hat| 0.5 * (1.0 + s_hat))
        .collect();
    Ok((e, naive))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Runs the alternating fit. `data` must be standardized with an intercept
/// column and contain both labeled and unlabeled rows.
pub fn fit(data: &PUDataset, cfg: &JermConfig) -> Result<JermFit> {
    if !data.intercept_added() {
        return Err(Error::InvalidArgument(
            "fit expects an intercept column; call add_intercept first".into(),
        ));
    }
    cfg.mm.validate()?;
    let spies = find_spies(data)?;
    let (mut e_probs, naive) = init_propensity(data, cfg.ridge_init)?;
    let mut offsets: Vec<f64> = e_probs.iter().map(|&e| logit(e)).collect();

    let mut beta = match cfg.beta_start {
        BetaStart::Naive => naive.weights.clone(),
        BetaStart::Zero => DVector::zeros(data.p()),
    };
    let mut gamma = naive.weights.clone();
    let mut out = JermFit {
        theta: Theta { beta: beta.clone(), gamma: gamma.clone() },
        partition_history: Vec::new(),
        risk_history: Vec::new(),
        converged: false,
        alternations: 0,
    };

    for _ in 0..cfg.max_alternations {
        let (beta_next, trace) = minimize_beta_with_offsets(data, &offsets, &beta, &cfg.mm)?;
        out.risk_history.push(*trace.risks.last().expect("trace starts with the initial risk"));
        out.alternations += 1;

        let y_probs: Vec<f64> = (data.features() * &beta_next).iter().map(|&z| sigmoid(z)).collect();
        let partition = partition_with_spies(data, &spies, &y_probs, &e_probs)?;
        out.partition_history.push(partition.sizes());

        let subset = data.select_rows(&partition.positive_estimate);
        let opts = LogisticOptions { ridge: cfg.ridge_propensity, ..LogisticOptions::default() };
        let propensity = match fit_logistic(subset.features(), subset.s(), opts) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("propensity refit failed: {e}; keeping the last valid parameters");
                out.theta = Theta { beta: beta_next, gamma };
                return Ok(out);
            }
        };

        let change = (&beta_next - &beta).amax();
        beta = beta_next;
        gamma = propensity.weights;
        let scores = data.features() * &gamma;
        offsets = scores.iter().copied().collect();
        e_probs = scores.iter().map(|&z| sigmoid(z)).collect();
        out.theta = Theta { beta: beta.clone(), gamma: gamma.clone() };

        if change < cfg.param_tol {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

fn predict_with(weights: &DVector<f64>, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    if rows.ncols() != weights.len() {
        return Err(Error::Dimension { expected: weights.len(), got: rows.ncols() });
    }
    Ok((rows * weights).iter().map(|&z| sigmoid(z)).collect())
}

/// `sigma(beta^T x)` per row; rows must carry the training transform and
/// intercept.
pub fn predict_posterior(fit: &JermFit, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    predict_with(&fit.theta.beta, rows)
}

/// `sigma(gamma^T x)` per row.
pub fn predict_propensity(fit: &JermFit, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    predict_with(&fit.theta.gamma, rows)
}

/// Monte-Carlo estimate of `Q(theta_hat) - Q(theta_star)` on one fresh
/// sample shared by both parameters.
pub fn estimate_excess_risk(
    theta_hat: &Theta,
    theta_star: &Theta,
    sampler: &dyn PuSampler,
    mc_size: usize,
    seed: u64,
) -> Result<f64> {
    if mc_size < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "Monte-Carlo size {mc_size} is below 10^4"
        )));
    }
    let sample = sampler.sample(mc_size, seed)?;
    excess_risk_on(theta_hat, theta_star, &sample)
}

/// Excess risk evaluated on a given sample.
pub fn excess_risk_on(theta_hat: &Theta, theta_star: &Theta, sample: &PUDataset) -> Result<f64> {
    if theta_hat == theta_star {
        return Ok(0.0);
    }
    Ok(empirical_risk(theta_hat, sample)? - empirical_risk(theta_star, sample)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::DoubleLogistic;

    #[test]
    fn init_formula() {
        let d = DoubleLogistic::reference(3).sample(400, 1).unwrap();
        let (e, naive) = init_propensity(&d, 1e-6).unwrap();
        let s_hat = naive.predict_proba(d.features()).unwrap();
        for (ei, si) in e.iter().zip(&s_hat) {
            assert!((ei - 0.5 * (1.0 + si)).abs() < 1e-15);
            assert!(*ei > 0.5 && *ei < 1.0);
        }
        let unlabeled = d.clone().with_labels(vec![0; 400]).unwrap();
        assert!(init_propensity(&unlabeled, 1e-6).is_err());
    }

    #[test]
    fn zero_alternations_returns_initial_model() {
        let d = DoubleLogistic::reference(3).sample(300, 2).unwrap();
        let cfg = JermConfig { max_alternations: 0, beta_start: BetaStart::Naive, ..Default::default() };
        let f = fit(&d, &cfg).unwrap();
        assert!(!f.converged);
        assert_eq!(f.alternations, 0);
        let (_, naive) = init_propensity(&d, cfg.ridge_init).unwrap();
        assert_eq!(f.theta.beta, naive.weights);
        assert_eq!(f.theta.gamma, naive.weights);
        let zero = fit(&d, &JermConfig { beta_start: BetaStart::Zero, ..cfg }).unwrap();
        assert_eq!(zero.theta.beta, DVector::zeros(4));
    }

    #[test]
    fn requires_intercept() {
        let d = DoubleLogistic::reference(2).sample(50, 3).unwrap();
        let x = d.features().columns(0, 2).into_owned();
        let bare = PUDataset::new(x, d.s().to_vec(), None).unwrap();
        assert!(fit(&bare, &JermConfig::default()).is_err());
    }

    #[test]
    fn predictions_follow_coefficients() {
        let f = JermFit {
            theta: Theta::zeros(3),
            partition_history: vec![],
            risk_history: vec![],
            converged: true,
            alternations: 0,
        };
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 1.0, -3.0, 0.5, 1.0]);
        assert_eq!(predict_posterior(&f, &rows).unwrap(), vec![0.5, 0.5]);
        assert_eq!(predict_propensity(&f, &rows).unwrap(), vec![0.5, 0.5]);
        assert!(predict_posterior(&f, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn excess_risk_of_truth_is_zero() {
        let gen = DoubleLogistic::reference(3);
        let r = estimate_excess_risk(&gen.theta, &gen.theta, &gen, 10_000, 1).unwrap();
        assert_eq!(r, 0.0);
        assert!(estimate_excess_risk(&gen.theta, &gen.theta, &gen, 100, 1).is_err());
    }
}
