//! Sigmoid link, the joint PU loss and its empirical risk, the propensity
//! risk restricted to a subset, and a damped-Newton logistic regression.
//!
//! The joint loss for linear scores `a` (posterior) and `b` (propensity) is
//!
//! ```text
//! phi(a, b, s) = -s log[sig(a) sig(b)] - (1 - s) log[1 - sig(a) sig(b)]
//! ```
//!
//! Every quantity is evaluated in the log domain. With
//! `L = logsumexp(-a, -b, -a - b)` we have
//! `log(1 - sig(a) sig(b)) = L + log sig(a) + log sig(b)`, and the partial
//! derivative of the `s = 0` branch in `a` collapses to `exp(-softplus(a) - L)`.

use nalgebra::{DMatrix, DVector};

use crate::data::PUDataset;
use crate::error::{Error, Result};

const PROB_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, clamped so the result is strictly inside (0, 1).
pub fn sigmoid(t: f64) -> f64 {
    let v = if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    };
    v.clamp(f64::MIN_POSITIVE, PROB_CEIL)
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log sigmoid(t)`.
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

fn logsumexp3(x: f64, y: f64, z: f64) -> f64 {
    let m = x.max(y).max(z);
    m + ((x - m).exp() + (y - m).exp() + (z - m).exp()).ln()
}

/// `log(1 - sigmoid(a) sigmoid(b))`.
pub fn log_one_minus_product(a: f64, b: f64) -> f64 {
    logsumexp3(-a, -b, -a - b) + log_sigmoid(a) + log_sigmoid(b)
}

/// The joint logistic loss; symmetric in `a` and `b` and never negative.
pub fn joint_loss(a: f64, b: f64, s: u8) -> f64 {
    let v = if s == 1 {
        -(log_sigmoid(a) + log_sigmoid(b))
    } else {
        -log_one_minus_product(a, b)
    };
    v.max(0.0)
}

/// Partial derivatives of [`joint_loss`] with respect to `a` and `b`.
pub fn joint_loss_partials(a: f64, b: f64, s: u8) -> (f64, f64) {
    if s == 1 {
        (-sigmoid(-a), -sigmoid(-b))
    } else {
        let l = logsumexp3(-a, -b, -a - b);
        ((-softplus(a) - l).exp(), (-softplus(b) - l).exp())
    }
}

/// Joint parameter: posterior coefficients `beta` and propensity
/// coefficients `gamma`, each with one entry per data column.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
}

impl Theta {
    pub fn new(beta: DVector<f64>, gamma: DVector<f64>) -> Result<Self> {
        if beta.len() != gamma.len() {
            return Err(Error::Dimension { expected: beta.len(), got: gamma.len() });
        }
        if beta.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(Self { beta, gamma })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            beta: DVector::zeros(dim),
            gamma: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Stacked `(beta, gamma)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(2 * d, |k, _| if k < d { self.beta[k] } else { self.gamma[k - d] })
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self {
            beta: v.rows(0, d).into_owned(),
            gamma: v.rows(d, d).into_owned(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.beta.lp_norm(1) + self.gamma.lp_norm(1)
    }

    /// Orders the pair so that `|beta|_1 >= |gamma|_1`.
    pub fn identified(self) -> Self {
        if self.beta.lp_norm(1) >= self.gamma.lp_norm(1) {
            self
        } else {
            Self {
                beta: self.gamma,
                gamma: self.beta,
            }
        }
    }
}

/// A coefficient vector with a sigmoid link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: DVector<f64>,
    /// Whether the solver met its gradient tolerance.
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    pub fn from_weights(weights: DVector<f64>) -> Self {
        Self { weights, converged: true, iterations: 0 }
    }

    pub fn predict_proba(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                got: rows.ncols(),
            });
        }
        Ok((rows * &self.weights).iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(row.iter().zip(self.weights.iter()).map(|(x, w)| x * w).sum())
    }
}

/// Mean joint loss over rows for a posterior coefficient vector and fixed
/// per-row propensity logits.
pub fn risk_with_offsets(data: &PUDataset, beta: &DVector<f64>, offsets: &[f64]) -> Result<f64> {
    check_offsets(data, offsets)?;
    let a = data.linear_scores(beta)?;
    Ok(mean_loss(&a, offsets, data.s()))
}

/// Gradient of [`risk_with_offsets`] in `beta`.
pub fn risk_grad_with_offsets(
    data: &PUDataset,
    beta: &DVector<f64>,
    offsets: &[f64],
) -> Result<DVector<f64>> {
    check_offsets(data, offsets)?;
    let a = data.linear_scores(beta)?;
    let n = data.n() as f64;
    let da = DVector::from_iterator(
        data.n(),
        a.iter()
            .zip(offsets)
            .zip(data.s())
            .map(|((&ai, &bi), &si)| joint_loss_partials(ai, bi, si).0 / n),
    );
    Ok(data.features().tr_mul(&da))
}

fn check_offsets(data: &PUDataset, offsets: &[f64]) -> Result<()> {
    if offsets.len() != data.n() {
        return Err(Error::Dimension { expected: data.n(), got: offsets.len() });
    }
    Ok(())
}

fn mean_loss(a: &DVector<f64>, b: &[f64], s: &[u8]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .zip(s)
        .map(|((&ai, &bi), &si)| joint_loss(ai, bi, si))
        .sum();
    total / s.len() as f64
}

/// Empirical joint risk `Q_n(theta)`.
pub fn empirical_risk(theta: &Theta, data: &PUDataset) -> Result<f64> {
    let a = data.linear_scores(&theta.beta)?;
    let b = data.linear_scores(&theta.gamma)?;
    Ok(mean_loss(&a, b.as_slice(), data.s()))
}

/// Gradient of [`empirical_risk`], stacked as `(d/d beta, d/d gamma)`.
pub fn empirical_risk_grad(theta: &Theta, data: &PUDataset) -> Result<DVector<f64>> {
    let a = data.linear_scores(&theta.beta)?;
    let b = data.linear_scores(&theta.gamma)?;
    let n = data.n();
    let mut da = DVector::zeros(n);
    let mut db = DVector::zeros(n);
    for i in 0..n {
        let (ga, gb) = joint_loss_partials(a[i], b[i], data.s()[i]);
        da[i] = ga / n as f64;
        db[i] = gb / n as f64;
    }
    let gb = data.features().tr_mul(&db);
    let ga = data.features().tr_mul(&da);
    let d = theta.dim();
    Ok(DVector::from_fn(2 * d, |k, _| if k < d { ga[k] } else { gb[k - d] }))
}

/// Logistic negative log-likelihood of `s` given `sigma(gamma^T x)`,
/// averaged over `subset`.
pub fn propensity_risk(gamma: &DVector<f64>, data: &PUDataset, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("propensity risk over an empty subset".into()));
    }
    if gamma.len() != data.p() {
        return Err(Error::Dimension { expected: data.p(), got: gamma.len() });
    }
    let mut total = 0.0;
    for &i in subset {
        if i >= data.n() {
            return Err(Error::InvalidArgument(format!("row index {i} out of range")));
        }
        let z = data.features().row(i).transpose().dot(gamma);
        total += if data.s()[i] == 1 {
            -log_sigmoid(z)
        } else {
            -log_sigmoid(-z)
        };
    }
    Ok(total / subset.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub ridge: f64,
    pub max_iter: usize,
    /// Tolerance on the gradient infinity norm.
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { ridge: 1e-6, max_iter: 100, tol: 1e-8 }
    }
}

/// Mean logistic NLL plus `ridge / 2 * |w|^2`.
pub fn logistic_objective(x: &DMatrix<f64>, targets: &[u8], w: &DVector<f64>, ridge: f64) -> f64 {
    let z = x * w;
    let nll: f64 = z
        .iter()
        .zip(targets)
        .map(|(&zi, &t)| softplus(zi) - f64::from(t) * zi)
        .sum();
    nll / targets.len() as f64 + 0.5 * ridge * w.norm_squared()
}

/// Ridge-penalized logistic regression by damped Newton iterations from a
/// zero start.
///
/// Separable data without a ridge term makes the optimum run off to
/// infinity; the solver then stops at `max_iter` and reports
/// `converged = false`.
pub fn fit_logistic(x: &DMatrix<f64>, targets: &[u8], opts: LogisticOptions) -> Result<LinearModel> {
    let n = x.nrows();
    let p = x.ncols();
    if targets.len() != n {
        return Err(Error::Dimension { expected: n, got: targets.len() });
    }
    if n == 0 {
        return Err(Error::Degenerate("logistic fit on zero rows".into()));
    }
    let positives = targets.iter().filter(|&&t| t == 1).count();
    if opts.ridge <= 0.0 && (positives == 0 || positives == n) {
        return Err(Error::Degenerate(
            "logistic fit needs both target classes when ridge is zero".into(),
        ));
    }
    let nf = n as f64;
    let t = DVector::from_iterator(n, targets.iter().map(|&v| f64::from(v)));
    let mut w = DVector::zeros(p);
    let mut f = logistic_objective(x, targets, &w, opts.ridge);

    for iter in 0..opts.max_iter {
        let z = x * &w;
        let mu = z.map(sigmoid);
        let grad = x.tr_mul(&(&mu - &t)) / nf + &w * opts.ridge;
        if grad.amax() <= opts.tol {
            // A strictly separating w means no finite unpenalized optimum.
            let separated = opts.ridge <= 0.0
                && z.iter().zip(targets).all(|(&zi, &ti)| if ti == 1 { zi > 0.0 } else { zi < 0.0 });
            return Ok(LinearModel { weights: w, converged: !separated, iterations: iter });
        }
        let curv = mu.map(|m| m * (1.0 - m) / nf);
        let mut hess = x.tr_mul(&DMatrix::from_fn(n, p, |i, j| x[(i, j)] * curv[i]));
        for j in 0..p {
            hess[(j, j)] += opts.ridge;
        }
        let step = solve_spd(hess, -&grad);
        let slope = grad.dot(&step);

        let mut scale = 1.0;
        let mut accepted = false;
        while scale > 1e-12 {
            let cand = &w + &step * scale;
            let fc = logistic_objective(x, targets, &cand, opts.ridge);
            if fc <= f + 1e-4 * scale * slope {
                w = cand;
                f = fc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            let converged = grad.amax() <= opts.tol;
            return Ok(LinearModel { weights: w, converged, iterations: iter + 1 });
        }
    }
    let z = x * &w;
    let grad = x.tr_mul(&(z.map(sigmoid) - &t)) / nf + &w * opts.ridge;
    Ok(LinearModel {
        converged: grad.amax() <= opts.tol,
        weights: w,
        iterations: opts.max_iter,
    })
}

/// Solves `h x = rhs` for symmetric positive semi-definite `h`, adding
/// growing diagonal jitter until the Cholesky factorization succeeds.
pub(crate) fn solve_spd(mut h: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(&rhs);
    }
    let mut jitter = 1e-10 * h.diagonal().amax().max(1.0);
    loop {
        for j in 0..h.nrows() {
            h[(j, j)] += jitter;
        }
        if let Some(ch) = h.clone().cholesky() {
            return ch.solve(&rhs);
        }
        jitter *= 10.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-10), evaluated with mpmath at 30 digits
        assert_relative_eq!(sigmoid(10.0), 0.999954602131297566, max_relative = 1e-15);
        for t in [-700.0, -36.0, -1.0, 3.5, 40.0, 700.0] {
            let v = sigmoid(t);
            assert!(v > 0.0 && v < 1.0, "sigmoid({t}) = {v}");
            assert!((v + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_loss_values() {
        assert_relative_eq!(joint_loss(0.0, 0.0, 1), 4f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(joint_loss(0.0, 0.0, 0), -(0.75f64).ln(), max_relative = 1e-15);
        // -2 log sigma(10), mpmath at 30 digits
        assert_relative_eq!(joint_loss(10.0, 10.0, 1), 9.07977984337293e-5, max_relative = 1e-12);
    }

    #[test]
    fn joint_loss_survives_extreme_scores() {
        for &(a, b) in &[(500.0, 500.0), (-500.0, 500.0), (500.0, -500.0), (-500.0, -500.0)] {
            for s in [0, 1] {
                let v = joint_loss(a, b, s);
                assert!(v.is_finite() && v >= 0.0, "phi({a},{b},{s}) = {v}");
            }
        }
        // 1 - sig(500)^2 ~ 2 e^-500 would underflow to 0 computed naively
        let v = joint_loss(500.0, 500.0, 0);
        assert_relative_eq!(v, 500.0 - 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn partials_at_origin() {
        let (da, db) = joint_loss_partials(0.0, 0.0, 0);
        assert_relative_eq!(da, 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(db, 1.0 / 6.0, max_relative = 1e-15);
        let (da, _) = joint_loss_partials(0.0, 0.0, 1);
        assert_relative_eq!(da, -0.5);
    }

    #[test]
    fn theta_swap_rule() {
        let t = Theta::new(DVector::from_vec(vec![0.1, 0.0]), DVector::from_vec(vec![1.0, -1.0]))
            .unwrap()
            .identified();
        assert_eq!(t.beta.as_slice(), &[1.0, -1.0]);
        assert!(Theta::new(DVector::zeros(2), DVector::zeros(3)).is_err());
    }

    #[test]
    fn logistic_all_equal_targets_with_ridge() {
        let x = DMatrix::from_fn(30, 2, |i, j| if j == 1 { 1.0 } else { (i as f64 * 0.37).sin() });
        let m = fit_logistic(&x, &[1; 30], LogisticOptions::default()).unwrap();
        let probs = m.predict_proba(&x).unwrap();
        assert!(probs.iter().all(|&p| (p - 1.0).abs() < 1e-3));
        assert!(fit_logistic(&x, &[1; 30], LogisticOptions { ridge: 0.0, ..Default::default() })
            .is_err());
    }

    #[test]
    fn logistic_intercept_only_matches_class_logit() {
        let x = DMatrix::from_element(10, 1, 1.0);
        let targets = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let m = fit_logistic(&x, &targets, LogisticOptions::default()).unwrap();
        assert!(m.converged);
        assert!((sigmoid(m.weights[0]) - 0.3).abs() < 1e-3);
    }

    #[test]
    fn logistic_separable_without_ridge_flags() {
        let x = DMatrix::from_row_slice(4, 2, &[-2.0, 1.0, -1.0, 1.0, 1.0, 1.0, 2.0, 1.0]);
        let opts = LogisticOptions { ridge: 0.0, max_iter: 30, tol: 1e-8 };
        let m = fit_logistic(&x, &[0, 0, 1, 1], opts).unwrap();
        assert!(!m.converged);
        assert!(m.weights.iter().all(|v| v.is_finite()));
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn logistic_slope_sign_follows_correlation() {
        let x = DMatrix::from_fn(40, 2, |i, j| if j == 1 { 1.0 } else { i as f64 / 10.0 - 2.0 });
        let t: Vec<u8> = (0..40).map(|i| u8::from((i * 7) % 40 < i + 4)).collect();
        let m = fit_logistic(&x, &t, LogisticOptions::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        let flipped: Vec<u8> = t.iter().map(|v| 1 - v).collect();
        let m = fit_logistic(&x, &flipped, LogisticOptions::default()).unwrap();
        assert!(m.weights[0] < 0.0);
    }

    #[test]
    fn propensity_risk_single_row() {
        let d = PUDataset::new(DMatrix::from_element(1, 2, 0.3), vec![1], None).unwrap();
        let r = propensity_risk(&DVector::zeros(2), &d, &[0]).unwrap();
        assert_relative_eq!(r, 2f64.ln(), max_relative = 1e-15);
        assert!(propensity_risk(&DVector::zeros(2), &d, &[]).is_err());
        assert!(propensity_risk(&DVector::zeros(2), &d, &[3]).is_err());
    }

    proptest! {
        #[test]
        fn joint_loss_symmetric_and_nonnegative(a in -60.0f64..60.0, b in -60.0f64..60.0, s in 0u8..2) {
            let l = joint_loss(a, b, s);
            prop_assert!(l >= 0.0);
            prop_assert!((l - joint_loss(b, a, s)).abs() <= 1e-12 * l.max(1.0));
        }

        #[test]
        fn joint_loss_matches_direct_formula(a in -20.0f64..20.0, b in -20.0f64..20.0, s in 0u8..2) {
            let q = 1.0 / (1.0 + (-a).exp()) / (1.0 + (-b).exp());
            let direct = if s == 1 { -q.ln() } else { -(1.0 - q).ln() };
            prop_assert!((joint_loss(a, b, s) - direct).abs() <= 1e-9 * direct.max(1e-3));
        }
    }
}
