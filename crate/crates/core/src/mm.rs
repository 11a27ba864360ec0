//! Majorization-minimization for the joint empirical risk.
//!
//! The second derivative of the joint loss in either linear score, and the
//! largest eigenvalue of its 2x2 Hessian in `(a, b)`, never exceed 1/4. So
//! for any expansion point `beta0` and step `d`,
//!
//! ```text
//! Q_n(beta0 + d) <= Q_n(beta0) + grad^T d + (c / 2n) sum_i (x_i^T d)^2,   c >= 1/4
//! ```
//!
//! The right-hand side is minimized by one linear solve against the fixed
//! matrix `c X^T X / n`, which is factored once per call.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{derive_seed, PUDataset};
use crate::error::{Error, Result};
use crate::glm::{
    empirical_risk, empirical_risk_grad, risk_grad_with_offsets, risk_with_offsets, Theta,
};

/// Descent slack allowed for floating-point noise when accepting a step.
pub const DESCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MMConfig {
    pub max_outer_iter: usize,
    /// Stop once one step lowers the risk by less than this.
    pub surrogate_tol: f64,
    /// Stop once the gradient infinity norm falls below this.
    pub grad_tol: f64,
    /// Per-sample quadratic majorizer constant.
    pub curvature: f64,
    /// Radius of the l1 ball for the constrained joint mode.
    pub l1_radius: Option<f64>,
}

impl Default for MMConfig {
    fn default() -> Self {
        Self {
            max_outer_iter: 200,
            surrogate_tol: 1e-8,
            grad_tol: 1e-6,
            curvature: 0.25,
            l1_radius: None,
        }
    }
}

impl MMConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.surrogate_tol > 0.0
            && self.grad_tol > 0.0
            && self.curvature > 0.0
            && self.l1_radius.is_none_or(|r| r > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid MM configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    /// Risk at the start point followed by the risk after every accepted step.
    pub risks: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the majorizer matrix needed diagonal jitter to factor.
    pub jittered: bool,
}

impl FitTrace {
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.risks.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Value of the quadratic majorizer built at `beta0`, evaluated at `beta`.
pub fn surrogate_value(
    data: &PUDataset,
    offsets: &[f64],
    beta0: &DVector<f64>,
    beta: &DVector<f64>,
    curvature: f64,
) -> Result<f64> {
    let q0 = risk_with_offsets(data, beta0, offsets)?;
    let g = risk_grad_with_offsets(data, beta0, offsets)?;
    let d = beta - beta0;
    let xd = data.features() * &d;
    Ok(q0 + g.dot(&d) + 0.5 * curvature * xd.norm_squared() / data.n() as f64)
}

/// Minimizes `Q_n(beta, gamma)` in `beta` with `gamma` held fixed.
pub fn minimize_beta(
    data: &PUDataset,
    gamma: &DVector<f64>,
    beta_init: &DVector<f64>,
    cfg: &MMConfig,
) -> Result<(DVector<f64>, FitTrace)> {
    let offsets = data.linear_scores(gamma)?;
    minimize_beta_with_offsets(data, offsets.as_slice(), beta_init, cfg)
}

/// Same as [`minimize_beta`] but with arbitrary per-row propensity logits,
/// which is what the first pass of the alternating fit needs.
pub fn minimize_beta_with_offsets(
    data: &PUDataset,
    offsets: &[f64],
    beta_init: &DVector<f64>,
    cfg: &MMConfig,
) -> Result<(DVector<f64>, FitTrace)> {
    cfg.validate()?;
    if beta_init.len() != data.p() {
        return Err(Error::Dimension { expected: data.p(), got: beta_init.len() });
    }
    let n = data.n() as f64;
    let majorizer = data.features().tr_mul(data.features()) * (cfg.curvature / n);
    let factor = factor_spd(majorizer);

    let mut beta = beta_init.clone();
    let mut risk = risk_with_offsets(data, &beta, offsets)?;
    let mut trace = FitTrace {
        risks: vec![risk],
        jittered: factor.jittered,
        ..FitTrace::default()
    };

    for _ in 0..cfg.max_outer_iter {
        let grad = risk_grad_with_offsets(data, &beta, offsets)?;
        if grad.amax() < cfg.grad_tol {
            trace.converged = true;
            break;
        }
        let cand = &beta - factor.solve(&grad);
        let cand_risk = risk_with_offsets(data, &cand, offsets)?;
        if cand_risk > risk + DESCENT_SLACK || !cand_risk.is_finite() {
            // only rounding can get here; the majorizer guarantees descent
            trace.converged = true;
            break;
        }
        let drop = risk - cand_risk;
        beta = cand;
        risk = cand_risk;
        trace.risks.push(risk);
        trace.iterations += 1;
        if drop < cfg.surrogate_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((beta, trace))
}

struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    jittered: bool,
}

impl SpdFactor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

fn factor_spd(h: DMatrix<f64>) -> SpdFactor {
    if let Some(chol) = h.clone().cholesky() {
        return SpdFactor { chol, jittered: false };
    }
    let mut jitter = 1e-10 * h.diagonal().amax().max(1.0);
    loop {
        let mut hj = h.clone();
        for j in 0..hj.nrows() {
            hj[(j, j)] += jitter;
        }
        if let Some(chol) = hj.cholesky() {
            return SpdFactor { chol, jittered: true };
        }
        jitter *= 10.0;
    }
}

/// Euclidean projection onto `{v : |v|_1 <= radius}` via the sorted
/// simplex projection of the absolute values.
pub fn project_l1_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    if v.lp_norm(1) <= radius {
        return v.clone();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.map(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// `C (n / log p)^(1/2 - eta)`, the radius schedule under which the
/// constrained minimizer is risk consistent.
pub fn consistency_radius(n: usize, p: usize, scale: f64, eta: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidArgument("radius schedule needs p >= 2".into()));
    }
    if !(eta > 0.0 && eta < 0.5) || scale <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius schedule needs C > 0 and eta in (0, 1/2), got C = {scale}, eta = {eta}"
        )));
    }
    Ok(scale * (n as f64 / (p as f64).ln()).powf(0.5 - eta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedFit {
    /// Best candidate after the swap rule, so `|beta|_1 >= |gamma|_1`.
    pub theta: Theta,
    pub risk: f64,
    /// Restart that produced the best candidate.
    pub restart: usize,
    pub trace: FitTrace,
}

/// Minimizes `Q_n(beta, gamma)` jointly over the l1 ball of radius
/// `cfg.l1_radius` by projected MM from `restarts` random starts.
///
/// The joint step uses an isotropic majorizer `L I` with
/// `L = curvature * lambda_max(X^T X / n)`, so that the constrained
/// surrogate minimizer is exactly the projection of the unconstrained one.
pub fn minimize_joint_constrained(
    data: &PUDataset,
    cfg: &MMConfig,
    restarts: usize,
    seed: u64,
) -> Result<ConstrainedFit> {
    cfg.validate()?;
    let radius = cfg
        .l1_radius
        .ok_or_else(|| Error::InvalidArgument("constrained mode needs an l1 radius".into()))?;
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let gram = data.features().tr_mul(data.features()) / data.n() as f64;
    let lambda_max = gram
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let lipschitz = (cfg.curvature * lambda_max).max(f64::MIN_POSITIVE);
    let dim = 2 * data.p();

    let runs: Vec<Result<(Theta, f64, FitTrace)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let start = DVector::from_fn(dim, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let start = project_l1_ball(&(start * (radius / dim as f64)), radius);
            projected_mm(data, start, radius, lipschitz, cfg)
        })
        .collect();

    let mut best: Option<(usize, Theta, f64, FitTrace)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let (theta, risk, trace) = run?;
        if best.as_ref().is_none_or(|b| risk < b.2) {
            best = Some((r, theta, risk, trace));
        }
    }
    let (restart, theta, risk, trace) = best.expect("restarts >= 1");
    Ok(ConstrainedFit {
        theta: theta.identified(),
        risk,
        restart,
        trace,
    })
}

fn projected_mm(
    data: &PUDataset,
    start: DVector<f64>,
    radius: f64,
    lipschitz: f64,
    cfg: &MMConfig,
) -> Result<(Theta, f64, FitTrace)> {
    let mut theta = Theta::from_vector(&start);
    let mut risk = empirical_risk(&theta, data)?;
    let mut trace = FitTrace { risks: vec![risk], ..FitTrace::default() };
    for _ in 0..cfg.max_outer_iter {
        let v = theta.to_vector();
        let grad = empirical_risk_grad(&theta, data)?;
        let next = project_l1_ball(&(&v - grad / lipschitz), radius);
        let mapping = (&next - &v).amax() * lipschitz;
        if mapping < cfg.grad_tol {
            trace.converged = true;
            break;
        }
        let cand = Theta::from_vector(&next);
        let cand_risk = empirical_risk(&cand, data)?;
        if cand_risk > risk + DESCENT_SLACK {
            trace.converged = true;
            break;
        }
        let drop = risk - cand_risk;
        theta = cand;
        risk = cand_risk;
        trace.risks.push(risk);
        trace.iterations += 1;
        if drop < cfg.surrogate_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((theta, risk, trace))
}
