//! Baselines, balanced accuracy, the repeated-split experiment protocol and
//! the excess-risk sweep.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{add_intercept, derive_seed, split_indices, standardize, PUDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, LinearModel, LogisticOptions, Theta};
use crate::jerm::{self, estimate_excess_risk, JermConfig};
use crate::mm::{consistency_radius, minimize_joint_constrained, MMConfig};
use crate::scenarios::{apply_labels, ScenarioSpec, Strategy};
use crate::synthetic::{DoubleLogistic, PuSampler};

/// Probability above which a row is classified positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Naive,
    Oracle,
    Jerm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Naive, Method::Oracle, Method::Jerm];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Oracle => "oracle",
            Method::Jerm => "jerm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Method::Naive),
            "oracle" => Ok(Method::Oracle),
            "jerm" => Ok(Method::Jerm),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Mean of the true-positive and true-negative rates.
pub fn balanced_accuracy(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: predicted.len() });
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        if t == 1 {
            pos += 1;
            tp += usize::from(p == 1);
        } else {
            neg += 1;
            tn += usize::from(p == 0);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "balanced accuracy needs both classes in the truth".into(),
        ));
    }
    Ok(0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

pub fn decisions(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > DECISION_THRESHOLD)).collect()
}

/// Logistic fit that treats unlabeled rows as negative.
pub fn fit_naive(train: &PUDataset) -> Result<LinearModel> {
    fit_logistic(train.features(), train.s(), LogisticOptions::default())
}

/// Logistic fit on the hidden true class.
pub fn fit_oracle(train: &PUDataset) -> Result<LinearModel> {
    let y = train
        .y_hidden()
        .ok_or_else(|| Error::InvalidArgument("oracle needs the hidden class".into()))?;
    fit_logistic(train.features(), y, LogisticOptions::default())
}

/// Posterior model produced by `method` on prepared PU training data.
pub fn fit_method(method: Method, train: &PUDataset, jerm_cfg: &JermConfig) -> Result<LinearModel> {
    match method {
        Method::Naive => fit_naive(train),
        Method::Oracle => fit_oracle(train),
        Method::Jerm => {
            let fit = jerm::fit(train, jerm_cfg)?;
            Ok(LinearModel {
                weights: fit.theta.beta,
                converged: fit.converged,
                iterations: fit.alternations,
            })
        }
    }
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// One table row: a method's balanced accuracy on one dataset and scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub dataset: String,
    pub strategy: Strategy,
    pub c: f64,
    pub method: String,
    pub mean: f64,
    pub sd: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub strategy: Strategy,
    pub c: f64,
    pub method: Method,
    /// Balanced accuracy of every successful repeat, in repeat order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Repeats that failed and were left out of the aggregate.
    pub failed: Vec<usize>,
}

impl ExperimentReport {
    fn from_accuracies(
        dataset: &str,
        strategy: Strategy,
        c: f64,
        method: Method,
        accuracies: Vec<f64>,
        failed: Vec<usize>,
    ) -> Self {
        let mean = if accuracies.is_empty() {
            f64::NAN
        } else {
            accuracies.iter().sum::<f64>() / accuracies.len() as f64
        };
        Self {
            dataset: dataset.to_owned(),
            strategy,
            c,
            method,
            sd: sample_sd(&accuracies),
            mean,
            accuracies,
            failed,
        }
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            dataset: self.dataset.clone(),
            strategy: self.strategy,
            c: self.c,
            method: self.method.to_string(),
            mean: self.mean,
            sd: self.sd,
            repeats: self.accuracies.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Win,
    Loss,
    Draw,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Win => "win",
            Verdict::Loss => "loss",
            Verdict::Draw => "draw",
        })
    }
}

/// Verdict is from the point of view of `first`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCell {
    pub first: String,
    pub second: String,
    pub verdict: Verdict,
}

/// Draw when the `mean ± sd` intervals overlap, otherwise a win for the
/// larger mean.
pub fn compare(first: &ReportSummary, second: &ReportSummary) -> ComparisonCell {
    let overlap = first.mean - first.sd <= second.mean + second.sd
        && second.mean - second.sd <= first.mean + first.sd;
    let verdict = if overlap {
        Verdict::Draw
    } else if first.mean > second.mean {
        Verdict::Win
    } else {
        Verdict::Loss
    };
    ComparisonCell {
        first: first.method.clone(),
        second: second.method.clone(),
        verdict,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub repeats: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    pub jerm: JermConfig,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            repeats: 10,
            base_seed: 0,
            train_fraction: 0.75,
            jerm: JermConfig::default(),
        }
    }
}

/// What one repeat produced; the row indices allow auditing the split.
#[derive(Debug)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub labeled: usize,
    pub results: Vec<(Method, Result<f64>)>,
}

/// Split, standardize on train, simulate labels on train, fit every method
/// and score it on the untouched test rows.
pub fn run_repeat(
    data: &PUDataset,
    strategy: Strategy,
    c: f64,
    methods: &[Method],
    repeat: usize,
    opts: &ExperimentOptions,
) -> Result<RepeatOutcome> {
    if data.y_hidden().is_none() {
        return Err(Error::InvalidArgument("experiments need the hidden class".into()));
    }
    let spec = SplitSpec::new(opts.train_fraction, opts.base_seed, repeat as u64)?;
    let (train_rows, test_rows) = split_indices(data.n(), &spec)?;
    let (train, transform) = standardize(&data.select_rows(&train_rows))?;
    let test = transform.apply(&data.select_rows(&test_rows))?;
    let train = add_intercept(&train)?;
    let test = add_intercept(&test)?;

    let label_seed = derive_seed(opts.base_seed, 1_000_000 + repeat as u64);
    let scenario = ScenarioSpec::prepare(&train, strategy, c, label_seed)?;
    let train = apply_labels(&train, &scenario, label_seed)?;
    let truth = test.y_hidden().expect("checked above");

    let results = methods
        .iter()
        .map(|&method| {
            let scored = fit_method(method, &train, &opts.jerm).and_then(|model| {
                let probs = model.predict_proba(test.features())?;
                balanced_accuracy(&decisions(&probs), truth)
            });
            (method, scored)
        })
        .collect();
    Ok(RepeatOutcome {
        repeat,
        train_rows,
        test_rows,
        labeled: train.labeled_count(),
        results,
    })
}

/// Repeats the protocol and aggregates one report per method.
pub fn run_experiment(
    dataset_id: &str,
    data: &PUDataset,
    strategy: Strategy,
    c: f64,
    methods: &[Method],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentReport>> {
    if opts.repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    if data.y_hidden().is_none() {
        return Err(Error::InvalidArgument("experiments need the hidden class".into()));
    }
    let outcomes: Vec<(usize, Result<RepeatOutcome>)> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| (r, run_repeat(data, strategy, c, methods, r, opts)))
        .collect();

    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut accuracies = Vec::new();
        let mut failed = Vec::new();
        for (r, outcome) in &outcomes {
            let value = match outcome {
                Ok(o) => o
                    .results
                    .iter()
                    .find(|(m, _)| *m == method)
                    .and_then(|(_, v)| v.as_ref().ok().copied()),
                Err(_) => None,
            };
            match value {
                Some(v) => accuracies.push(v),
                None => {
                    log::warn!("{dataset_id} {strategy} c={c} {method}: repeat {r} failed");
                    failed.push(*r);
                }
            }
        }
        reports.push(ExperimentReport::from_accuracies(
            dataset_id, strategy, c, method, accuracies, failed,
        ));
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessRiskOptions {
    pub mc_size: usize,
    pub restarts: usize,
    /// `C` in the radius schedule.
    pub radius_scale: f64,
    /// `eta` in the radius schedule.
    pub eta: f64,
    pub mm: MMConfig,
}

impl Default for ExcessRiskOptions {
    fn default() -> Self {
        Self {
            mc_size: 100_000,
            restarts: 5,
            radius_scale: 1.0,
            eta: 0.25,
            mm: MMConfig {
                max_outer_iter: 3000,
                surrogate_tol: 1e-10,
                ..MMConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessRiskRow {
    pub n: usize,
    pub radius: f64,
    pub median: f64,
    pub values: Vec<f64>,
}

/// Fits the l1-constrained joint minimizer on double-logistic samples of
/// each size and reports the median Monte-Carlo excess risk.
pub fn excess_risk_sweep(
    raw_features: usize,
    n_values: &[usize],
    repeats: usize,
    seed: u64,
    opts: &ExcessRiskOptions,
) -> Result<Vec<ExcessRiskRow>> {
    excess_risk_sweep_with(raw_features, n_values, repeats, seed, opts, |train, radius, r| {
        let cfg = MMConfig { l1_radius: Some(radius), ..opts.mm };
        Ok(minimize_joint_constrained(train, &cfg, opts.restarts, r)?.theta)
    })
}

/// [`excess_risk_sweep`] with a caller-supplied estimator. The closure gets
/// the training sample, the schedule radius and a seed.
pub fn excess_risk_sweep_with<F>(
    raw_features: usize,
    n_values: &[usize],
    repeats: usize,
    seed: u64,
    opts: &ExcessRiskOptions,
    estimator: F,
) -> Result<Vec<ExcessRiskRow>>
where
    F: Fn(&PUDataset, f64, u64) -> Result<Theta> + Sync,
{
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sample sizes must be increasing".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    let truth = DoubleLogistic::reference(raw_features);
    let mc_seed = derive_seed(seed, u64::MAX);
    let dim = raw_features + 1;

    let mut rows = Vec::with_capacity(n_values.len());
    for (k, &n) in n_values.iter().enumerate() {
        let radius = consistency_radius(n, dim, opts.radius_scale, opts.eta)?;
        let values = (0..repeats)
            .into_par_iter()
            .map(|r| {
                let stream = derive_seed(seed, (k * repeats + r) as u64);
                let train = truth.sample(n, stream)?;
                let theta = estimator(&train, radius, stream)?;
                estimate_excess_risk(&theta, &truth.theta, &truth, opts.mc_size, mc_seed)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(ExcessRiskRow { n, radius, median: median(&values), values });
    }
    Ok(rows)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Header of the per-table csv files.
pub const REPORT_HEADER: &str = "dataset,strategy,c,method,mean,sd,repeats";

pub fn reports_to_csv(rows: &[ReportSummary]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dataset, r.strategy, r.c, r.method, r.mean, r.sd, r.repeats
        ));
    }
    out
}

/// Reads a report table, including ones produced elsewhere for methods
/// this crate does not implement.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportSummary>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != REPORT_HEADER {
        return Err(Error::Csv(format!("expected header `{REPORT_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        let cell = |j: usize| record.get(j).unwrap_or("");
        let real = |j: usize| -> Result<f64> {
            cell(j).parse().map_err(|_| Error::Cell {
                row,
                column: header[j].clone(),
                message: format!("`{}` is not a number", cell(j)),
            })
        };
        let strategy = cell(1).parse().map_err(|_| Error::Cell {
            row,
            column: "strategy".into(),
            message: format!("unknown strategy `{}`", cell(1)),
        })?;
        let repeats = cell(6).parse().map_err(|_| Error::Cell {
            row,
            column: "repeats".into(),
            message: format!("`{}` is not a count", cell(6)),
        })?;
        if let Some(j) = [0, 3].into_iter().find(|&j| cell(j).contains([',', '"', '\n', '\r'])) {
            return Err(Error::Cell {
                row,
                column: header[j].clone(),
                message: format!("`{}` may not contain commas, quotes or line breaks", cell(j)),
            });
        }
        rows.push(ReportSummary {
            dataset: cell(0).to_owned(),
            strategy,
            c: real(2)?,
            method: cell(3).to_owned(),
            mean: real(4)?,
            sd: real(5)?,
            repeats,
        });
    }
    Ok(rows)
}

/// Fraction of rows on which two probability vectors give the same decision.
pub fn decision_agreement(a: &[f64], b: &[f64]) -> f64 {
    let same = decisions(a)
        .iter()
        .zip(decisions(b))
        .filter(|(x, y)| **x == *y)
        .count();
    same as f64 / a.len().max(1) as f64
}

/// Probabilities of `model` on `rows`.
pub fn predict(model: &LinearModel, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    model.predict_proba(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(method: &str, mean: f64, sd: f64) -> ReportSummary {
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

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 1, 1, 1], &[1, 0, 1, 0]).unwrap(), 0.5);
        // TPR 2/3, TNR 1/2
        let ba = balanced_accuracy(&[1, 1, 0, 0, 1], &[1, 1, 1, 0, 0]).unwrap();
        assert!((ba - 7.0 / 12.0).abs() < 1e-15);
        assert!(balanced_accuracy(&[1, 0], &[1, 1]).is_err());
        assert!(balanced_accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn comparison_rules() {
        let v = compare(&summary("a", 0.9, 0.01), &summary("b", 0.8, 0.01));
        assert_eq!(v.verdict, Verdict::Win);
        assert_eq!(compare(&summary("b", 0.8, 0.01), &summary("a", 0.9, 0.01)).verdict, Verdict::Loss);
        assert_eq!(compare(&summary("a", 0.9, 0.1), &summary("b", 0.85, 0.1)).verdict, Verdict::Draw);
        assert_eq!(compare(&summary("a", 0.7, 0.0), &summary("b", 0.7, 0.0)).verdict, Verdict::Draw);
    }

    #[test]
    fn sd_and_median() {
        assert_eq!(sample_sd(&[0.9]), 0.0);
        assert!((sample_sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn report_csv_roundtrip() {
        let rows = vec![summary("jerm", 0.984, 0.006), summary("lbe", 0.97, 0.016)];
        let text = reports_to_csv(&rows);
        assert_eq!(parse_report_csv(&text).unwrap(), rows);
        assert!(parse_report_csv("a,b\n1,2\n").is_err());
        assert!(parse_report_csv(&format!("{REPORT_HEADER}\nd,s9,0.5,x,1,0,1\n")).is_err());
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("lbe".parse::<Method>().is_err());
    }
}
