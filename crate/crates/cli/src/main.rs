use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use pu_jerm::bench::{
    self, compare, excess_risk_sweep, parse_report_csv, reports_to_csv, ExcessRiskOptions,
    ExperimentOptions, ExperimentReport, Method, ReportSummary,
};
use pu_jerm::config::{digest_hex, load_config, BenchmarkConfig};
use pu_jerm::data::{
    add_intercept, load_csv, parse_csv, standardize, to_csv_string, ColumnRoles, PUDataset,
    HIDDEN_COLUMN, OBSERVED_COLUMN,
};
use pu_jerm::jerm::JermConfig;
use pu_jerm::model_io::{load_model, save_model, StoredModel};
use pu_jerm::scenarios::{apply_labels, ScenarioSpec, Strategy};

#[derive(Parser)]
#[command(name = "pu-jerm", version, about = "Positive-unlabeled learning with instance-dependent propensity")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hide labels of a fully labeled csv under a labeling scenario.
    SimulateLabels {
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Column holding the true class.
        #[arg(long, default_value = "class")]
        label: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on a PU csv (columns: features, s, optional y_hidden).
    Fit {
        #[arg(long, default_value = "jerm")]
        method: Method,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score rows with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every scenario listed in a config file.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Monte-Carlo excess risk of the constrained joint minimizer.
    ExcessRisk {
        #[arg(long)]
        p: usize,
        /// Comma-separated increasing sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        mc_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::SimulateLabels { strategy, c, seed, label, input, out } => {
            simulate_labels(strategy, c, seed, &label, &input, &out)
        }
        Command::Fit { method, input, model_out } => fit(method, &input, &model_out),
        Command::Predict { model, input, out } => predict(&model, &input, &out),
        Command::Benchmark { config, out_dir } => benchmark(&config, &out_dir),
        Command::ExcessRisk { p, n_list, repeats, seed, mc_size, out } => {
            let opts = ExcessRiskOptions { mc_size, ..ExcessRiskOptions::default() };
            let rows = excess_risk_sweep(p, &n_list, repeats, seed, &opts)?;
            let mut text = String::from("n,radius,median,mean,sd\n");
            for r in rows {
                let mean = r.values.iter().sum::<f64>() / r.values.len() as f64;
                let sd = bench::sample_sd(&r.values);
                text.push_str(&format!("{},{},{},{},{}\n", r.n, r.radius, r.median, mean, sd));
            }
            write(&out, &text)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate_labels(strategy: Strategy, c: f64, seed: u64, label: &str, input: &Path, out: &Path) -> Result<()> {
    let raw = load_csv(input, Some(label))?;
    // Scenario scores are computed on a standardized copy.
    let (work, _) = standardize(&raw)?;
    let work = add_intercept(&work)?;
    let spec = ScenarioSpec::prepare(&work, strategy, c, seed)?;
    let labeled = apply_labels(&work, &spec, seed)?;
    let result = raw.with_labels(labeled.s().to_vec())?;
    eprintln!(
        "labeled {} of {} positives",
        result.labeled_count(),
        result.y_hidden().map_or(0, |y| y.iter().filter(|&&v| v == 1).count())
    );
    write(out, &to_csv_string(&result))
}

fn fit(method: Method, input: &Path, model_out: &Path) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let raw = parse_csv(&text, ColumnRoles::pu_file())?;
    let (std, transform) = standardize(&raw)?;
    let train = add_intercept(&std)?;
    let cfg = JermConfig::default();
    let (beta, gamma) = match method {
        Method::Jerm => {
            let f = pu_jerm::jerm::fit(&train, &cfg)?;
            if !f.converged {
                log::warn!("alternation stopped after {} passes without converging", f.alternations);
            }
            (f.theta.beta, Some(f.theta.gamma))
        }
        Method::Naive => (bench::fit_naive(&train)?.weights, None),
        Method::Oracle => (bench::fit_oracle(&train)?.weights, None),
    };
    let model = StoredModel {
        method: method.to_string(),
        feature_names: raw.feature_names().to_vec(),
        standardizer: transform,
        beta: beta.iter().copied().collect(),
        gamma: gamma.map(|g| g.iter().copied().collect()),
        config_digest: digest_hex(&format!("{method} {cfg:?}")),
    };
    save_model(&model, model_out)?;
    Ok(())
}

/// Loads the model's feature columns from `input`, ignoring `s`/`y_hidden`.
fn load_features(text: &str, model: &StoredModel) -> Result<PUDataset> {
    let header = text.lines().next().unwrap_or("");
    let has = |name: &str| header.split(',').any(|h| h.trim() == name);
    let roles = if has(OBSERVED_COLUMN) { ColumnRoles::pu_file() } else { ColumnRoles::default() };
    let roles = if !has(OBSERVED_COLUMN) && has(HIDDEN_COLUMN) {
        ColumnRoles { label: Some(HIDDEN_COLUMN), observed: None }
    } else {
        roles
    };
    let data = parse_csv(text, roles)?;
    if data.feature_names() != model.feature_names.as_slice() {
        bail!(
            "feature columns {:?} do not match the model's {:?}",
            data.feature_names(),
            model.feature_names
        );
    }
    Ok(data)
}

fn predict(model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let data = load_features(&text, &model)?;
    let probs = model.predict(&data)?;
    let mut csv = String::from("y_prob,y_pred\n");
    for p in probs {
        csv.push_str(&format!("{},{}\n", p, u8::from(p > bench::DECISION_THRESHOLD)));
    }
    write(out, &csv)
}

fn c_key(c: f64) -> String {
    format!("{c}").replace('.', "p")
}

fn benchmark(config_path: &Path, out_dir: &Path) -> Result<()> {
    let cfg: BenchmarkConfig = load_config(config_path)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut datasets = BTreeMap::new();
    let mut dataset_digests = BTreeMap::new();
    for d in &cfg.datasets {
        let text = fs::read_to_string(&d.path).with_context(|| format!("reading {}", d.path.display()))?;
        let data = parse_csv(&text, ColumnRoles { label: Some(&d.label), observed: None })
            .with_context(|| format!("parsing {}", d.path.display()))?;
        dataset_digests.insert(d.name.clone(), digest_hex(&text));
        datasets.insert(d.name.clone(), data);
    }

    let cells: Vec<(&str, Strategy, f64)> = cfg
        .datasets
        .iter()
        .flat_map(|d| {
            d.strategies
                .iter()
                .flat_map(move |&s| d.c.iter().map(move |&c| (d.name.as_str(), s, c)))
        })
        .collect();
    let opts = ExperimentOptions {
        repeats: cfg.repeats,
        base_seed: cfg.seed,
        train_fraction: cfg.train_fraction,
        jerm: JermConfig::default(),
    };
    let results: Vec<Result<Vec<ExperimentReport>>> = cells
        .par_iter()
        .map(|&(name, strategy, c)| {
            bench::run_experiment(name, &datasets[name], strategy, c, &cfg.methods, &opts)
                .with_context(|| format!("{name} {strategy} c={c}"))
        })
        .collect();
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }

    let mut external = Vec::new();
    for path in &cfg.external_reports {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        external.extend(parse_report_csv(&text).with_context(|| format!("parsing {}", path.display()))?);
    }

    let mut tables: BTreeMap<(Strategy, String), Vec<ReportSummary>> = BTreeMap::new();
    for s in reports.iter().map(ExperimentReport::summary).chain(external) {
        tables.entry((s.strategy, c_key(s.c))).or_default().push(s);
    }
    let mut comparisons = String::from("dataset,strategy,c,first,second,verdict\n");
    let mut files = Vec::new();
    for ((strategy, c), rows) in &mut tables {
        rows.sort_by(|a, b| (&a.dataset, &a.method).cmp(&(&b.dataset, &b.method)));
        let name = format!("table_{strategy}_c{c}.csv");
        write(&out_dir.join(&name), &reports_to_csv(rows))?;
        files.push(name);
        for jerm in rows.iter().filter(|r| r.method == "jerm") {
            for other in rows.iter().filter(|r| r.dataset == jerm.dataset && r.method != "jerm") {
                let cell = compare(jerm, other);
                comparisons.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    jerm.dataset, strategy, jerm.c, cell.first, cell.second, cell.verdict
                ));
            }
        }
    }
    write(&out_dir.join("comparisons.csv"), &comparisons)?;

    let failed: Vec<_> = reports
        .iter()
        .filter(|r| !r.failed.is_empty())
        .map(|r| {
            json!({
                "dataset": r.dataset,
                "strategy": r.strategy.to_string(),
                "c": r.c,
                "method": r.method.to_string(),
                "repeats": r.failed,
            })
        })
        .collect();
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_path.display().to_string(),
        "config_sha256": cfg.digest,
        "dataset_sha256": dataset_digests,
        "seed": cfg.seed,
        "repeats": cfg.repeats,
        "train_fraction": cfg.train_fraction,
        "tables": files,
        "failed_repeats": failed,
    });
    write(&out_dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)
}
