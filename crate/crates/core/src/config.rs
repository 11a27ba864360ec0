//! Benchmark configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! repeats = 10
//! train_fraction = 0.75
//! methods = ["naive", "oracle", "jerm"]
//! external_reports = ["lbe.csv"]
//!
//! [[dataset]]
//! name = "breast-w"
//! path = "data/breast_w.csv"
//! label = "class"
//! strategies = ["s1", "s2", "s3", "s4"]
//! c = [0.3, 0.5, 0.7]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bench::Method;
use crate::error::{Error, Result};
use crate::scenarios::Strategy;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default = "default_train_fraction")]
    train_fraction: f64,
    #[serde(default = "default_methods")]
    methods: Vec<String>,
    #[serde(default)]
    external_reports: Vec<PathBuf>,
    #[serde(default)]
    dataset: Vec<RawDataset>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    path: PathBuf,
    label: String,
    strategies: Vec<String>,
    c: Vec<f64>,
}

fn default_repeats() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.75
}

fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(Method::to_string).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub label: String,
    pub strategies: Vec<Strategy>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub repeats: usize,
    pub train_fraction: f64,
    pub methods: Vec<Method>,
    pub external_reports: Vec<PathBuf>,
    pub datasets: Vec<DatasetEntry>,
    /// Hex SHA-256 of the source text.
    pub digest: String,
}

pub fn digest_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parses a configuration; relative paths stay relative.
pub fn parse_config(text: &str) -> Result<BenchmarkConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if raw.repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    if !(raw.train_fraction > 0.0 && raw.train_fraction < 1.0) {
        return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
    }
    let methods = raw
        .methods
        .iter()
        .map(|m| m.parse().map_err(|_| Error::Config(format!("unknown method `{m}`"))))
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods listed".into()));
    }
    let mut datasets = Vec::with_capacity(raw.dataset.len());
    for d in raw.dataset {
        if d.name.is_empty() || d.name.contains(['/', '\\', ',']) {
            return Err(Error::Config(format!("bad dataset name `{}`", d.name)));
        }
        if datasets.iter().any(|e: &DatasetEntry| e.name == d.name) {
            return Err(Error::Config(format!("duplicate dataset `{}`", d.name)));
        }
        let strategies = d
            .strategies
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Config(format!("unknown strategy `{s}`"))))
            .collect::<Result<Vec<Strategy>>>()?;
        if strategies.is_empty() || d.c.is_empty() {
            return Err(Error::Config(format!("dataset `{}` has no scenarios", d.name)));
        }
        if let Some(c) = d.c.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::Config(format!("label frequency {c} is outside (0, 1)")));
        }
        datasets.push(DatasetEntry {
            name: d.name,
            path: d.path,
            label: d.label,
            strategies,
            c: d.c,
        });
    }
    Ok(BenchmarkConfig {
        seed: raw.seed,
        repeats: raw.repeats,
        train_fraction: raw.train_fraction,
        methods,
        external_reports: raw.external_reports,
        datasets,
        digest: digest_hex(text),
    })
}

/// Reads a configuration file and resolves its relative paths.
pub fn load_config(path: &Path) -> Result<BenchmarkConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for d in &mut cfg.datasets {
        if d.path.is_relative() {
            d.path = base.join(&d.path);
        }
    }
    for r in &mut cfg.external_reports {
        if r.is_relative() {
            *r = base.join(&*r);
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
repeats = 3
methods = ["naive", "jerm"]

[[dataset]]
name = "toy"
path = "toy.csv"
label = "y"
strategies = ["s1", "S4"]
c = [0.3, 0.7]
"#;

    #[test]
    fn parses_example() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.repeats, 3);
        assert_eq!(cfg.train_fraction, 0.75);
        assert_eq!(cfg.methods, vec![Method::Naive, Method::Jerm]);
        assert_eq!(cfg.datasets[0].strategies, vec![Strategy::S1, Strategy::S4]);
        assert_eq!(cfg.digest.len(), 64);
        assert_eq!(cfg.digest, digest_hex(EXAMPLE));
    }

    #[test]
    fn defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.repeats, 10);
        assert_eq!(cfg.methods, Method::ALL.to_vec());
        assert!(cfg.datasets.is_empty());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_config("repeats = 0").is_err());
        assert!(parse_config("train_fraction = 1.0").is_err());
        assert!(parse_config("methods = [\"lbe\"]").is_err());
        assert!(parse_config("colour = 1").is_err());
        assert!(parse_config(&EXAMPLE.replace("0.7", "1.0")).is_err());
        assert!(parse_config(&EXAMPLE.replace("\"s1\"", "\"s5\"")).is_err());
        let twice = format!("{EXAMPLE}{}", &EXAMPLE[EXAMPLE.find("[[").unwrap()..]);
        assert!(parse_config(&twice).is_err());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            digest_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
