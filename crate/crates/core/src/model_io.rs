//! Plain-text model files.
//!
//! ```text
//! pu-jerm-model 1
//! method jerm
//! features x1,x2
//! mean 0.1,-2
//! sd 1,0.5
//! beta 0.3,-1.2,0.05
//! gamma 0.8,0.1,1.5
//! config_digest 9f2c...
//! ```
//!
//! `beta` and `gamma` carry one weight per feature followed by the
//! intercept. `gamma` is optional. Blank lines and lines starting with `#`
//! are ignored.

use nalgebra::{DMatrix, DVector};

use crate::data::{add_intercept, PUDataset, Standardizer};
use crate::error::{Error, Result};
use crate::glm::sigmoid;

pub const MAGIC: &str = "pu-jerm-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub method: String,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub beta: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub config_digest: String,
}

impl StoredModel {
    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    fn validate(&self) -> Result<()> {
        let p = self.p();
        let check = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Model {
                    line: 0,
                    message: format!("{what} has {got} entries, expected {want}"),
                })
            }
        };
        check("mean", self.standardizer.means.len(), p)?;
        check("sd", self.standardizer.sds.len(), p)?;
        check("beta", self.beta.len(), p + 1)?;
        if let Some(g) = &self.gamma {
            check("gamma", g.len(), p + 1)?;
        }
        if self.method.is_empty() || self.method.contains(char::is_whitespace) {
            return Err(Error::Model { line: 0, message: "bad method name".into() });
        }
        if self.feature_names.iter().any(|n| n.contains(',') || n.contains('\n')) {
            return Err(Error::Model { line: 0, message: "feature names may not contain , or newlines".into() });
        }
        Ok(())
    }

    /// Posterior probabilities for raw (untransformed) feature rows.
    pub fn predict(&self, data: &PUDataset) -> Result<Vec<f64>> {
        if data.intercept_added() {
            return Err(Error::InvalidArgument("pass raw features without an intercept".into()));
        }
        if data.p() != self.p() {
            return Err(Error::Dimension { expected: self.p(), got: data.p() });
        }
        let x = add_intercept(&self.standardizer.apply(data)?)?;
        let w = DVector::from_column_slice(&self.beta);
        Ok(score(x.features(), &w))
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut out = format!("{MAGIC} {VERSION}\n");
        out.push_str(&format!("method {}\n", self.method));
        out.push_str(&format!("features {}\n", self.feature_names.join(",")));
        out.push_str(&format!("mean {}\n", join(&self.standardizer.means)));
        out.push_str(&format!("sd {}\n", join(&self.standardizer.sds)));
        out.push_str(&format!("beta {}\n", join(&self.beta)));
        if let Some(g) = &self.gamma {
            out.push_str(&format!("gamma {}\n", join(g)));
        }
        out.push_str(&format!("config_digest {}\n", self.config_digest));
        Ok(out)
    }
}

fn score(x: &DMatrix<f64>, w: &DVector<f64>) -> Vec<f64> {
    (x * w).iter().map(|&z| sigmoid(z)).collect()
}

fn parse_reals(value: &str, line: usize) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| Error::Model {
                line,
                message: format!("`{t}` is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Model { line, message: format!("non-finite value `{t}`") })
            }
        })
        .collect()
}

pub fn parse_model(text: &str) -> Result<StoredModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (first, header) = lines
        .next()
        .ok_or(Error::Model { line: 0, message: "empty model file".into() })?;
    match header.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
        _ => {
            return Err(Error::Model {
                line: first,
                message: format!("expected `{MAGIC} {VERSION}`"),
            })
        }
    }

    let mut method = None;
    let mut names = None;
    let mut means = None;
    let mut sds = None;
    let mut beta = None;
    let mut gamma = None;
    let mut digest = None;
    for (line, l) in lines {
        let (key, value) = l.split_once(' ').map_or((l, ""), |(k, v)| (k, v.trim()));
        let slot_taken = || Error::Model { line, message: format!("duplicate key `{key}`") };
        match key {
            "method" => {
                if method.replace(value.to_owned()).is_some() {
                    return Err(slot_taken());
                }
            }
            "features" => {
                let v: Vec<String> = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| s.trim().to_owned()).collect()
                };
                if names.replace(v).is_some() {
                    return Err(slot_taken());
                }
            }
            "mean" => {
                if means.replace(parse_reals(value, line)?).is_some() {
                    return Err(slot_taken());
                }
            }
            "sd" => {
                let v = parse_reals(value, line)?;
                if v.iter().any(|&s| s < 0.0) {
                    return Err(Error::Model { line, message: "negative sd".into() });
                }
                if sds.replace(v).is_some() {
                    return Err(slot_taken());
                }
            }
            "beta" => {
                if beta.replace(parse_reals(value, line)?).is_some() {
                    return Err(slot_taken());
                }
            }
            "gamma" => {
                if gamma.replace(parse_reals(value, line)?).is_some() {
                    return Err(slot_taken());
                }
            }
            "config_digest" => {
                if digest.replace(value.to_owned()).is_some() {
                    return Err(slot_taken());
                }
            }
            other => {
                return Err(Error::Model { line, message: format!("unknown key `{other}`") });
            }
        }
    }
    let missing = |key: &str| Error::Model { line: 0, message: format!("missing `{key}`") };
    let model = StoredModel {
        method: method.ok_or_else(|| missing("method"))?,
        feature_names: names.ok_or_else(|| missing("features"))?,
        standardizer: Standardizer {
            means: means.ok_or_else(|| missing("mean"))?,
            sds: sds.ok_or_else(|| missing("sd"))?,
        },
        beta: beta.ok_or_else(|| missing("beta"))?,
        gamma,
        config_digest: digest.unwrap_or_default(),
    };
    model.validate()?;
    Ok(model)
}

pub fn load_model(path: &std::path::Path) -> Result<StoredModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

pub fn save_model(model: &StoredModel, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model.to_text()?).map_err(|e| Error::io(path, e))
}
