//! Dataset representation, CSV ingestion, standardization and splitting.
//!
//! A [`PUDataset`] holds the feature matrix together with the observed
//! label indicator `s` and, for simulated or benchmark data, the hidden
//! true class `y_hidden`. Rows are never reordered by any operation in this
//! module except [`split`], which keeps the original order inside each part.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column name used for the observed label indicator in PU csv files.
pub const OBSERVED_COLUMN: &str = "s";
/// Column name used for the hidden true class in PU csv files.
pub const HIDDEN_COLUMN: &str = "y_hidden";
const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq)]
pub struct PUDataset {
    features: DMatrix<f64>,
    feature_names: Vec<String>,
    s: Vec<u8>,
    y_hidden: Option<Vec<u8>>,
    intercept_added: bool,
}

impl PUDataset {
    /// Builds a dataset and checks its invariants: matching lengths, finite
    /// features, binary indicators and `s = 1 => y = 1`.
    pub fn new(features: DMatrix<f64>, s: Vec<u8>, y_hidden: Option<Vec<u8>>) -> Result<Self> {
        let names = (0..features.ncols()).map(|j| format!("x{}", j + 1)).collect();
        Self::with_names(features, names, s, y_hidden)
    }

    pub fn with_names(
        features: DMatrix<f64>,
        feature_names: Vec<String>,
        s: Vec<u8>,
        y_hidden: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = features.nrows();
        if s.len() != n {
            return Err(Error::Dimension { expected: n, got: s.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Dimension {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        if let Some(y) = &y_hidden {
            if y.len() != n {
                return Err(Error::Dimension { expected: n, got: y.len() });
            }
            if let Some(i) = (0..n).find(|&i| s[i] == 1 && y[i] != 1) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} is labeled (s = 1) but its hidden class is negative"
                )));
            }
            if y.iter().any(|&v| v > 1) {
                return Err(Error::InvalidArgument("y_hidden must be binary".into()));
            }
        }
        if s.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("s must be binary".into()));
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at row {}, column {}",
                k % n.max(1),
                k / n.max(1)
            )));
        }
        Ok(Self {
            features,
            feature_names,
            s,
            y_hidden,
            intercept_added: false,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// Number of columns, including the intercept once it has been added.
    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn s(&self) -> &[u8] {
        &self.s
    }

    pub fn y_hidden(&self) -> Option<&[u8]> {
        self.y_hidden.as_deref()
    }

    pub fn intercept_added(&self) -> bool {
        self.intercept_added
    }

    /// Columns that carry real features, i.e. everything but the intercept.
    pub fn raw_feature_count(&self) -> usize {
        self.p() - usize::from(self.intercept_added)
    }

    pub fn labeled_count(&self) -> usize {
        self.s.iter().filter(|&&v| v == 1).count()
    }

    /// Replaces the observed labels. Fails if a label would contradict the
    /// hidden class.
    pub fn with_labels(mut self, s: Vec<u8>) -> Result<Self> {
        if s.len() != self.n() {
            return Err(Error::Dimension { expected: self.n(), got: s.len() });
        }
        if s.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument("s must be binary".into()));
        }
        if let Some(y) = &self.y_hidden {
            if s.iter().zip(y).any(|(&si, &yi)| si == 1 && yi != 1) {
                return Err(Error::InvalidArgument(
                    "labels must only mark hidden positives".into(),
                ));
            }
        }
        self.s = s;
        Ok(self)
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> PUDataset {
        PUDataset {
            features: self.features.select_rows(indices),
            feature_names: self.feature_names.clone(),
            s: indices.iter().map(|&i| self.s[i]).collect(),
            y_hidden: self
                .y_hidden
                .as_ref()
                .map(|y| indices.iter().map(|&i| y[i]).collect()),
            intercept_added: self.intercept_added,
        }
    }

    pub(crate) fn linear_scores(&self, weights: &DVector<f64>) -> Result<DVector<f64>> {
        if weights.len() != self.p() {
            return Err(Error::Dimension { expected: self.p(), got: weights.len() });
        }
        Ok(&self.features * weights)
    }
}

/// Which csv columns carry labels; every other column is a feature.
#[derive(Debug, Clone, Copy, Default)]
pub struct ColumnRoles<'a> {
    /// Hidden true class column (benchmark mode).
    pub label: Option<&'a str>,
    /// Observed label indicator column (already-simulated PU data).
    pub observed: Option<&'a str>,
}

impl<'a> ColumnRoles<'a> {
    /// Roles for files written by [`to_csv_string`]: `s` and, if present,
    /// `y_hidden`.
    pub fn pu_file() -> Self {
        Self {
            label: Some(HIDDEN_COLUMN),
            observed: Some(OBSERVED_COLUMN),
        }
    }
}

/// Parses csv text. Label columns named in `roles` that are absent from the
/// header are an error, except for the `y_hidden` column of PU files, which
/// is optional.
pub fn parse_csv(text: &str, roles: ColumnRoles<'_>) -> Result<PUDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Csv("empty header".into()));
    }

    let find = |name: &str| header.iter().position(|h| h == name);
    let pu_mode = roles.observed.is_some();
    let label_idx = match roles.label {
        Some(name) => match find(name) {
            Some(idx) => Some(idx),
            None if pu_mode => None,
            None => return Err(Error::Csv(format!("label column `{name}` not found"))),
        },
        None => None,
    };
    let observed_idx = match roles.observed {
        Some(name) => Some(
            find(name).ok_or_else(|| Error::Csv(format!("label column `{name}` not found")))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != label_idx && Some(j) != observed_idx)
        .collect();
    for &j in &feature_idx {
        let name = &header[j];
        if name == OBSERVED_COLUMN || name == HIDDEN_COLUMN || name.contains([',', '"', '\n', '\r']) {
            return Err(Error::Csv(format!("feature column name `{name}` is not allowed")));
        }
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut observed = Vec::new();
    let mut rows = 0usize;
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        for &j in &feature_idx {
            values.push(parse_real(record.get(j).unwrap_or(""), row, &header[j])?);
        }
        if let Some(j) = label_idx {
            labels.push(parse_binary(record.get(j).unwrap_or(""), row, &header[j])?);
        }
        if let Some(j) = observed_idx {
            observed.push(parse_binary(record.get(j).unwrap_or(""), row, &header[j])?);
        }
        rows = row;
    }
    if rows == 0 {
        return Err(Error::Csv("no data rows".into()));
    }

    let features = DMatrix::from_row_slice(rows, feature_idx.len(), &values);
    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let s = if observed_idx.is_some() {
        observed
    } else {
        vec![0; rows]
    };
    let y = label_idx.map(|_| labels);
    PUDataset::with_names(features, names, s, y)
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Cell {
        row,
        column: column.to_owned(),
        message: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Cell {
            row,
            column: column.to_owned(),
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}

fn parse_binary(cell: &str, row: usize, column: &str) -> Result<u8> {
    match cell.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::Cell {
            row,
            column: column.to_owned(),
            message: format!("label `{cell}` is not 0 or 1"),
        }),
    }
}

/// Loads a csv file. `label_column` of `None` (or `"none"`) loads features
/// only; otherwise that column becomes `y_hidden` and `s` starts all-zero.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<PUDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = label_column.filter(|l| !l.eq_ignore_ascii_case("none"));
    parse_csv(&text, ColumnRoles { label, observed: None })
}

/// Loads a PU csv with an `s` column and an optional `y_hidden` column.
pub fn load_pu_csv(path: impl AsRef<Path>) -> Result<PUDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, ColumnRoles::pu_file())
}

/// Serializes features, `s` and (if present) `y_hidden`. The intercept
/// column is not written. Floats use the shortest representation that
/// parses back to the same bits.
pub fn to_csv_string(data: &PUDataset) -> String {
    let p = data.raw_feature_count();
    let mut out = String::new();
    let mut header: Vec<&str> = data.feature_names[..p].iter().map(String::as_str).collect();
    header.push(OBSERVED_COLUMN);
    if data.y_hidden.is_some() {
        header.push(HIDDEN_COLUMN);
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.n() {
        for j in 0..p {
            let _ = write!(out, "{},", data.features[(i, j)]);
        }
        let _ = write!(out, "{}", data.s[i]);
        if let Some(y) = &data.y_hidden {
            let _ = write!(out, ",{}", y[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(data: &PUDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(data)).map_err(|e| Error::io(path, e))
}

/// Per-column centering and scaling learned on one dataset and applied to
/// others. Standard deviations use the population divisor `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &PUDataset) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "standardization needs at least 2 rows".into(),
            ));
        }
        let p = data.raw_feature_count();
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        for j in 0..p {
            let col = data.features.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            means.push(mean);
            sds.push(var.sqrt());
        }
        Ok(Self { means, sds })
    }

    /// Applies the transform to the non-intercept columns. Columns that were
    /// constant at fit time are only centered.
    pub fn apply(&self, data: &PUDataset) -> Result<PUDataset> {
        let p = data.raw_feature_count();
        if p != self.means.len() {
            return Err(Error::Dimension { expected: self.means.len(), got: p });
        }
        let mut out = data.clone();
        for j in 0..p {
            let (mean, sd) = (self.means[j], self.sds[j]);
            let scale = if sd > 0.0 { sd } else { 1.0 };
            out.features
                .column_mut(j)
                .apply(|v| *v = (*v - mean) / scale);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, sd))| (v - m) / if *sd > 0.0 { *sd } else { 1.0 })
            .collect()
    }
}

/// Standardizes every feature column to mean 0 and standard deviation 1
/// (population divisor). Returns the transform for reuse on test data.
pub fn standardize(data: &PUDataset) -> Result<(PUDataset, Standardizer)> {
    let transform = Standardizer::fit(data)?;
    let out = transform.apply(data)?;
    Ok((out, transform))
}

/// Appends a constant-1 column.
pub fn add_intercept(data: &PUDataset) -> Result<PUDataset> {
    if data.intercept_added {
        return Err(Error::InterceptAlreadyAdded);
    }
    let n = data.n();
    let p = data.p();
    let mut out = data.clone();
    out.features = data.features.clone().insert_column(p, 1.0);
    debug_assert_eq!(out.features.nrows(), n);
    out.feature_names.push(INTERCEPT_NAME.to_owned());
    out.intercept_added = true;
    Ok(out)
}

/// Declares an existing all-ones last column to be the intercept.
pub(crate) fn mark_intercept(mut data: PUDataset) -> Result<PUDataset> {
    if data.intercept_added {
        return Err(Error::InterceptAlreadyAdded);
    }
    let p = data.p();
    if p == 0 || data.features.column(p - 1).iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidArgument("last column is not constant 1".into()));
    }
    data.feature_names[p - 1] = INTERCEPT_NAME.to_owned();
    data.intercept_added = true;
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub repeat_index: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, repeat_index: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {train_fraction} is not in (0, 1)"
            )));
        }
        Ok(Self { train_fraction, seed, repeat_index })
    }
}

/// Derives an independent stream seed from a base seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index sets of a train/test partition, each sorted ascending.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 4 rows, got {n}"
        )));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {} is not in (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, spec.repeat_index));
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(data: &PUDataset, spec: &SplitSpec) -> Result<(PUDataset, PUDataset)> {
    let (train, test) = split_indices(data.n(), spec)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}
