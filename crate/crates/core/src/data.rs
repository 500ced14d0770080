//! Observations, covariate schemas and delimited-text ingestion.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REQUIRED_COLUMNS: [&str; 5] = ["y", "delta1", "delta2", "z", "w"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("row {row}: nonpositive follow-up time {y}")]
    NonPositiveTime { row: usize, y: f64 },

    #[error("row {row}: `{column}` must be 0 or 1, got {value}")]
    NotBinary { row: usize, column: String, value: f64 },

    #[error("row {row}: delta1 and delta2 are both 1")]
    BothIndicators { row: usize },

    #[error("row {row}: expected {expected} covariates, found {got}")]
    Width { row: usize, expected: usize, got: usize },

    #[error("dataset is empty")]
    Empty,

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("covariate `{0}` is not continuous")]
    NotContinuous(String),

    #[error("covariate `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    Discrete,
}

/// Names and kinds of the covariate columns, in dataset order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub names: Vec<String>,
    pub kinds: Vec<CovariateKind>,
}

impl CovariateSchema {
    pub fn new(names: Vec<String>, kinds: Vec<CovariateKind>) -> Result<Self, DataError> {
        if names.len() != kinds.len() {
            return Err(DataError::Schema(format!(
                "{} names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(DataError::Schema("empty covariate name".into()));
            }
            if REQUIRED_COLUMNS.contains(&n.as_str()) {
                return Err(DataError::Schema(format!("`{n}` is a reserved column")));
            }
            if !seen.insert(n.as_str()) {
                return Err(DataError::Schema(format!("duplicate covariate `{n}`")));
            }
        }
        Ok(Self { names, kinds })
    }

    /// Total covariate count `m`.
    pub fn m(&self) -> usize {
        self.names.len()
    }

    /// Number of continuous covariates `m_c`.
    pub fn m_c(&self) -> usize {
        self.kinds.iter().filter(|k| **k == CovariateKind::Continuous).count()
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.indices_of(CovariateKind::Continuous)
    }

    pub fn discrete_indices(&self) -> Vec<usize> {
        self.indices_of(CovariateKind::Discrete)
    }

    fn indices_of(&self, kind: CovariateKind) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.kinds[j] == kind).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Parses `"x1:discrete,x2:continuous"`. A bare name is continuous.
impl FromStr for CovariateSchema {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        let mut names = Vec::new();
        let mut kinds = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (name, kind) = match item.split_once(':') {
                Some((n, k)) => (n.trim(), k.trim().to_ascii_lowercase()),
                None => (item, "continuous".to_string()),
            };
            let kind = match kind.as_str() {
                "continuous" | "c" => CovariateKind::Continuous,
                "discrete" | "d" => CovariateKind::Discrete,
                other => return Err(DataError::Schema(format!("unknown covariate kind `{other}`"))),
            };
            names.push(name.to_string());
            kinds.push(kind);
        }
        CovariateSchema::new(names, kinds)
    }
}

impl fmt::Display for CovariateSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .names
            .iter()
            .zip(&self.kinds)
            .map(|(n, k)| {
                let k = match k {
                    CovariateKind::Continuous => "continuous",
                    CovariateKind::Discrete => "discrete",
                };
                format!("{n}:{k}")
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// One record `(Y, Δ1, Δ2, Z, W, X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    pub delta1: bool,
    pub delta2: bool,
    pub z: bool,
    pub w: bool,
    pub x: Vec<f64>,
}

impl Observation {
    /// Neither event nor dependent censoring: administratively censored.
    pub fn is_admin_censored(&self) -> bool {
        !self.delta1 && !self.delta2
    }

    fn validate(&self, row: usize, m: usize) -> Result<(), DataError> {
        if !(self.y > 0.0) || !self.y.is_finite() {
            return Err(DataError::NonPositiveTime { row, y: self.y });
        }
        if self.delta1 && self.delta2 {
            return Err(DataError::BothIndicators { row });
        }
        if self.x.len() != m {
            return Err(DataError::Width {
                row,
                expected: m,
                got: self.x.len(),
            });
        }
        if let Some(j) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(DataError::MissingValue {
                row,
                column: format!("covariate {j}"),
            });
        }
        Ok(())
    }
}

/// An immutable, validated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    observations: Vec<Observation>,
    schema: CovariateSchema,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>, schema: CovariateSchema) -> Result<Self, DataError> {
        if observations.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, o) in observations.iter().enumerate() {
            o.validate(i + 1, schema.m())?;
        }
        Ok(Self { observations, schema })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn into_parts(self) -> (Vec<Observation>, CovariateSchema) {
        (self.observations, self.schema)
    }

    /// Rows at `indices`, repeats allowed (bootstrap resamples).
    pub fn select(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let obs = indices.iter().map(|&i| self.observations[i].clone()).collect();
        Dataset::new(obs, self.schema.clone())
    }

    pub fn max_y(&self) -> f64 {
        self.observations.iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn parse_cell(
    rec: &csv::StringRecord,
    idx: usize,
    row: usize,
    column: &str,
) -> Result<f64, DataError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Err(DataError::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    raw.parse::<f64>().map_err(|_| DataError::NonNumeric {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn parse_flag(rec: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<bool, DataError> {
    let v = parse_cell(rec, idx, row, column)?;
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(DataError::NotBinary {
            row,
            column: column.to_string(),
            value: v,
        })
    }
}

/// Reads a comma-separated file with a header row. Columns are located by
/// name; unknown extra columns are ignored. Row numbers in errors count data
/// rows from 1.
pub fn load_dataset<R: Read>(source: R, schema: &CovariateSchema) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let core: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
    let cov: Vec<usize> = schema.names.iter().map(|c| find(c)).collect::<Result<_, _>>()?;

    let mut observations = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let y = parse_cell(&rec, core[0], row, "y")?;
        let delta1 = parse_flag(&rec, core[1], row, "delta1")?;
        let delta2 = parse_flag(&rec, core[2], row, "delta2")?;
        let z = parse_flag(&rec, core[3], row, "z")?;
        let w = parse_flag(&rec, core[4], row, "w")?;
        let x = cov
            .iter()
            .zip(&schema.names)
            .map(|(&j, name)| parse_cell(&rec, j, row, name))
            .collect::<Result<Vec<_>, _>>()?;
        let o = Observation { y, delta1, delta2, z, w, x };
        o.validate(row, schema.m())?;
        observations.push(o);
    }
    Dataset::new(observations, schema.clone())
}

/// Reads only the header and infers a schema from the covariate columns:
/// integer-valued columns with at most `max_levels` distinct values are
/// discrete, everything else is continuous.
pub fn infer_schema<R: Read>(source: R, max_levels: usize) -> Result<CovariateSchema, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !REQUIRED_COLUMNS.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let mut levels: Vec<HashSet<i64>> = vec![HashSet::new(); cols.len()];
    let mut integral = vec![true; cols.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (k, (j, name)) in cols.iter().enumerate() {
            if !integral[k] {
                continue;
            }
            let v = parse_cell(&rec, *j, i + 1, name)?;
            if v.fract() != 0.0 || levels[k].len() > max_levels {
                integral[k] = false;
            } else {
                levels[k].insert(v as i64);
            }
        }
    }
    let kinds = (0..cols.len())
        .map(|k| {
            if integral[k] && levels[k].len() <= max_levels {
                CovariateKind::Discrete
            } else {
                CovariateKind::Continuous
            }
        })
        .collect();
    CovariateSchema::new(cols.into_iter().map(|(_, n)| n).collect(), kinds)
}

/// Writes the dataset in the format read by [`load_dataset`]. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_dataset<W: Write>(dataset: &Dataset, sink: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(dataset.schema.names.iter().map(String::as_str));
    wtr.write_record(&header)?;
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for o in &dataset.observations {
        let mut rec = vec![o.y.to_string(), flag(o.delta1), flag(o.delta2), flag(o.z), flag(o.w)];
        rec.extend(o.x.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(())
}

/// Outcome of [`check_full_rank`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub full_rank: bool,
    /// Singular values of the covariance matrix of `(Z, X)`, descending.
    pub singular_values: Vec<f64>,
    /// Smallest over largest singular value.
    pub ratio: f64,
}

/// Whether the sample covariance of `(Z, X)` is numerically nonsingular
/// (smallest singular value above `1e-10` times the largest).
pub fn check_full_rank(dataset: &Dataset) -> RankDiagnostic {
    let n = dataset.n();
    let p = dataset.schema.m() + 1;
    let data = DMatrix::from_fn(n, p, |i, j| {
        let o = &dataset.observations[i];
        if j == 0 {
            f64::from(u8::from(o.z))
        } else {
            o.x[j - 1]
        }
    });
    let means = data.row_mean();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let denom = (n as f64 - 1.0).max(1.0);
    let cov = centered.transpose() * &centered / denom;
    let mut sv: Vec<f64> = cov.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    RankDiagnostic {
        full_rank: largest > 0.0 && smallest > 1e-10 * largest,
        singular_values: sv,
        ratio,
    }
}

/// Returns a copy with `column` rescaled to sample mean 0 and sample
/// standard deviation 1 (`n - 1` denominator).
pub fn standardize_column(dataset: &Dataset, column: &str) -> Result<Dataset, DataError> {
    let j = dataset
        .schema
        .index_of(column)
        .ok_or_else(|| DataError::UnknownCovariate(column.to_string()))?;
    if dataset.schema.kinds[j] != CovariateKind::Continuous {
        return Err(DataError::NotContinuous(column.to_string()));
    }
    let vals: Vec<f64> = dataset.observations.iter().map(|o| o.x[j]).collect();
    let mean = crate::numeric::mean(&vals);
    let sd = crate::numeric::sample_sd(&vals);
    if !(sd > 0.0) {
        return Err(DataError::ZeroVariance(column.to_string()));
    }
    let mut out = dataset.clone();
    for o in &mut out.observations {
        o.x[j] = (o.x[j] - mean) / sd;
    }
    Ok(out)
}
