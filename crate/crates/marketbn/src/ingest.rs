//! Loading, aligning, transforming and summarising raw continuous time
//! series (close prices, index levels, daily tweet counts).
//!
//! Tables are immutable after construction. Every cell carries an explicit
//! missing marker (`None`), which downstream learners receive untouched.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: cannot parse value")]
    ParseError { row: usize, column: String },
    #[error("column `{0}` not present in header")]
    MissingColumn(String),
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("a table needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("tables share no dates")]
    EmptyIntersection,
    #[error("column name `{0}` appears in more than one table")]
    DuplicateColumnName(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}`, row {row}: log return requires positive values")]
    NonPositiveValue { column: String, row: usize },
    #[error("column has no non-missing values")]
    AllMissing,
}

/// Per-column transform applied before discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Raw,
    FirstDifference,
    LogReturn,
}

/// Map of column name to transform; columns not named stay raw.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec(pub BTreeMap<String, Transform>);

impl TransformSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, transform: Transform) -> Self {
        self.0.insert(column.to_string(), transform);
        self
    }

    pub fn get(&self, column: &str) -> Transform {
        self.0.get(column).copied().unwrap_or_default()
    }
}

/// Dated, aligned multi-variable continuous observations.
///
/// Invariants: dates strictly increasing, every column exactly as long as
/// the date vector, and at least two rows (differencing needs a
/// predecessor).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    dates: Vec<NaiveDate>,
    columns: Vec<(String, Vec<Option<f64>>)>,
}

impl TimeSeriesTable {
    /// Builds a table from already-sorted rows; rejects invariant breaches.
    pub fn new(
        dates: Vec<NaiveDate>,
        columns: Vec<(String, Vec<Option<f64>>)>,
    ) -> Result<Self, IngestError> {
        if dates.len() < 2 {
            return Err(IngestError::TooFewRows(dates.len()));
        }
        for w in dates.windows(2) {
            if w[0] >= w[1] {
                return Err(IngestError::DuplicateDate(w[1]));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (name, values) in &columns {
            if !seen.insert(name.clone()) {
                return Err(IngestError::DuplicateColumnName(name.clone()));
            }
            assert_eq!(
                values.len(),
                dates.len(),
                "column `{name}` length mismatch"
            );
        }
        Ok(TimeSeriesTable { dates, columns })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>], IngestError> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| IngestError::UnknownColumn(name.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[Option<f64>])> {
        self.columns.iter().map(|(n, v)| (n.as_str(), v.as_slice()))
    }

    /// Canonical CSV: dates ascending, columns in declaration order,
    /// missing cells as empty fields.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (r, date) in self.dates.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for (_, values) in &self.columns {
                out.push(',');
                if let Some(v) = values[r] {
                    out.push_str(&format_value(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn format_value(v: f64) -> String {
    // Round-trippable shortest representation.
    let mut buf = ryu_style(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_style(v: f64) -> String {
    format!("{v}")
}

/// Alignment policy for merging tables with different calendars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum AlignPolicy {
    /// Keep only dates present in every table. Never fabricates values.
    Intersect,
    /// Keep the union of dates; fill a column's missing date with the most
    /// recent prior value when that value is at most `max_gap` days old.
    ForwardFill { max_gap: u32 },
}

/// Loads one CSV file with a date column and the requested value columns.
/// Rows come back sorted ascending by date; duplicate dates are rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    date_column: &str,
    value_columns: &[&str],
) -> Result<TimeSeriesTable, IngestError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(IngestError::FileNotFound(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col_pos = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let date_pos = col_pos(date_column)?;
    let value_pos: Vec<usize> = value_columns
        .iter()
        .map(|c| col_pos(c))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1; // 1-based data row
        let record = record?;
        let date_text = record.get(date_pos).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_text.trim(), "%Y-%m-%d").map_err(|_| {
            IngestError::ParseError {
                row,
                column: date_column.to_string(),
            }
        })?;
        let mut values = Vec::with_capacity(value_pos.len());
        for (&pos, &name) in value_pos.iter().zip(value_columns) {
            let text = record.get(pos).unwrap_or("").trim();
            if text.is_empty() {
                values.push(None);
            } else {
                let v: f64 = text.parse().map_err(|_| IngestError::ParseError {
                    row,
                    column: name.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(IngestError::ParseError {
                        row,
                        column: name.to_string(),
                    });
                }
                values.push(Some(v));
            }
        }
        rows.push((date, values));
    }

    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(IngestError::DuplicateDate(w[0].0));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let columns = value_columns
        .iter()
        .enumerate()
        .map(|(c, name)| {
            (
                name.to_string(),
                rows.iter().map(|(_, vs)| vs[c]).collect(),
            )
        })
        .collect();
    TimeSeriesTable::new(dates, columns)
}

/// Merges tables onto one calendar. Column names must be globally unique.
pub fn align(tables: &[TimeSeriesTable], policy: AlignPolicy) -> Result<TimeSeriesTable, IngestError> {
    assert!(!tables.is_empty(), "align needs at least one table");
    {
        let mut seen = std::collections::HashSet::new();
        for t in tables {
            for name in t.column_names() {
                if !seen.insert(name.to_string()) {
                    return Err(IngestError::DuplicateColumnName(name.to_string()));
                }
            }
        }
    }

    let dates: Vec<NaiveDate> = match policy {
        AlignPolicy::Intersect => {
            let mut common: Vec<NaiveDate> = tables[0].dates().to_vec();
            for t in &tables[1..] {
                let set: std::collections::BTreeSet<_> = t.dates().iter().copied().collect();
                common.retain(|d| set.contains(d));
            }
            if common.is_empty() {
                return Err(IngestError::EmptyIntersection);
            }
            common
        }
        AlignPolicy::ForwardFill { .. } => {
            let mut union: std::collections::BTreeSet<NaiveDate> = std::collections::BTreeSet::new();
            for t in tables {
                union.extend(t.dates().iter().copied());
            }
            union.into_iter().collect()
        }
    };

    let mut columns: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for t in tables {
        let index: BTreeMap<NaiveDate, usize> = t
            .dates()
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i))
            .collect();
        for (name, values) in t.columns() {
            let mut cells = Vec::with_capacity(dates.len());
            let mut last_seen: Option<(NaiveDate, f64)> = None;
            for &date in &dates {
                let at_date = index.get(&date).and_then(|&i| values[i]);
                let cell = match (policy, at_date) {
                    (_, Some(v)) => {
                        last_seen = Some((date, v));
                        Some(v)
                    }
                    (AlignPolicy::Intersect, None) => None,
                    (AlignPolicy::ForwardFill { max_gap }, None) => last_seen
                        .filter(|(d, _)| (date - *d).num_days() <= i64::from(max_gap))
                        .map(|(_, v)| v),
                };
                cells.push(cell);
            }
            columns.push((name.to_string(), cells));
        }
    }
    TimeSeriesTable::new(dates, columns)
}

/// Applies per-column transforms. When any column is differenced the first
/// row is dropped from the whole table so all columns stay aligned. Cells
/// next to a missing value come out missing.
pub fn transform(table: &TimeSeriesTable, spec: &TransformSpec) -> Result<TimeSeriesTable, IngestError> {
    for name in spec.0.keys() {
        table.column(name)?;
    }
    let any_differenced = table
        .column_names()
        .iter()
        .any(|n| spec.get(n) != Transform::Raw);

    let mut columns = Vec::new();
    for (name, values) in table.columns() {
        let transformed: Vec<Option<f64>> = match spec.get(name) {
            Transform::Raw => values.to_vec(),
            Transform::FirstDifference => diff_with(values, name, |curr, prev| Ok(curr - prev))?,
            Transform::LogReturn => {
                for (r, v) in values.iter().enumerate() {
                    if let Some(v) = v {
                        if *v <= 0.0 {
                            return Err(IngestError::NonPositiveValue {
                                column: name.to_string(),
                                row: r + 1,
                            });
                        }
                    }
                }
                diff_with(values, name, |curr, prev| Ok((curr / prev).ln()))?
            }
        };
        columns.push((name.to_string(), transformed));
    }

    if any_differenced {
        let dates = table.dates()[1..].to_vec();
        let columns = columns
            .into_iter()
            .map(|(n, v)| (n, v[1..].to_vec()))
            .collect();
        TimeSeriesTable::new(dates, columns)
    } else {
        TimeSeriesTable::new(table.dates().to_vec(), columns)
    }
}

fn diff_with(
    values: &[Option<f64>],
    _name: &str,
    f: impl Fn(f64, f64) -> Result<f64, IngestError>,
) -> Result<Vec<Option<f64>>, IngestError> {
    let mut out = vec![None; values.len()];
    for t in 1..values.len() {
        out[t] = match (values[t], values[t - 1]) {
            (Some(curr), Some(prev)) => Some(f(curr, prev)?),
            _ => None,
        };
    }
    Ok(out)
}

/// Sample summary statistics of one column (missing values excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub n_obs: usize,
}

/// Mean, sample standard deviation (n - 1), min, median and max of the
/// non-missing values. The median of an even count is the midpoint average.
pub fn describe(values: &[Option<f64>]) -> Result<SummaryStats, IngestError> {
    let mut xs: Vec<f64> = values.iter().flatten().copied().collect();
    if xs.is_empty() {
        return Err(IngestError::AllMissing);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std_dev = if n == 1 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    let median = if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    };
    Ok(SummaryStats {
        mean,
        std_dev,
        min: xs[0],
        median,
        max: xs[n - 1],
        n_obs: n,
    })
}
