//! Turning raw observations into matrix samples.
//!
//! Two pipelines are supported: a timestamped price series cut into
//! consecutive windows of log returns, and grouped multivariate records
//! reduced to one covariance matrix per group. Nothing here is random.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::samplers::{sample_covariance, CovDivisor};
use crate::spd::{Matrix, SpdMatrix};
use crate::statistic::MatrixSample;

/// Row key of a [`SeriesTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timestamp {
    Integer(i64),
    DateTime(NaiveDateTime),
}

impl Timestamp {
    /// Accepts an integer, an RFC 3339 instant (normalized to UTC), or a
    /// naive `YYYY-MM-DD[ T]HH:MM[:SS[.f]]` / `YYYY-MM-DD` value.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Some(Timestamp::Integer(i));
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp::DateTime(dt.naive_utc()));
        }
        const FORMATS: [&str; 4] = [
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ];
        if let Some(dt) = FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        {
            return Some(Timestamp::DateTime(dt));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(Timestamp::DateTime)
    }

    fn same_kind(&self, other: &Self) -> bool {
        matches!(
            (self, other),
            (Timestamp::Integer(_), Timestamp::Integer(_)) | (Timestamp::DateTime(_), Timestamp::DateTime(_))
        )
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Integer(i) => write!(f, "{i}"),
            Timestamp::DateTime(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.f")),
        }
    }
}

/// Named real-valued series aligned on strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    timestamps: Vec<Timestamp>,
    columns: Vec<String>,
    /// Row-major, `timestamps.len() × columns.len()`.
    values: Vec<f64>,
}

impl SeriesTable {
    pub fn new(timestamps: Vec<Timestamp>, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyList);
        }
        if values.len() != timestamps.len() * columns.len() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len() * columns.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if !w[0].same_kind(&w[1]) {
                return Err(Error::parse(
                    "timestamps",
                    format!("row {} mixes integer and date-time timestamps", i + 1),
                ));
            }
            if w[0] >= w[1] {
                return Err(Error::parse(
                    "timestamps",
                    format!("not strictly increasing at row {} ({} then {})", i + 1, w[0], w[1]),
                ));
            }
        }
        Ok(Self {
            timestamps,
            columns,
            values,
        })
    }

    /// Series indexed `0, 1, 2, …` from per-row values.
    pub fn from_rows<R: AsRef<[f64]>>(columns: Vec<String>, rows: &[R]) -> Result<Self> {
        let timestamps = (0..rows.len() as i64).map(Timestamp::Integer).collect();
        let mut values = Vec::with_capacity(rows.len() * columns.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(timestamps, columns, values)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.values[t * w..(t + 1) * w]
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx = column_indices(&self.columns, names)?;
        let values = (0..self.len())
            .flat_map(|t| idx.iter().map(move |&j| (t, j)))
            .map(|(t, j)| self.row(t)[j])
            .collect();
        Ok(Self {
            timestamps: self.timestamps.clone(),
            columns: names.to_vec(),
            values,
        })
    }
}

fn column_indices(available: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    if wanted.is_empty() {
        return Err(Error::EmptyList);
    }
    wanted
        .iter()
        .map(|w| {
            available
                .iter()
                .position(|c| c == w)
                .ok_or_else(|| Error::parse("columns", format!("no column named `{w}`")))
        })
        .collect()
}

/// `log(vₜ/vₜ₋₁)` per column; the first row is consumed.
pub fn log_returns(s: &SeriesTable) -> Result<SeriesTable> {
    if s.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            have: s.len(),
        });
    }
    let w = s.width();
    for (i, &v) in s.values.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue {
                row: i / w,
                column: s.columns[i % w].clone(),
                value: v,
            });
        }
    }
    let values = s
        .values
        .chunks_exact(w)
        .zip(s.values.chunks_exact(w).skip(1))
        .flat_map(|(prev, cur)| prev.iter().zip(cur).map(|(p, c)| (c / p).ln()))
        .collect();
    SeriesTable::new(s.timestamps[1..].to_vec(), s.columns.clone(), values)
}

/// Centered covariance of each run of `window` consecutive rows; a
/// trailing partial window is dropped.
pub fn windowed_covariances(s: &SeriesTable, window: usize, divisor: CovDivisor) -> Result<MatrixSample> {
    if window < 2 {
        return Err(Error::TooShort {
            needed: 2,
            have: window,
        });
    }
    if s.len() < window {
        return Err(Error::TooShort {
            needed: window,
            have: s.len(),
        });
    }
    let d = s.width();
    let items = s
        .values
        .chunks_exact(window * d)
        .map(|block| SpdMatrix::new(sample_covariance(block, d, divisor)?))
        .collect::<Result<Vec<_>>>()?;
    MatrixSample::new(items)
}

/// Covariances of log returns over consecutive windows of `window` price
/// rows. Window `k` holds the returns ending at price rows
/// `k·window .. (k+1)·window`, so the first window has `window − 1` returns
/// and the count is `floor(rows / window)`.
pub fn return_covariances(prices: &SeriesTable, window: usize, divisor: CovDivisor) -> Result<MatrixSample> {
    if window < 3 {
        return Err(Error::TooShort {
            needed: 3,
            have: window,
        });
    }
    if prices.len() < window {
        return Err(Error::TooShort {
            needed: window,
            have: prices.len(),
        });
    }
    let returns = log_returns(prices)?;
    let d = prices.width();
    let items = (0..prices.len() / window)
        .map(|k| {
            let lo = (k * window).saturating_sub(1);
            let hi = (k + 1) * window - 1;
            SpdMatrix::new(sample_covariance(&returns.values[lo * d..hi * d], d, divisor)?)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixSample::new(items)
}

/// Multivariate records each tagged with a group label.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedRecords {
    labels: Vec<String>,
    features: Vec<String>,
    /// Row-major, `labels.len() × features.len()`.
    values: Vec<f64>,
}

impl GroupedRecords {
    pub fn new(labels: Vec<String>, features: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyList);
        }
        if values.len() != labels.len() * features.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * features.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            labels,
            features,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Distinct labels in order of first appearance, with their records.
    pub fn groups(&self) -> Vec<(String, Vec<&[f64]>)> {
        let d = self.features.len();
        let mut order: Vec<(String, Vec<&[f64]>)> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for (label, rec) in self.labels.iter().zip(self.values.chunks_exact(d)) {
            let k = *slot.entry(label.as_str()).or_insert_with(|| {
                order.push((label.clone(), Vec::new()));
                order.len() - 1
            });
            order[k].1.push(rec);
        }
        order
    }
}

/// One covariance matrix per group; groups for which `to_first` holds go to
/// the first sample, the rest to the second. Groups keep first-appearance
/// order within each side.
pub fn group_covariances<F>(g: &GroupedRecords, to_first: F, divisor: CovDivisor) -> Result<(MatrixSample, MatrixSample)>
where
    F: Fn(&str) -> bool,
{
    let d = g.features.len();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (label, records) in g.groups() {
        if records.len() < 2 {
            return Err(Error::GroupTooSmall {
                label,
                count: records.len(),
            });
        }
        let flat: Vec<f64> = records.concat();
        let cov = SpdMatrix::new(sample_covariance(&flat, d, divisor)?)?;
        if to_first(&label) {
            first.push(cov);
        } else {
            second.push(cov);
        }
    }
    if first.is_empty() {
        return Err(Error::EmptySide('A'));
    }
    if second.is_empty() {
        return Err(Error::EmptySide('B'));
    }
    Ok((MatrixSample::new(first)?, MatrixSample::new(second)?))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "N/A" | "na" | "NaN" | "nan" | "null" | "NULL")
}

fn parse_value(cell: &str, context: &str, row: usize) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|e| Error::parse(context, format!("line {}: `{cell}`: {e}", row + 2)))?;
    if !v.is_finite() {
        return Err(Error::parse(context, format!("line {}: non-finite value `{cell}`", row + 2)));
    }
    Ok(v)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn headers<R: Read>(rdr: &mut csv::Reader<R>, context: &str) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| Error::parse(context, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads a price series: header row, timestamp in the first column.
/// `columns` selects value columns by name (default: all remaining).
/// Rows with a missing cell in the timestamp or any selected column are
/// dropped and counted in the log.
pub fn parse_series_csv<R: Read>(reader: R, columns: Option<&[String]>) -> Result<SeriesTable> {
    const CTX: &str = "series csv";
    let mut rdr = csv_reader(reader);
    let header = headers(&mut rdr, CTX)?;
    if header.len() < 2 {
        return Err(Error::parse(CTX, "need a timestamp column and at least one value column"));
    }
    let names: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => header[1..].to_vec(),
    };
    let idx: Vec<usize> = column_indices(&header[1..], &names)?
        .into_iter()
        .map(|j| j + 1)
        .collect();
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0usize;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e))?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        if is_missing(cell(0)) || idx.iter().any(|&j| is_missing(cell(j))) {
            dropped += 1;
            continue;
        }
        let ts = Timestamp::parse(cell(0))
            .ok_or_else(|| Error::parse(CTX, format!("line {}: bad timestamp `{}`", row + 2, cell(0))))?;
        timestamps.push(ts);
        for &j in &idx {
            values.push(parse_value(cell(j), CTX, row)?);
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} row(s) with missing cells");
    }
    SeriesTable::new(timestamps, names, values)
}

pub fn read_series_csv(path: &Path, columns: Option<&[String]>) -> Result<SeriesTable> {
    parse_series_csv(open(path)?, columns)
}

/// Reads grouped records: header row, one column holding the group label,
/// `features` selecting value columns (default: every other column).
/// Rows with a missing label or feature are dropped and counted in the log.
pub fn parse_grouped_csv<R: Read>(reader: R, group_column: &str, features: Option<&[String]>) -> Result<GroupedRecords> {
    const CTX: &str = "grouped csv";
    let mut rdr = csv_reader(reader);
    let header = headers(&mut rdr, CTX)?;
    let gidx = header
        .iter()
        .position(|h| h == group_column)
        .ok_or_else(|| Error::parse(CTX, format!("no column named `{group_column}`")))?;
    let names: Vec<String> = match features {
        Some(f) => f.to_vec(),
        None => header.iter().filter(|h| *h != group_column).cloned().collect(),
    };
    let idx = column_indices(&header, &names)?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0usize;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e))?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        if is_missing(cell(gidx)) || idx.iter().any(|&j| is_missing(cell(j))) {
            dropped += 1;
            continue;
        }
        labels.push(cell(gidx).to_string());
        for &j in &idx {
            values.push(parse_value(cell(j), CTX, row)?);
        }
    }
    if dropped > 0 {
        log::info!("dropped {dropped} row(s) with missing cells");
    }
    GroupedRecords::new(labels, names, values)
}

pub fn read_grouped_csv(path: &Path, group_column: &str, features: Option<&[String]>) -> Result<GroupedRecords> {
    parse_grouped_csv(open(path)?, group_column, features)
}

/// Writes `dim,<d>` then one row-major matrix per line.
pub fn write_matrix_sample<W: Write>(sample: &MatrixSample, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let err = |e: csv::Error| Error::parse("matrix sample csv", e);
    w.write_record(["dim".to_string(), sample.dim().to_string()]).map_err(err)?;
    for m in sample {
        w.write_record(m.as_slice().iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.flush().map_err(|e| Error::parse("matrix sample csv", e))?;
    Ok(())
}

pub fn save_matrix_sample(sample: &MatrixSample, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_sample(sample, file)
}

/// Inverse of [`write_matrix_sample`]; every matrix is re-validated.
pub fn parse_matrix_sample<R: Read>(reader: R) -> Result<MatrixSample> {
    const CTX: &str = "matrix sample csv";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let head = records
        .next()
        .ok_or_else(|| Error::parse(CTX, "empty file"))?
        .map_err(|e| Error::parse(CTX, e))?;
    let d: usize = match (head.get(0), head.get(1), head.len()) {
        (Some("dim"), Some(d), 2) => d
            .parse()
            .map_err(|e| Error::parse(CTX, format!("line 1: bad dimension `{d}`: {e}")))?,
        _ => return Err(Error::parse(CTX, "line 1 must be `dim,<d>`")),
    };
    if d == 0 {
        return Err(Error::parse(CTX, "dimension must be positive"));
    }
    let mut items = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != d * d {
            return Err(Error::parse(
                CTX,
                format!("line {}: expected {} values, found {}", i + 2, d * d, rec.len()),
            ));
        }
        let data = rec
            .iter()
            .map(|c| parse_value(c, CTX, i))
            .collect::<Result<Vec<_>>>()?;
        items.push(SpdMatrix::new(Matrix::from_row_major(d, d, data)?)?);
    }
    MatrixSample::new(items)
}

pub fn load_matrix_sample(path: &Path) -> Result<MatrixSample> {
    parse_matrix_sample(open(path)?)
}

/// Reads a single `d×d` matrix written as `d` comma-separated rows
/// (optionally preceded by a `dim,<d>` line).
pub fn parse_matrix<R: Read>(reader: R) -> Result<Matrix> {
    const CTX: &str = "matrix csv";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, e))?;
        if i == 0 && rec.get(0) == Some("dim") {
            continue;
        }
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        rows.push(rec.iter().map(|c| parse_value(c, CTX, i)).collect::<Result<_>>()?);
    }
    let m = Matrix::from_rows(&rows)?;
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::parse(CTX, format!("expected a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    Ok(m)
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn constant_series_has_zero_returns() {
        let s = SeriesTable::from_rows(cols(&["a"]), &[[3.0], [3.0], [3.0]]).unwrap();
        let r = log_returns(&s).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_series_gives_unit_returns() {
        let e = std::f64::consts::E;
        let s = SeriesTable::from_rows(cols(&["a"]), &[[1.0], [e], [e * e]]).unwrap();
        let r = log_returns(&s).unwrap();
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(r.timestamps()[0], Timestamp::Integer(1));
    }

    #[test]
    fn returns_errors() {
        let s = SeriesTable::from_rows(cols(&["a", "b"]), &[[1.0, 2.0], [1.0, -2.0]]).unwrap();
        match log_returns(&s) {
            Err(Error::NonPositiveValue { row, column, .. }) => {
                assert_eq!((row, column.as_str()), (1, "b"));
            }
            other => panic!("{other:?}"),
        }
        let one = SeriesTable::from_rows(cols(&["a"]), &[[1.0]]).unwrap();
        assert!(matches!(log_returns(&one), Err(Error::TooShort { needed: 2, have: 1 })));
    }

    #[test]
    fn windows_drop_partial_tail() {
        let rows: Vec<[f64; 2]> = (0..125).map(|i| [i as f64, (i * i % 7) as f64]).collect();
        let s = SeriesTable::from_rows(cols(&["a", "b"]), &rows).unwrap();
        let w = windowed_covariances(&s, 60, CovDivisor::Unbiased).unwrap();
        assert_eq!((w.len(), w.dim()), (2, 2));
        assert!(matches!(
            windowed_covariances(&s, 1, CovDivisor::Unbiased),
            Err(Error::TooShort { .. })
        ));
        assert!(matches!(
            windowed_covariances(&s, 200, CovDivisor::Unbiased),
            Err(Error::TooShort { needed: 200, have: 125 })
        ));
    }

    #[test]
    fn return_windows_follow_price_rows() {
        let rows: Vec<[f64; 2]> = (0..180)
            .map(|i| [100.0 + (i as f64 * 0.3).sin(), 50.0 + (i as f64 * 0.7).cos()])
            .collect();
        let s = SeriesTable::from_rows(cols(&["a", "b"]), &rows).unwrap();
        let w = return_covariances(&s, 60, CovDivisor::Unbiased).unwrap();
        assert_eq!(w.len(), 3);
        let r = log_returns(&s).unwrap();
        let second = sample_covariance(&r.values()[59 * 2..119 * 2], 2, CovDivisor::Unbiased).unwrap();
        assert_eq!(w.items()[1].matrix(), &second);
        let first = sample_covariance(&r.values()[..59 * 2], 2, CovDivisor::Unbiased).unwrap();
        assert_eq!(w.items()[0].matrix(), &first);
    }

    #[test]
    fn identical_rows_give_zero_matrix() {
        let s = SeriesTable::from_rows(cols(&["a", "b"]), &[[1.0, 2.0]; 4]).unwrap();
        let w = windowed_covariances(&s, 4, CovDivisor::Unbiased).unwrap();
        assert_eq!(w.items()[0].matrix(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn timestamps_must_increase() {
        let ts = vec![Timestamp::Integer(2), Timestamp::Integer(2)];
        assert!(SeriesTable::new(ts, cols(&["a"]), vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(Timestamp::parse("17"), Some(Timestamp::Integer(17)));
        let a = Timestamp::parse("2021-03-01T10:00:00Z").unwrap();
        let b = Timestamp::parse("2021-03-01 10:00:00").unwrap();
        let c = Timestamp::parse("2021-03-01T11:00:00+01:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(Timestamp::parse("2021-03-01").unwrap() < a);
        assert_eq!(Timestamp::parse("yesterday"), None);
    }

    #[test]
    fn series_csv_drops_missing_rows() {
        let text = "time,btc,eth,ltc\n\
                    2021-01-01T00:00:00,100,10,1\n\
                    2021-01-01T00:01:00,101,,1\n\
                    2021-01-01T00:02:00,102,11,\n";
        let all = parse_series_csv(text.as_bytes(), None).unwrap();
        assert_eq!(all.len(), 1);
        let sel = parse_series_csv(text.as_bytes(), Some(&cols(&["eth", "btc"]))).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(sel.row(1), &[11.0, 102.0]);
        assert!(parse_series_csv(text.as_bytes(), Some(&cols(&["doge"]))).is_err());
    }

    #[test]
    fn groups_split_and_validate() {
        let text = "province,a,b\nx,1,2\nx,1,2\ny,1,0\ny,3,4\nz,0,0\n";
        let g = parse_grouped_csv(text.as_bytes(), "province", None).unwrap();
        assert!(matches!(
            group_covariances(&g, |l| l == "x", CovDivisor::Unbiased),
            Err(Error::GroupTooSmall { ref label, count: 1 }) if label == "z"
        ));
        let text = "province,a,b\nx,1,2\nx,1,2\ny,1,0\ny,3,4\n";
        let g = parse_grouped_csv(text.as_bytes(), "province", None).unwrap();
        let (a, b) = group_covariances(&g, |l| l == "x", CovDivisor::Unbiased).unwrap();
        assert_eq!(a.items()[0].matrix(), &Matrix::zeros(2, 2));
        assert_eq!(b.items()[0].matrix(), &Matrix::from_rows(&[[2.0, 4.0], [4.0, 8.0]]).unwrap());
        assert!(matches!(
            group_covariances(&g, |_| true, CovDivisor::Unbiased),
            Err(Error::EmptySide('B'))
        ));
    }

    #[test]
    fn matrix_sample_round_trip() {
        let items = vec![
            SpdMatrix::new(Matrix::from_rows(&[[2.0, 0.1], [0.1, 1.0 / 3.0]]).unwrap()).unwrap(),
            SpdMatrix::zeros(2),
        ];
        let sample = MatrixSample::new(items).unwrap();
        let mut buf = Vec::new();
        write_matrix_sample(&sample, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("dim,2\n"));
        let back = parse_matrix_sample(buf.as_slice()).unwrap();
        assert_eq!(back, sample);
    }

    #[test]
    fn matrix_sample_rejects_bad_input() {
        assert!(parse_matrix_sample("dim,2\n1,2,3,1\n".as_bytes()).is_err());
        assert!(parse_matrix_sample("dim,2\n1,0,0\n".as_bytes()).is_err());
        assert!(parse_matrix_sample("2\n1,0,0,1\n".as_bytes()).is_err());
        assert!(parse_matrix_sample("dim,2\n".as_bytes()).is_err());
    }

    #[test]
    fn single_matrix_file() {
        let m = parse_matrix("2,0.5\n0.5,1\n".as_bytes()).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap());
        assert!(parse_matrix("1,2,3\n".as_bytes()).is_err());
    }
}
