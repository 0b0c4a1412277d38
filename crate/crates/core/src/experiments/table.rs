//! Tabular experiment output and its CSV/JSON encodings.
//!
//! CSV layout: optional `# key: value` metadata lines, then a header row
//! whose first cell is the corner label, then one row per row label.
//! Empty cells are blank. Percentages are written with one decimal place;
//! other values use the shortest representation that parses back exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::NcwParamsRecord;

use super::config::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// Rejection percentages in `[0, 100]`.
    Percent,
    /// Raw values such as percentiles or p-values.
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub seed: u64,
    pub n_reps: usize,
    pub alpha: f64,
    pub params: Vec<NcwParamsRecord>,
    pub software_version: String,
}

impl TableMetadata {
    pub fn new(seed: u64, n_reps: usize, alpha: f64, params: Vec<NcwParamsRecord>) -> Self {
        Self {
            seed,
            n_reps,
            alpha,
            params,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub corner: String,
    pub value_kind: ValueKind,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `cells[r][c]`; `None` marks a cell that was not computed.
    pub cells: Vec<Vec<Option<f64>>>,
    pub metadata: TableMetadata,
}

fn table_err(message: impl ToString) -> Error {
    Error::Parse {
        context: "result table".into(),
        message: message.to_string(),
    }
}

impl ResultTable {
    /// An all-empty table of the given shape.
    pub fn empty(
        title: impl Into<String>,
        corner: impl Into<String>,
        value_kind: ValueKind,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        metadata: TableMetadata,
    ) -> Self {
        let cells = vec![vec![None; col_labels.len()]; row_labels.len()];
        Self {
            title: title.into(),
            corner: corner.into(),
            value_kind,
            row_labels,
            col_labels,
            cells,
            metadata,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row][col]
    }

    /// Looks a cell up by its labels.
    pub fn cell(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.col_labels.iter().position(|l| l == col)?;
        self.cells[r][c]
    }

    /// Shape and range checks.
    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.row_labels.len() {
            return Err(table_err(format!(
                "{} rows of cells for {} row labels",
                self.cells.len(),
                self.row_labels.len()
            )));
        }
        if let Some((r, row)) = self
            .cells
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != self.col_labels.len())
        {
            return Err(table_err(format!(
                "row {r} has {} cells for {} columns",
                row.len(),
                self.col_labels.len()
            )));
        }
        for v in self.cells.iter().flatten().flatten() {
            let ok = match self.value_kind {
                ValueKind::Percent => (0.0..=100.0).contains(v),
                ValueKind::Value => !v.is_nan(),
            };
            if !ok {
                return Err(table_err(format!("cell value {v} out of range")));
            }
        }
        Ok(())
    }

    fn format_cell(&self, v: Option<f64>) -> String {
        match (v, self.value_kind) {
            (None, _) => String::new(),
            (Some(v), ValueKind::Percent) => format!("{v:.1}"),
            (Some(v), ValueKind::Value) => format!("{v}"),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let meta = serde_json::to_string(&self.metadata).map_err(table_err)?;
        let kind = match self.value_kind {
            ValueKind::Percent => "percent",
            ValueKind::Value => "value",
        };
        let _ = writeln!(out, "# title: {}", self.title.replace('\n', " "));
        let _ = writeln!(out, "# value_kind: {kind}");
        let _ = writeln!(out, "# metadata: {meta}");
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let header = std::iter::once(self.corner.clone()).chain(self.col_labels.iter().cloned());
        w.write_record(header).map_err(table_err)?;
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            let record = std::iter::once(label.clone()).chain(row.iter().map(|&v| self.format_cell(v)));
            w.write_record(record).map_err(table_err)?;
        }
        let body = w.into_inner().map_err(table_err)?;
        out.push_str(&String::from_utf8(body).map_err(table_err)?);
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut title = String::new();
        let mut kind = ValueKind::Value;
        let mut metadata = None;
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix("# ") else {
                break;
            };
            body_start += line.len();
            let rest = rest.trim_end_matches(['\n', '\r']);
            let (key, value) = rest.split_once(": ").unwrap_or((rest, ""));
            match key {
                "title" => title = value.to_string(),
                "value_kind" => {
                    kind = match value {
                        "percent" => ValueKind::Percent,
                        "value" => ValueKind::Value,
                        other => return Err(table_err(format!("unknown value kind `{other}`"))),
                    }
                }
                "metadata" => metadata = Some(serde_json::from_str(value).map_err(table_err)?),
                _ => {}
            }
        }
        let metadata = metadata.ok_or_else(|| table_err("missing metadata line"))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text[body_start..].as_bytes());
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| table_err("missing header row"))?
            .map_err(table_err)?;
        let corner = header.get(0).unwrap_or("").to_string();
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_labels = Vec::new();
        let mut cells = Vec::new();
        for rec in records {
            let rec = rec.map_err(table_err)?;
            row_labels.push(rec.get(0).unwrap_or("").to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|e| table_err(format!("cell `{c}`: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(row);
        }
        let t = Self {
            title,
            corner,
            value_kind: kind,
            row_labels,
            col_labels,
            cells,
            metadata,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(table_err)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(table_err)?;
        t.validate()?;
        Ok(t)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn parse(text: &str, format: OutputFormat) -> Result<Self> {
        match format {
            OutputFormat::Csv => Self::from_csv(text),
            OutputFormat::Json => Self::from_json(text),
        }
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format)?).map_err(|e| Error::io(path, e))
    }

    /// Percent cells rounded to the precision the CSV encoding keeps.
    pub fn rounded_for_csv(&self) -> Self {
        let mut t = self.clone();
        if t.value_kind == ValueKind::Percent {
            for v in t.cells.iter_mut().flatten().flatten() {
                *v = format!("{v:.1}").parse().unwrap_or(*v);
            }
        }
        t
    }
}
