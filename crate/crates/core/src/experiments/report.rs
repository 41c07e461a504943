//! Tabular experiment reports and their CSV/JSON serialization.
//!
//! CSV output holds the header and the data rows. JSON output additionally
//! carries the configuration echo and the environment fingerprint. Both are
//! written to a temporary file next to the target and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Int,
    UInt,
    Float,
    Text,
    Bool,
}

impl CellKind {
    fn name(self) -> &'static str {
        match self {
            CellKind::Int => "int",
            CellKind::UInt => "uint",
            CellKind::Float => "float",
            CellKind::Text => "text",
            CellKind::Bool => "bool",
        }
    }

    fn from_name(s: &str) -> Result<Self> {
        match s {
            "int" => Ok(CellKind::Int),
            "uint" => Ok(CellKind::UInt),
            "float" => Ok(CellKind::Float),
            "text" => Ok(CellKind::Text),
            "bool" => Ok(CellKind::Bool),
            other => Err(Error::invalid(format!("unknown column kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Int(_) => CellKind::Int,
            Cell::UInt(_) => CellKind::UInt,
            Cell::Float(_) => CellKind::Float,
            Cell::Text(_) => CellKind::Text,
            Cell::Bool(_) => CellKind::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::UInt(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Equality that treats two NaNs as equal.
    fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Float(a), Cell::Float(b)) => a == b || (a.is_nan() && b.is_nan()),
            _ => self == other,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn from_csv(kind: CellKind, s: &str) -> Result<Cell> {
        let bad = || Error::invalid(format!("cannot read `{s}` as {}", kind.name()));
        Ok(match kind {
            CellKind::Int => Cell::Int(s.parse().map_err(|_| bad())?),
            CellKind::UInt => Cell::UInt(s.parse().map_err(|_| bad())?),
            CellKind::Float => Cell::Float(s.parse().map_err(|_| bad())?),
            CellKind::Text => Cell::Text(s.to_string()),
            CellKind::Bool => Cell::Bool(s.parse().map_err(|_| bad())?),
        })
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::UInt(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(format_float(*v)),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }

    fn from_json(kind: CellKind, v: &Value) -> Result<Cell> {
        let bad = || Error::invalid(format!("cannot read {v} as {}", kind.name()));
        Ok(match kind {
            CellKind::Int => Cell::Int(v.as_i64().ok_or_else(bad)?),
            CellKind::UInt => Cell::UInt(v.as_u64().ok_or_else(bad)?),
            CellKind::Float => match v {
                Value::String(s) => Cell::Float(s.parse().map_err(|_| bad())?),
                _ => Cell::Float(v.as_f64().ok_or_else(bad)?),
            },
            CellKind::Text => Cell::Text(v.as_str().ok_or_else(bad)?.to_string()),
            CellKind::Bool => Cell::Bool(v.as_bool().ok_or_else(bad)?),
        })
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::UInt(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits in scientific notation; `NaN`, `inf`, `-inf` for
/// non-finite values.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: CellKind,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Configuration echo, values rendered as text.
    pub config: BTreeMap<String, String>,
    pub fingerprint: BTreeMap<String, String>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl PartialEq for ExperimentReport {
    fn eq(&self, other: &Self) -> bool {
        self.experiment == other.experiment
            && self.config == other.config
            && self.fingerprint == other.fingerprint
            && self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }
}

pub fn fingerprint() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("crate".to_string(), env!("CARGO_PKG_NAME").to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("rng".to_string(), RNG_ALGORITHM.to_string()),
    ])
}

impl ExperimentReport {
    pub fn new(experiment: &str, columns: &[(&str, CellKind)]) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: BTreeMap::new(),
            fingerprint: fingerprint(),
            columns: columns
                .iter()
                .map(|(name, kind)| Column {
                    name: name.to_string(),
                    kind: *kind,
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                what: "report row",
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        for (cell, col) in row.iter().zip(&self.columns) {
            if cell.kind() != col.kind {
                return Err(Error::invalid(format!(
                    "column `{}` expects {}, got {}",
                    col.name,
                    col.kind.name(),
                    cell.kind().name()
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// All values of a column, in row order.
    pub fn column(&self, name: &str) -> Result<Vec<&Cell>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(format!("CSV encoding failed: {e}"));
        w.write_record(self.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(format!("CSV encoding failed: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let columns: Vec<Value> = self
            .columns
            .iter()
            .map(|c| json!({"name": c.name, "kind": c.kind.name()}))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let doc = json!({
            "experiment": self.experiment,
            "fingerprint": self.fingerprint,
            "config": self.config,
            "columns": columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Reads rows written by [`Self::to_csv_string`] back into a report with
    /// the given columns.
    pub fn parse_csv(experiment: &str, columns: &[Column], text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::invalid(e.to_string()))?.clone();
        if header.len() != columns.len() || header.iter().zip(columns).any(|(h, c)| h != c.name) {
            return Err(Error::invalid("CSV header does not match the expected columns"));
        }
        let mut report = ExperimentReport {
            experiment: experiment.to_string(),
            config: BTreeMap::new(),
            fingerprint: fingerprint(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        };
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: k + 2,
                message: e.to_string(),
            })?;
            let row = rec
                .iter()
                .zip(columns)
                .map(|(f, c)| Cell::from_csv(c.kind, f))
                .collect::<Result<Vec<_>>>()?;
            report.push(row)?;
        }
        Ok(report)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        let text_map = |v: &Value| -> Result<BTreeMap<String, String>> {
            let obj: &Map<String, Value> = v.as_object().ok_or_else(|| Error::invalid("expected an object"))?;
            obj.iter()
                .map(|(k, v)| {
                    v.as_str()
                        .map(|s| (k.clone(), s.to_string()))
                        .ok_or_else(|| Error::invalid(format!("`{k}` is not a string")))
                })
                .collect()
        };
        let columns = doc["columns"]
            .as_array()
            .ok_or_else(|| Error::invalid("missing columns"))?
            .iter()
            .map(|c| {
                Ok(Column {
                    name: c["name"].as_str().ok_or_else(|| Error::invalid("column name"))?.to_string(),
                    kind: CellKind::from_name(c["kind"].as_str().unwrap_or_default())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport {
            experiment: doc["experiment"].as_str().unwrap_or_default().to_string(),
            config: text_map(&doc["config"])?,
            fingerprint: text_map(&doc["fingerprint"])?,
            columns,
            rows: Vec::new(),
        };
        for row in doc["rows"].as_array().ok_or_else(|| Error::invalid("missing rows"))? {
            let cells = row
                .as_array()
                .ok_or_else(|| Error::invalid("row is not an array"))?
                .iter()
                .zip(&report.columns)
                .map(|(v, c)| Cell::from_json(c.kind, v))
                .collect::<Result<Vec<_>>>()?;
            report.push(cells)?;
        }
        Ok(report)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv_string(),
            OutputFormat::Json => self.to_json_string(),
        }
    }
}

/// Writes the rendered report atomically. The text goes to a temporary file
/// in the target's directory, which is then renamed over `path`.
pub fn emit_report(report: &ExperimentReport, format: OutputFormat, path: &Path) -> Result<()> {
    let body = report.render(format)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(body.as_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new(
            "demo",
            &[
                ("name", CellKind::Text),
                ("q", CellKind::Int),
                ("bias", CellKind::Float),
                ("scaled", CellKind::Bool),
            ],
        );
        r.echo("lambda", 10.0);
        r.push(vec!["a,\"b\"".into(), 3usize.into(), (0.1 + 0.2).into(), true.into()]).unwrap();
        r.push(vec!["plain".into(), 1usize.into(), f64::NAN.into(), false.into()]).unwrap();
        r.push(vec!["x".into(), (-4i64).into(), 1e-300.into(), false.into()]).unwrap();
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::new("e", &[("a", CellKind::Int), ("b", CellKind::Float)]);
        assert_eq!(r.to_csv_string().unwrap(), "a,b\n");
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        let v: f64 = format_float(0.1 + 0.2).parse().unwrap();
        assert_eq!(v, 0.1 + 0.2);
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let text = r.to_csv_string().unwrap();
        assert!(!text.contains('\r'));
        let back = ExperimentReport::parse_csv("demo", &r.columns, &text).unwrap();
        assert_eq!(back.rows.len(), r.rows.len());
        assert!(back.rows.iter().zip(&r.rows).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.same(y))));
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back = ExperimentReport::parse_json(&r.to_json_string().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unsigned_cells_keep_full_range() {
        let mut r = ExperimentReport::new("u", &[("seed", CellKind::UInt)]);
        r.push(vec![u64::MAX.into()]).unwrap();
        assert_eq!(r.to_csv_string().unwrap(), format!("seed\n{}\n", u64::MAX));
        assert_eq!(ExperimentReport::parse_json(&r.to_json_string().unwrap()).unwrap(), r);
    }

    proptest::proptest! {
        #[test]
        fn finite_floats_round_trip_exactly(bits in proptest::num::u64::ANY) {
            let v = f64::from_bits(bits);
            proptest::prop_assume!(v.is_finite());
            let mut r = ExperimentReport::new("p", &[("v", CellKind::Float)]);
            r.push(vec![v.into()]).unwrap();
            let from_json = ExperimentReport::parse_json(&r.to_json_string().unwrap()).unwrap();
            let from_csv = ExperimentReport::parse_csv("p", &r.columns, &r.to_csv_string().unwrap()).unwrap();
            proptest::prop_assert_eq!(from_json.rows[0][0].as_f64().unwrap().to_bits(), bits);
            proptest::prop_assert_eq!(from_csv.rows[0][0].as_f64().unwrap().to_bits(), bits);
        }
    }

    #[test]
    fn rows_are_type_checked() {
        let mut r = sample();
        assert!(r.push(vec![1usize.into(), 1usize.into(), 1.0.into(), true.into()]).is_err());
        assert!(r.push(vec!["short".into()]).is_err());
    }

    #[test]
    fn atomic_emit_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "old").unwrap();
        emit_report(&sample(), OutputFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("name,q,bias,scaled\n"));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn emit_reports_missing_directory() {
        let err = emit_report(&sample(), OutputFormat::Json, Path::new("/nonexistent/dir/out.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
