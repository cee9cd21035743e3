//! File formats: point-cloud CSV, plan triplet CSV, label CSV, plan JSON
//! sidecars, and flat key-value config files.
//!
//! Parse errors name the 1-based line and column of the offending cell;
//! the header is line 1.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::PointCloud;
use crate::plan::{TransportPlan, Triplet};

/// Name of the optional integer column holding ground-truth labels.
pub const LABEL_COLUMN: &str = "label";
/// Header of the plan triplet format.
pub const TRIPLET_HEADER: [&str; 3] = ["i", "j", "mass"];

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row: line,
        column,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_error(
            line,
            len as usize + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { err, .. } => parse_error(line, err.field() + 1, "invalid UTF-8"),
        other => parse_error(line, 0, format!("{other:?}")),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn parse_f64(cell: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_error(line, column, format!("`{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, column, format!("`{cell}` is not finite")));
    }
    Ok(v)
}

fn parse_int(cell: &str, line: usize, column: usize) -> Result<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Ok(v);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(parse_error(line, column, format!("`{cell}` is not an integer"))),
    }
}

fn parse_index(cell: &str, line: usize, column: usize) -> Result<usize> {
    cell.parse()
        .map_err(|_| parse_error(line, column, format!("`{cell}` is not a nonnegative index")))
}

/// Reads a point cloud: a header, numeric feature columns, and an optional
/// integer `label` column that is split off as labels.
pub fn parse_pointcloud<R: Read>(input: R) -> Result<PointCloud> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    let label_col = header.iter().position(|h| h.eq_ignore_ascii_case(LABEL_COLUMN));
    if header.iter().filter(|h| h.eq_ignore_ascii_case(LABEL_COLUMN)).count() > 1 {
        return Err(parse_error(1, 0, "more than one label column"));
    }
    let dim = header.len() - usize::from(label_col.is_some());
    if dim == 0 {
        return Err(parse_error(1, 1, "no feature columns"));
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut rows = 0;
    while rdr.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_col {
                labels.push(parse_int(cell, line, c + 1)?);
            } else {
                coords.push(parse_f64(cell, line, c + 1)?);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile);
    }
    let points = Array2::from_shape_vec((rows, dim), coords).expect("every record has the header's width");
    PointCloud::new(points, label_col.map(|_| labels))
}

/// [`parse_pointcloud`] on an in-memory string.
pub fn parse_pointcloud_str(text: &str) -> Result<PointCloud> {
    parse_pointcloud(text.as_bytes())
}

/// [`parse_pointcloud`] on a file.
pub fn load_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_pointcloud(File::open(path)?)
}

/// Writes a cloud with header `x0,x1,…` plus `label` when labels exist.
/// Floats use the shortest representation that round-trips.
pub fn write_pointcloud<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..cloud.dim()).map(|k| format!("x{k}")).collect();
    if cloud.labels().is_some() {
        header.push(LABEL_COLUMN.into());
    }
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..cloud.len() {
        let mut rec: Vec<String> = cloud.point(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = cloud.labels() {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the nonzero entries of `plan` as `i,j,mass`, row-major.
pub fn write_plan_triplets<W: Write>(plan: &TransportPlan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIPLET_HEADER).map_err(csv_error)?;
    for t in plan.triplets() {
        w.write_record(&[t.i.to_string(), t.j.to_string(), t.mass.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `i,j,mass` triplets. Masses must be finite and nonnegative and
/// each cell may appear once; with `shape`, indices must lie inside it.
pub fn parse_plan_triplets<R: Read>(input: R, shape: Option<(usize, usize)>) -> Result<Vec<Triplet>> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    for (c, (got, want)) in header.iter().zip(TRIPLET_HEADER).enumerate() {
        if !got.eq_ignore_ascii_case(want) {
            return Err(parse_error(
                1,
                c + 1,
                format!("expected column `{want}`, found `{got}`"),
            ));
        }
    }
    if header.len() != TRIPLET_HEADER.len() {
        return Err(parse_error(1, header.len().min(4), "expected exactly i,j,mass"));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map_or(out.len() + 2, |p| p.line() as usize);
        let i = parse_index(&record[0], line, 1)?;
        let j = parse_index(&record[1], line, 2)?;
        let mass = parse_f64(&record[2], line, 3)?;
        if mass < 0.0 {
            return Err(parse_error(line, 3, format!("negative mass {mass}")));
        }
        if let Some((rows, cols)) = shape {
            if i >= rows {
                return Err(parse_error(line, 1, format!("row {i} outside {rows} rows")));
            }
            if j >= cols {
                return Err(parse_error(line, 2, format!("column {j} outside {cols} columns")));
            }
        }
        if !seen.insert((i, j)) {
            return Err(parse_error(line, 1, format!("cell ({i}, {j}) appears twice")));
        }
        out.push(Triplet { i, j, mass });
    }
    Ok(out)
}

/// Dense plan from triplets; the stored objective is zero.
pub fn plan_from_triplets(triplets: &[Triplet], rows: usize, cols: usize) -> Result<TransportPlan> {
    let mut t = Array2::zeros((rows, cols));
    for tr in triplets {
        if tr.i >= rows || tr.j >= cols {
            return Err(Error::DimensionMismatch(format!(
                "triplet ({}, {}) outside a {rows}x{cols} plan",
                tr.i, tr.j
            )));
        }
        t[[tr.i, tr.j]] += tr.mass;
    }
    TransportPlan::new(t, 0.0)
}

/// Writes one `label` per line under a `label` header.
pub fn write_labels<W: Write>(labels: &[i64], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{LABEL_COLUMN}")?;
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Machine-readable summary written next to an exported plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub rows: usize,
    pub cols: usize,
    pub objective: f64,
    pub total_mass: f64,
    pub nonzero_count: usize,
    /// Largest violation of the row constraints.
    pub row_residual: f64,
    /// Largest violation of the column constraints.
    pub col_residual: f64,
}

impl PlanSummary {
    /// Summary against row and column targets. With `partial` the targets
    /// are upper bounds, otherwise equalities.
    pub fn new(plan: &TransportPlan, p: &[f64], q: &[f64], partial: bool) -> Self {
        let residual = |got: &[f64], want: &[f64]| {
            got.iter()
                .zip(want)
                .map(|(g, w)| if partial { (g - w).max(0.0) } else { (g - w).abs() })
                .fold(0.0, f64::max)
        };
        let (rows, cols) = plan.shape();
        Self {
            rows,
            cols,
            objective: plan.objective(),
            total_mass: plan.total_mass(),
            nonzero_count: plan.nonzero_count(),
            row_residual: residual(plan.row_marginals(), p),
            col_residual: residual(plan.col_marginals(), q),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// A scalar value in a flat config file.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ConfigValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ConfigValue::Int(v) => Some(v as f64),
            ConfigValue::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            ConfigValue::Int(v) if v >= 0 => Some(v as u64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ConfigValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ConfigValue::Bool(b) => Some(b),
            _ => None,
        }
    }
}

/// Flat key-value config; keys are normalized to kebab case so that
/// `max_iter` and `max-iter` name the same flag.
pub type FlatConfig = BTreeMap<String, ConfigValue>;

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

fn insert_key(map: &mut FlatConfig, key: &str, value: ConfigValue) -> Result<()> {
    let k = normalize_key(key);
    if k.is_empty() {
        return Err(Error::Config("empty key".into()));
    }
    if map.insert(k.clone(), value).is_some() {
        return Err(Error::Config(format!("key `{k}` given twice")));
    }
    Ok(())
}

/// Parses a flat TOML table or JSON object of scalars. Input whose first
/// non-blank character is `{` is read as JSON, anything else as TOML.
pub fn parse_config(text: &str) -> Result<FlatConfig> {
    let mut map = FlatConfig::new();
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("top level must be an object".into()))?;
        for (k, v) in obj {
            let v = match v {
                serde_json::Value::Bool(b) => ConfigValue::Bool(*b),
                serde_json::Value::Number(n) => match n.as_i64() {
                    Some(i) => ConfigValue::Int(i),
                    None => ConfigValue::Float(n.as_f64().unwrap_or(f64::NAN)),
                },
                serde_json::Value::String(s) => ConfigValue::Str(s.clone()),
                _ => return Err(Error::Config(format!("key `{k}` must hold a scalar"))),
            };
            insert_key(&mut map, k, v)?;
        }
    } else {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (k, v) in &table {
            let v = match v {
                toml::Value::Boolean(b) => ConfigValue::Bool(*b),
                toml::Value::Integer(i) => ConfigValue::Int(*i),
                toml::Value::Float(f) => ConfigValue::Float(*f),
                toml::Value::String(s) => ConfigValue::Str(s.clone()),
                _ => return Err(Error::Config(format!("key `{k}` must hold a scalar"))),
            };
            insert_key(&mut map, k, v)?;
        }
    }
    Ok(map)
}

/// [`parse_config`] on a file.
pub fn load_config(path: impl AsRef<Path>) -> Result<FlatConfig> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_cloud() {
        let c = parse_pointcloud_str("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(c.points(), &ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(c.labels().is_none());
    }

    #[test]
    fn label_column_is_split_off() {
        let c = parse_pointcloud_str("x,label,y\n1,1,2\n3,-1,4\n").unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.labels(), Some(&[1, -1][..]));
        assert_eq!(c.points(), &ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn bad_cell_is_located() {
        let e = parse_pointcloud_str("x,y\n1,2\n3,oops\n").unwrap_err();
        match e {
            Error::Parse { row, column, message } => {
                assert_eq!((row, column), (3, 2));
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse_pointcloud_str(""), Err(Error::EmptyFile)));
        assert!(matches!(parse_pointcloud_str("x,y\n"), Err(Error::EmptyFile)));
        assert!(matches!(parse_pointcloud_str("label\n1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn ragged_row_is_rejected() {
        assert!(matches!(
            parse_pointcloud_str("x,y\n1,2\n3\n"),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn triplets_round_trip() {
        let plan = TransportPlan::new(ndarray::array![[0.1, 0.0], [0.0, 0.30000000000000004]], 0.0).unwrap();
        let mut buf = Vec::new();
        write_plan_triplets(&plan, &mut buf).unwrap();
        let back = parse_plan_triplets(&buf[..], Some((2, 2))).unwrap();
        assert_eq!(plan_from_triplets(&back, 2, 2).unwrap().entries(), plan.entries());
    }

    #[test]
    fn triplet_errors() {
        assert!(parse_plan_triplets("i,j,mass\n0,0,-1\n".as_bytes(), None).is_err());
        assert!(parse_plan_triplets("i,j,mass\n0,0,1\n0,0,1\n".as_bytes(), None).is_err());
        assert!(parse_plan_triplets("i,j,mass\n5,0,1\n".as_bytes(), Some((2, 2))).is_err());
        assert!(parse_plan_triplets("row,col,mass\n".as_bytes(), None).is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let a = parse_config("prior = 0.5\nmax_iter = 10\nmode = \"gw\"\nrelax-grid = true\n").unwrap();
        let b = parse_config(r#"{"prior": 0.5, "max-iter": 10, "mode": "gw", "relax_grid": true}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a["max-iter"].as_u64(), Some(10));
    }

    #[test]
    fn nested_config_is_rejected() {
        assert!(parse_config("[solver]\neta = 1\n").is_err());
        assert!(parse_config(r#"{"a": [1]}"#).is_err());
        assert!(parse_config(r#"{"a": 1, "A": 2}"#).is_err());
    }
}
