//! Observation matrices and their on-disk formats.
//!
//! Data files are headerless CSV with one row per sample; a sidecar JSON file
//! records `{n, d, kind, seed, noise, graph_file}`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Continuous,
    Binary,
}

/// n×d observations; binary datasets hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    kind: DataKind,
}

impl Dataset {
    pub fn new(x: Array2<f64>, kind: DataKind) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid(format!("dataset must be non-empty, got {:?}", x.dim())));
        }
        if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite value {v} at row {i}, column {j}")));
        }
        if kind == DataKind::Binary && x.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(invalid("binary dataset contains values other than 0 and 1"));
        }
        Ok(Self { x, kind })
    }

    /// Detects the kind: binary when every entry is 0 or 1.
    pub fn infer(x: Array2<f64>) -> Result<Self> {
        let kind = if x.iter().all(|v| *v == 0.0 || *v == 1.0) { DataKind::Binary } else { DataKind::Continuous };
        Self::new(x, kind)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn column_means(&self) -> Array1<f64> {
        self.x.mean_axis(Axis(0)).expect("non-empty dataset")
    }

    /// Copy with each column shifted to mean zero.
    pub fn centered(&self) -> Array2<f64> {
        &self.x - &self.column_means().insert_axis(Axis(0))
    }

    /// Rows selected by index, in the given order.
    pub fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.x.select(Axis(0), idx)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for row in self.x.rows() {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:?}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Sidecar metadata for a data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    pub kind: DataKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<String>,
    #[serde(default)]
    pub graph_file: Option<String>,
    /// True if the CSV's first row is a header to skip.
    #[serde(default)]
    pub has_header: bool,
}

impl DatasetMeta {
    pub fn parse_json(text: &str) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(text)?;
        if meta.n == 0 || meta.d == 0 {
            return Err(invalid("metadata n and d must be positive"));
        }
        Ok(meta)
    }
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { row, column, message: message.into() }
}

/// Parses a rectangular numeric CSV. Errors carry 1-based row/column positions.
pub fn parse_data_csv(text: &str, has_header: bool) -> Result<Array2<f64>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        if has_header && k == 0 {
            continue;
        }
        // Skip blank lines.
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(
                    row,
                    rec.len().min(w) + 1,
                    format!("ragged row: expected {w} fields, got {}", rec.len()),
                ));
            }
            _ => {}
        }
        for (c, field) in rec.iter().enumerate() {
            let v = field.parse::<f64>().map_err(|_| parse_err(row, c + 1, format!("non-numeric cell {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, c + 1, format!("non-finite cell {field:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(d) = width else {
        return Err(parse_err(1, 1, "empty data file"));
    };
    Array2::from_shape_vec((rows, d), values).map_err(|e| invalid(e.to_string()))
}

/// Reads a data CSV; with metadata, checks the declared shape and kind.
pub fn ingest_csv<R: Read>(mut reader: R, meta: Option<&DatasetMeta>) -> Result<Dataset> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let x = parse_data_csv(&text, meta.is_some_and(|m| m.has_header))?;
    let ds = match meta {
        Some(m) => {
            if (m.n, m.d) != x.dim() {
                return Err(invalid(format!("metadata declares {}x{}, file holds {:?}", m.n, m.d, x.dim())));
            }
            Dataset::new(x, m.kind)?
        }
        None => Dataset::infer(x)?,
    };
    Ok(ds)
}

/// Loads `path`, using `<stem>.json` beside it as metadata when present.
pub fn load_dataset(path: &Path) -> Result<(Dataset, Option<DatasetMeta>)> {
    let meta_path = path.with_extension("json");
    let meta =
        if meta_path.exists() { Some(DatasetMeta::parse_json(&std::fs::read_to_string(&meta_path)?)?) } else { None };
    let ds = ingest_csv(std::fs::File::open(path)?, meta.as_ref())?;
    Ok((ds, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn infers_shape_and_kind() {
        let ds = ingest_csv("1.5,2\n3,4\n-1,0.25\n".as_bytes(), None).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.kind()), (3, 2, DataKind::Continuous));
        let ds = ingest_csv("0,1\n1,1\n".as_bytes(), None).unwrap();
        assert_eq!(ds.kind(), DataKind::Binary);
    }

    #[test]
    fn reports_error_locations() {
        match ingest_csv("1,2\n3\n".as_bytes(), None) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        match ingest_csv("1,2\n3,abc\n".as_bytes(), None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ingest_csv("".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(ingest_csv("1,NaN\n".as_bytes(), None).is_err());
    }

    #[test]
    fn metadata_checks_shape() {
        let meta = DatasetMeta::parse_json(r#"{"n":2,"d":2,"kind":"continuous"}"#).unwrap();
        assert!(ingest_csv("1,2\n3,4\n".as_bytes(), Some(&meta)).is_ok());
        assert!(ingest_csv("1,2\n".as_bytes(), Some(&meta)).is_err());
        let bin = DatasetMeta { kind: DataKind::Binary, ..meta };
        assert!(ingest_csv("1,2\n3,4\n".as_bytes(), Some(&bin)).is_err());
    }

    #[test]
    fn header_row_is_skipped_when_declared() {
        let meta = DatasetMeta {
            n: 1,
            d: 2,
            kind: DataKind::Continuous,
            seed: None,
            noise: None,
            graph_file: None,
            has_header: true,
        };
        let ds = ingest_csv("raf,mek\n0.5,2\n".as_bytes(), Some(&meta)).unwrap();
        assert_eq!(ds.x(), &array![[0.5, 2.0]]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = array![[0.1 + 0.2, -1e-300], [123456.789, 2.0f64.sqrt()]];
        let ds = Dataset::new(x.clone(), DataKind::Continuous).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = ingest_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.x(), &x);
    }
}
