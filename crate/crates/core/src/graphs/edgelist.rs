//! Edge-list CSV: header `src,dst,weight`, zero-based node ids.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

const HEADER: [&str; 3] = ["src", "dst", "weight"];

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { row, column, message: message.into() }
}

/// Parses edge-list CSV text. Rows and columns in errors are 1-based; row 1 is the header.
pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(parse_err(1, 1, "empty edge list: missing `src,dst,weight` header")),
    };
    if header.len() != 3 || header.iter().zip(HEADER).any(|(a, b)| a != b) {
        return Err(parse_err(1, 1, format!("expected header `src,dst,weight`, got {header:?}")));
    }
    let mut edges = Vec::new();
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec?;
        if rec.len() != 3 {
            return Err(parse_err(row, rec.len().min(3) + 1, format!("expected 3 fields, got {}", rec.len())));
        }
        let id = |c: usize| -> Result<usize> {
            rec[c].parse::<usize>().map_err(|e| parse_err(row, c + 1, format!("bad node id {:?}: {e}", &rec[c])))
        };
        let (src, dst) = (id(0)?, id(1)?);
        let weight = rec[2].parse::<f64>().map_err(|e| parse_err(row, 3, format!("bad weight {:?}: {e}", &rec[2])))?;
        if !weight.is_finite() {
            return Err(parse_err(row, 3, "weight must be finite"));
        }
        if src == dst {
            return Err(parse_err(row, 2, format!("self-loop on node {src}")));
        }
        edges.push(Edge { src, dst, weight });
    }
    Ok(edges)
}

/// Assembles a d×d matrix. `d = None` infers `max id + 1`.
pub fn edges_to_matrix(edges: &[Edge], d: Option<usize>) -> Result<WeightMatrix> {
    let inferred = edges.iter().map(|e| e.src.max(e.dst) + 1).max().unwrap_or(1);
    let d = d.unwrap_or(inferred);
    if inferred > d {
        return Err(invalid(format!("edge list references node {} but d = {d}", inferred - 1)));
    }
    let mut w = Array2::<f64>::zeros((d, d));
    for e in edges {
        if w[[e.src, e.dst]] != 0.0 {
            return Err(invalid(format!("duplicate edge {}->{}", e.src, e.dst)));
        }
        w[[e.src, e.dst]] = e.weight;
    }
    WeightMatrix::new(w)
}

pub fn read_edge_list<R: Read>(mut reader: R, d: Option<usize>) -> Result<WeightMatrix> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    edges_to_matrix(&parse_edge_list(&text)?, d)
}

/// Writes edges with `|w| > zero_tol` in row-major order. Weights use the
/// shortest representation that round-trips exactly.
pub fn write_edge_list<W: Write>(mut writer: W, w: &WeightMatrix, zero_tol: f64) -> Result<()> {
    writeln!(writer, "src,dst,weight")?;
    for (i, j, x) in w.edges(zero_tol) {
        writeln!(writer, "{i},{j},{x:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn parses_and_reports_locations() {
        let e = parse_edge_list("src,dst,weight\n0,1,0.5\n2,0,-1e-3\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1], Edge { src: 2, dst: 0, weight: -1e-3 });

        match parse_edge_list("src,dst,weight\n0,1,0.5\n0,x,1\n") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("a,b,c\n").is_err());
        assert!(parse_edge_list("src,dst,weight\n1,1,2\n").is_err());
        assert!(parse_edge_list("src,dst,weight\n0,1,inf\n").is_err());
    }

    #[test]
    fn matrix_assembly_checks_ids() {
        let e = parse_edge_list("src,dst,weight\n0,3,1\n").unwrap();
        assert!(edges_to_matrix(&e, Some(3)).is_err());
        assert_eq!(edges_to_matrix(&e, None).unwrap().d(), 4);
        let dup = parse_edge_list("src,dst,weight\n0,1,1\n0,1,2\n").unwrap();
        assert!(edges_to_matrix(&dup, None).is_err());
    }

    #[test]
    fn writes_full_precision() {
        let w = WeightMatrix::new(array![[0.0, 0.1 + 0.2], [0.0, 0.0]]).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &w, 0.0).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "src,dst,weight\n0,1,0.30000000000000004\n");
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let mut a = Array2::<f64>::zeros((4, 4));
            let mut k = 0;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        a[[i, j]] = vals[k];
                        k += 1;
                    }
                }
            }
            let w = WeightMatrix::new(a).unwrap();
            let mut buf = Vec::new();
            write_edge_list(&mut buf, &w, 0.0).unwrap();
            let back = read_edge_list(buf.as_slice(), Some(4)).unwrap();
            prop_assert_eq!(back, w);
        }
    }
}
