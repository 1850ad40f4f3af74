//! CSV ingestion and export.
//!
//! Input: one row per subject, one column per node, `.` as the decimal
//! point. The first row is taken as node names when any of its fields fails
//! to parse as a number. Ragged rows are rejected.
//!
//! Output floats use 17 significant digits (`{:.16e}`) so they round-trip
//! exactly.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_field(s: &str) -> Option<f64> {
    let t = s.trim();
    // Rust's float parser accepts "inf"/"nan"; data files should not.
    let v: f64 = t.parse().ok()?;
    v.is_finite().then_some(v)
}

pub fn read_data_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let file = std::fs::File::open(path)?;
    read_data(file)
}

pub fn read_data<R: Read>(reader: R) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: w,
                    got: record.len(),
                });
            }
        }
        width = Some(record.len());
        let parsed: Vec<Option<f64>> = record.iter().map(parse_field).collect();
        if r == 0 && parsed.iter().any(Option::is_none) {
            names = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (c, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::Parse {
                        row: r,
                        col: c,
                        value: record[c].to_owned(),
                    })
                }
            }
        }
        rows.push(row);
    }
    let data = DataMatrix::from_rows(&rows)?;
    match names {
        Some(n) => data.with_names(n),
        None => Ok(data),
    }
}

/// Dense matrix, one CSV row per matrix row, with an optional header.
pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Edge list `i,j,value` for entries with `|value| > threshold`.
pub fn write_edge_list<W: Write>(
    mut w: W,
    edges: impl IntoIterator<Item = (usize, usize, f64)>,
    threshold: f64,
) -> Result<()> {
    writeln!(w, "i,j,value")?;
    for (i, j, v) in edges {
        if v.abs() > threshold {
            writeln!(w, "{i},{j},{}", fmt_f64(v))?;
        }
    }
    Ok(())
}

/// Reads back an `i,j,value` edge list.
pub fn read_edge_list<R: Read>(reader: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::RaggedRow {
                row: r + 1,
                expected: 3,
                got: rec.len(),
            });
        }
        let bad = |c: usize| Error::Parse {
            row: r + 1,
            col: c,
            value: rec[c].to_owned(),
        };
        let i = rec[0].parse().map_err(|_| bad(0))?;
        let j = rec[1].parse().map_err(|_| bad(1))?;
        let v = parse_field(&rec[2]).ok_or_else(|| bad(2))?;
        out.push((i, j, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let d = read_data("a,b\n1,2\n3,5\n".as_bytes()).unwrap();
        assert_eq!(d.names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.n(), 2);
        let d = read_data("1,2\n3,5\n0.5,1e-3\n".as_bytes()).unwrap();
        assert!(d.names().is_none());
        assert_eq!(d.values()[(2, 1)], 1e-3);
    }

    #[test]
    fn ragged_and_garbage_rejected() {
        assert!(matches!(
            read_data("1,2\n3\n".as_bytes()),
            Err(Error::RaggedRow { row: 1, expected: 2, got: 1 })
        ));
        assert!(matches!(
            read_data("1,2\n3,x\n".as_bytes()),
            Err(Error::Parse { row: 1, col: 1, .. })
        ));
        assert!(read_data("1,2\n3,nan\n".as_bytes()).is_err());
    }

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.4), "4.0000000000000002e-1");
    }

    #[test]
    fn edge_list_threshold_and_round_trip() {
        let mut buf = Vec::new();
        write_edge_list(&mut buf, vec![(0, 1, 0.5), (1, 2, 0.01), (0, 2, -0.3)], 0.1).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,j,value\n0,1,"));
        let back = read_edge_list(&buf[..]).unwrap();
        assert_eq!(back, vec![(0, 1, 0.5), (0, 2, -0.3)]);
    }
}
