//! CSV ingestion and emission. Samples are rows, dimensions are columns.

use crate::error::{Error, Result};
use ndarray::Array2;
use std::io::Write;
use std::path::Path;

/// An ingested dataset: finite values only, with the number of dropped rows
/// reported alongside.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub values: Array2<f64>,
    pub column_names: Option<Vec<String>>,
    /// Rows rejected because they contained non-finite entries.
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Load a numeric CSV file. Rows with non-finite entries are dropped and
/// counted; ragged rows and unparseable cells are hard errors carrying the
/// offending line number.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(map_csv_error)?;

    let column_names = if has_header {
        Some(
            reader
                .headers()
                .map_err(map_csv_error)?
                .iter()
                .map(str::to_owned)
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rejected = 0usize;
    let mut dim: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 1);
        let mut row = Vec::with_capacity(record.len());
        let mut finite = true;
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse '{field}' as a number"),
            })?;
            if !v.is_finite() {
                finite = false;
            }
            row.push(v);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        if finite {
            rows.push(row);
        } else {
            rejected += 1;
        }
    }

    let d = dim.ok_or_else(|| Error::Parse {
        line: 0,
        message: "file contains no data rows".into(),
    })?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "every row was rejected as non-finite".into(),
        });
    }

    let mut values = Array2::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[(i, j)] = v;
        }
    }

    Ok(Dataset {
        values,
        column_names,
        rejected_rows: rejected,
    })
}

fn map_csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::Parse {
            line: pos.as_ref().map(|p| p.line() as usize).unwrap_or(0),
            message: format!("expected {expected_len} columns, found {len}"),
        },
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Write a matrix as CSV with the given (or generated `x0..`) header.
pub fn write_matrix_csv(path: &Path, values: &Array2<f64>, names: Option<&[String]>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_header(&mut w, values.ncols(), names)?;
    for row in values.outer_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_header<W: Write>(w: &mut W, d: usize, names: Option<&[String]>) -> Result<()> {
    match names {
        Some(names) => writeln!(w, "{}", names.join(","))?,
        None => {
            let generated: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
            writeln!(w, "{}", generated.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_numeric_file() {
        let f = write_temp("1.0,2.0\n3.5,-4.0\n0.25,1e3\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.rejected_rows, 0);
        assert!(ds.column_names.is_none());
        assert_eq!(ds.values[(2, 1)], 1000.0);
    }

    #[test]
    fn drops_non_finite_rows_with_count() {
        let f = write_temp("1.0,2.0\nNaN,3.0\n5.0,6.0\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.rejected_rows, 1);
    }

    #[test]
    fn preserves_header_names() {
        let f = write_temp("a,b\n1,2\n3,4\n");
        let ds = load_csv(f.path(), true).unwrap();
        assert_eq!(ds.column_names.as_deref().unwrap(), ["a", "b"]);
        assert_eq!(ds.n_rows(), 2);
    }

    #[test]
    fn ragged_rows_report_the_line() {
        let f = write_temp("1,2\n3,4,5\n");
        match load_csv(f.path(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_cells_report_the_line() {
        let f = write_temp("1,2\nx,4\n");
        match load_csv(f.path(), false) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("'x'"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_temp("");
        assert!(load_csv(f.path(), false).is_err());
    }

    #[test]
    fn matrix_round_trips_through_csv() {
        let values = ndarray::array![[1.5, -2.25], [0.1, 1e-12]];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_matrix_csv(f.path(), &values, None).unwrap();
        let ds = load_csv(f.path(), true).unwrap();
        assert_eq!(ds.column_names.as_deref().unwrap(), ["x0", "x1"]);
        assert_eq!(ds.values, values);
    }
}
