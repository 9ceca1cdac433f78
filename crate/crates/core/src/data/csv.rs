use std::path::Path;

use serde::{Deserialize, Serialize};

use super::datetime::parse_timestamp;
use super::series::TimeSeries;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Every value column.
    #[default]
    Multivariate,
    /// Only the final value column.
    UnivariateLast,
}

/// Reads a headed, comma-separated series.
///
/// A first column named `date` whose every entry parses as a timestamp becomes
/// the timestamp axis; otherwise every column must be numeric. Rows are taken
/// in file order. Error locations are 1-based file lines and columns.
pub fn load_csv(path: impl AsRef<Path>, target: TargetMode) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            ::csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 2,
            col: 0,
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                col: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }

    let timestamps = if headers[0].eq_ignore_ascii_case("date") {
        records
            .iter()
            .map(|r| parse_timestamp(&r[0]))
            .collect::<Result<Vec<_>>>()
            .ok()
    } else {
        None
    };
    let first_value = usize::from(timestamps.is_some());
    if first_value >= headers.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no value columns".into(),
        });
    }
    let cols: Vec<usize> = match target {
        TargetMode::Multivariate => (first_value..headers.len()).collect(),
        TargetMode::UnivariateLast => vec![headers.len() - 1],
    };
    let mut data = Vec::with_capacity(records.len() * cols.len());
    for (i, rec) in records.iter().enumerate() {
        for &c in &cols {
            let field = &rec[c];
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                col: c + 1,
                message: format!("cannot parse {field:?} in column {:?} as a number", headers[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 2,
                    col: c + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(v);
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TimeSeries {
        name,
        columns: cols.iter().map(|&c| headers[c].clone()).collect(),
        values: Matrix::from_vec(records.len(), cols.len(), data)?,
        timestamps,
        normalization: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_dated_multivariate_file() {
        let f = file("date,a,b\n2020-01-01 00:00:00,1,2\n2020-01-01 00:15:00,3,4\n2020-01-01 00:30:00,5,6\n");
        let ts = load_csv(f.path(), TargetMode::Multivariate).unwrap();
        assert_eq!(ts.values.shape(), (3, 2));
        assert_eq!(ts.columns, vec!["a", "b"]);
        assert_eq!(ts.timestamps.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn univariate_keeps_last_column() {
        let f = file("date,a,b,OT\n2020-01-01,1,2,7\n2020-01-02,3,4,8\n2020-01-03,5,6,9\n");
        let ts = load_csv(f.path(), TargetMode::UnivariateLast).unwrap();
        assert_eq!(ts.values.as_slice(), &[7.0, 8.0, 9.0]);
        assert_eq!(ts.columns, vec!["OT"]);
    }

    #[test]
    fn numeric_only_file() {
        let f = file("x,y\n1,2\n3,4\n");
        let ts = load_csv(f.path(), TargetMode::Multivariate).unwrap();
        assert!(ts.timestamps.is_none());
        assert_eq!(ts.values.shape(), (2, 2));
    }

    #[test]
    fn bad_cell_names_location() {
        let f = file("date,a\n2020-01-01,1\n2020-01-02,oops\n");
        match load_csv(f.path(), TargetMode::Multivariate) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        let f = file("date,a\n");
        assert!(matches!(load_csv(f.path(), TargetMode::Multivariate), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv("/nonexistent/file.csv", TargetMode::Multivariate).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/file.csv"));
    }
}
