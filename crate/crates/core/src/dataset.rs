//! Tabular dataset loading and addressing.
//!
//! A [`Dataset`] is an immutable table of `n` records over `m` named numeric
//! attributes. All values are `f64` and guaranteed finite after load; rows
//! with non-numeric or missing cells are either dropped (with a count) or
//! rejected, depending on [`NaPolicy`]. Record ids are dense `0..n-1` in file
//! order regardless of drops.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// One row of a dataset: a dense id plus the attribute values in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: usize,
    pub values: Vec<f64>,
}

/// An immutable table of records sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<String>,
    records: Vec<Record>,
}

/// How to treat cells that do not parse as finite numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaPolicy {
    /// Drop the whole row and count it.
    #[default]
    Drop,
    /// Fail on the first bad cell.
    Error,
}

/// CSV load options. The header row is always required.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub na_policy: NaPolicy,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            na_policy: NaPolicy::Drop,
        }
    }
}

/// A loaded dataset plus the number of rows dropped under [`NaPolicy::Drop`].
#[derive(Debug)]
pub struct LoadResult {
    pub dataset: Dataset,
    pub dropped: usize,
}

impl Dataset {
    /// Build a dataset from a schema and rows of values. Rows must all have
    /// schema length; ids are assigned densely in order.
    pub fn from_rows(schema: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = schema.len();
        for (i, name) in schema.iter().enumerate() {
            if schema[..i].contains(name) {
                return Err(Error::ConfigInvalid {
                    reason: format!("duplicate attribute name {name:?}"),
                });
            }
        }
        let mut records = Vec::with_capacity(rows.len());
        for (id, values) in rows.into_iter().enumerate() {
            if values.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: values.len(),
                });
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::BadCell {
                    row: id,
                    column: String::new(),
                    value: v.to_string(),
                });
            }
            records.push(Record { id, values });
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Record count `n`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Attribute count `m`.
    pub fn width(&self) -> usize {
        self.schema.len()
    }

    /// Index of an attribute in the schema.
    pub fn attr_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownAttribute {
                name: name.to_string(),
            })
    }

    /// All values of one attribute, in record order.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.attr_index(name)?;
        Ok(self.records.iter().map(|r| r.values[idx]).collect())
    }

    /// Write the dataset as CSV. Values use the shortest representation that
    /// parses back to the same bits, so write-then-load round-trips exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let io_err = |source: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(&self.schema).map_err(io_err)?;
        for rec in &self.records {
            w.write_record(rec.values.iter().map(|v| v.to_string()))
                .map_err(io_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

/// Load a comma-separated (by default) UTF-8 file with one header row.
pub fn load_csv(path: &Path, options: LoadOptions) -> Result<LoadResult> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_csv_from(file, options).map_err(|e| match e {
        // Attach the path to errors produced below, which cannot know it.
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Load from any reader; used by [`load_csv`] and directly by tests.
pub fn load_csv_from<R: Read>(reader: R, options: LoadOptions) -> Result<LoadResult> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false) // ragged rows are an error under every policy
        .from_reader(reader);

    let reader_path = || std::path::PathBuf::from("<reader>");
    let headers = rdr
        .headers()
        .map_err(|source| Error::Csv {
            path: reader_path(),
            source,
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect::<Vec<_>>();
    for (i, name) in headers.iter().enumerate() {
        if headers[..i].contains(name) {
            return Err(Error::ConfigInvalid {
                reason: format!("duplicate attribute name {name:?}"),
            });
        }
    }

    let m = headers.len();
    let mut records = Vec::new();
    let mut dropped = 0usize;

    for (row_no, row) in rdr.records().enumerate() {
        let row = row.map_err(|source| Error::Csv {
            path: reader_path(),
            source,
        })?;
        let mut values = Vec::with_capacity(m);
        let mut bad: Option<(String, String)> = None;
        for (col, cell) in row.iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad = Some((headers[col].clone(), cell.to_string()));
                    break;
                }
            }
        }
        match bad {
            None => records.push(values),
            Some((column, value)) => match options.na_policy {
                NaPolicy::Drop => dropped += 1,
                NaPolicy::Error => {
                    return Err(Error::BadCell {
                        row: row_no,
                        column,
                        value,
                    })
                }
            },
        }
    }

    if records.is_empty() {
        return Err(Error::NoUsableRecords);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with non-numeric or missing cells");
    }
    let dataset = Dataset::from_rows(headers, records)?;
    Ok(LoadResult { dataset, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load_str(s: &str, options: LoadOptions) -> Result<LoadResult> {
        load_csv_from(s.as_bytes(), options)
    }

    #[test]
    fn parses_simple_file() {
        let res = load_str("a,b\n1,2\n3,4\n5,6\n", LoadOptions::default()).unwrap();
        assert_eq!(res.dataset.len(), 3);
        assert_eq!(res.dataset.width(), 2);
        assert_eq!(res.dropped, 0);
        assert_eq!(res.dataset.schema(), &["a", "b"]);
    }

    #[test]
    fn na_policy_drop_counts_rows() {
        let res = load_str("a,b\n1,2\nNA,4\n5,6\n", LoadOptions::default()).unwrap();
        assert_eq!(res.dataset.len(), 2);
        assert_eq!(res.dropped, 1);
        // ids are dense after the drop
        let ids: Vec<usize> = res.dataset.records().iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(res.dataset.records()[1].values, vec![5.0, 6.0]);
    }

    #[test]
    fn na_policy_error_fails_on_first_bad_cell() {
        let err = load_str(
            "a,b\n1,2\nNA,4\n",
            LoadOptions {
                na_policy: NaPolicy::Error,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 1, .. }), "{err}");
    }

    #[test]
    fn infinities_are_bad_cells() {
        let res = load_str("a\n1\ninf\n-inf\nNaN\n2\n", LoadOptions::default()).unwrap();
        assert_eq!(res.dataset.len(), 2);
        assert_eq!(res.dropped, 3);
    }

    #[test]
    fn ragged_rows_error_even_under_drop_policy() {
        let err = load_str("a,b\n1,2\n3\n", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }

    #[test]
    fn zero_usable_records_is_an_error() {
        let err = load_str("a,b\nx,y\n", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoUsableRecords));
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = load_str("a,a\n1,2\n", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid { .. }));
    }

    #[test]
    fn column_in_record_order() {
        let res = load_str("a,b\n1,2\n3,4\n", LoadOptions::default()).unwrap();
        assert_eq!(res.dataset.column("a").unwrap(), vec![1.0, 3.0]);
        assert!(matches!(
            res.dataset.column("z"),
            Err(Error::UnknownAttribute { .. })
        ));
    }

    #[test]
    fn tab_delimiter() {
        let res = load_str(
            "a\tb\n1\t2\n",
            LoadOptions {
                delimiter: b'\t',
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.dataset.column("b").unwrap(), vec![2.0]);
    }

    proptest! {
        // Write-then-load yields identical schema and bit-identical values.
        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(
            proptest::collection::vec(-1e12f64..1e12, 3), 1..40)
        ) {
            let schema = vec!["x".to_string(), "y".to_string(), "z".to_string()];
            let ds = Dataset::from_rows(schema, rows).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            ds.write_csv(&path).unwrap();
            let back = load_csv(&path, LoadOptions::default()).unwrap();
            prop_assert_eq!(back.dropped, 0);
            prop_assert_eq!(&back.dataset, &ds);
        }
    }
}
