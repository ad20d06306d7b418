//! Columnar observational data and its CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    /// Finite domain; cells hold indices into it.
    Categorical(Vec<String>),
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<u32>),
    Numeric(Vec<f64>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Numeric(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub data: ColumnData,
}

impl Column {
    pub fn categorical(name: impl Into<String>, domain: Vec<String>, codes: Vec<u32>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical(domain),
            data: ColumnData::Categorical(codes),
        }
    }

    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            data: ColumnData::Numeric(values),
        }
    }

    /// Categorical column from string labels; the domain is the given list.
    pub fn from_labels<S: AsRef<str>>(
        name: impl Into<String>,
        domain: &[&str],
        labels: &[S],
    ) -> Result<Self> {
        let name = name.into();
        let codes = labels
            .iter()
            .enumerate()
            .map(|(row, l)| {
                domain
                    .iter()
                    .position(|d| *d == l.as_ref())
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::DataDomain {
                        row: row + 1,
                        column: name.clone(),
                        value: l.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::categorical(
            name,
            domain.iter().map(|s| s.to_string()).collect(),
            codes,
        ))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ColumnKind::Numeric)
    }

    pub fn domain(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical(d) => Some(d),
            ColumnKind::Numeric => None,
        }
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.data {
            ColumnData::Categorical(c) => Some(c),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    fn cell(&self, row: usize) -> String {
        match (&self.kind, &self.data) {
            (ColumnKind::Categorical(d), ColumnData::Categorical(c)) => d[c[row] as usize].clone(),
            (_, ColumnData::Numeric(v)) => v[row].to_string(),
            _ => unreachable!("kind and data agree by construction"),
        }
    }
}

/// A rectangular table of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.data.len());
        let mut names = std::collections::BTreeSet::new();
        for col in &columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column `{}`",
                    col.name
                )));
            }
            if col.data.len() != rows {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {rows}",
                    col.name,
                    col.data.len()
                )));
            }
            match (&col.kind, &col.data) {
                (ColumnKind::Categorical(domain), ColumnData::Categorical(codes)) => {
                    if let Some(row) = codes.iter().position(|&c| c as usize >= domain.len()) {
                        return Err(Error::DataDomain {
                            row: row + 1,
                            column: col.name.clone(),
                            value: codes[row].to_string(),
                        });
                    }
                }
                (ColumnKind::Numeric, ColumnData::Numeric(_)) => {}
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column `{}` kind/data mismatch",
                        col.name
                    )))
                }
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Codes and domain of a categorical column.
    pub fn categorical(&self, name: &str) -> Result<(&[u32], &[String])> {
        let col = self.column(name)?;
        match (col.codes(), col.domain()) {
            (Some(c), Some(d)) => Ok((c, d)),
            _ => Err(Error::MixedType(format!(
                "column `{name}` is numeric, expected categorical"
            ))),
        }
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.column(name)?.values().ok_or_else(|| {
            Error::MixedType(format!("column `{name}` is categorical, expected numeric"))
        })
    }

    /// Keeps the rows whose index satisfies `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Dataset {
        let idx: Vec<usize> = (0..self.rows).filter(|&r| keep(r)).collect();
        self.take_rows(&idx)
    }

    /// Rows at the given indices, in order (indices may repeat).
    pub fn take_rows(&self, idx: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind.clone(),
                data: match &c.data {
                    ColumnData::Categorical(v) => {
                        ColumnData::Categorical(idx.iter().map(|&i| v[i]).collect())
                    }
                    ColumnData::Numeric(v) => {
                        ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect())
                    }
                },
            })
            .collect();
        Dataset {
            columns,
            rows: idx.len(),
        }
    }

    /// Writes RFC-4180 CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        };
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(io)?;
        for row in 0..self.rows {
            w.write_record(self.columns.iter().map(|c| c.cell(row)))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Reads CSV against a declared schema. Every schema column must be
    /// present in the header and no other column may appear.
    pub fn read_csv<R: Read>(input: R, schema: &[(String, ColumnKind)]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        };
        let header: Vec<String> = reader
            .headers()
            .map_err(io)?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();

        let declared: BTreeMap<&str, &ColumnKind> =
            schema.iter().map(|(n, k)| (n.as_str(), k)).collect();
        let missing: Vec<&str> = declared
            .keys()
            .copied()
            .filter(|n| !header.iter().any(|h| h == n))
            .collect();
        let extra: Vec<&str> = header
            .iter()
            .map(String::as_str)
            .filter(|h| !declared.contains_key(h))
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "missing columns [{}], unexpected columns [{}]",
                missing.join(", "),
                extra.join(", ")
            )));
        }

        let mut data: Vec<ColumnData> = header
            .iter()
            .map(|h| match declared[h.as_str()] {
                ColumnKind::Categorical(_) => ColumnData::Categorical(Vec::new()),
                ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            })
            .collect();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(io)?;
            // Row numbers count data rows from 1, header excluded.
            let row = i + 1;
            for (j, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                let name = &header[j];
                match (&mut data[j], declared[name.as_str()]) {
                    (ColumnData::Categorical(codes), ColumnKind::Categorical(domain)) => {
                        let code = domain.iter().position(|d| d == cell).ok_or_else(|| {
                            Error::DataDomain {
                                row,
                                column: name.clone(),
                                value: cell.to_string(),
                            }
                        })?;
                        codes.push(code as u32);
                    }
                    (ColumnData::Numeric(values), ColumnKind::Numeric) => {
                        let v: f64 = cell.parse().map_err(|_| Error::DataDomain {
                            row,
                            column: name.clone(),
                            value: cell.to_string(),
                        })?;
                        values.push(v);
                    }
                    _ => unreachable!(),
                }
            }
        }
        if data.first().map_or(0, ColumnData::len) == 0 {
            return Err(Error::EmptyFile);
        }
        let columns = header
            .into_iter()
            .zip(data)
            .map(|(name, data)| Column {
                kind: declared[name.as_str()].clone(),
                name,
                data,
            })
            .collect();
        Dataset::new(columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<(String, ColumnKind)> {
        vec![
            (
                "A".into(),
                ColumnKind::Categorical(vec!["0".into(), "1".into()]),
            ),
            ("X".into(), ColumnKind::Numeric),
        ]
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(
            Dataset::read_csv("A,X\n".as_bytes(), &schema()).unwrap_err(),
            Error::EmptyFile
        );
    }

    #[test]
    fn domain_error_reports_row() {
        let mut text = String::from("A,X\n");
        for _ in 0..6 {
            text.push_str("0,1.5\n");
        }
        text.push_str("2,1.0\n");
        let err = Dataset::read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert_eq!(
            err,
            Error::DataDomain {
                row: 7,
                column: "A".into(),
                value: "2".into()
            }
        );
    }

    #[test]
    fn schema_mismatch_names_columns() {
        let err = Dataset::read_csv("A,B\n0,1\n".as_bytes(), &schema()).unwrap_err();
        let Error::SchemaMismatch(msg) = err else {
            panic!("{err:?}")
        };
        assert!(msg.contains("[X]") && msg.contains("[B]"), "{msg}");
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(vec![
            Column::from_labels("A", &["0", "1"], &["1", "0", "1"]).unwrap(),
            Column::numeric("X", vec![0.1, -2.5, 1e-7]),
        ])
        .unwrap();
        let text = ds.to_csv_string();
        let back = Dataset::read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn rejects_ragged_columns() {
        let err = Dataset::new(vec![
            Column::numeric("X", vec![1.0]),
            Column::numeric("Y", vec![]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(_)));
    }
}
