//! File formats shared by the pipeline and the command-line tool.
//!
//! * matrix CSV: one row per line, comma separated, `{:.16e}` numbers
//! * successor JSON envelope: `n`, `gamma`, `horizon`, `state_words`, `values`
//! * labeled-point CSV: `word,category,split` followed by numeric columns

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sr::SuccessorMatrix;

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &matrix_to_csv(m))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("`{f}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {first} columns, found {}", row.len()),
                ));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct SuccessorEnvelope {
    n: usize,
    gamma: f64,
    horizon: usize,
    state_words: Vec<String>,
    values: Vec<Vec<f64>>,
}

pub fn successor_to_json(m: &SuccessorMatrix) -> Result<String> {
    let env = SuccessorEnvelope {
        n: m.n(),
        gamma: m.gamma(),
        horizon: m.horizon(),
        state_words: m.state_words().to_vec(),
        values: m.values().to_rows(),
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

pub fn write_successor_json(m: &SuccessorMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &successor_to_json(m)?)
}

pub fn read_successor_json(path: impl AsRef<Path>) -> Result<SuccessorMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let env: SuccessorEnvelope = serde_json::from_reader(BufReader::new(file))?;
    if env.n != env.values.len() {
        return Err(Error::DimensionMismatch {
            expected: env.n,
            actual: env.values.len(),
        });
    }
    SuccessorMatrix::new(Matrix::from_rows(&env.values)?, env.gamma, env.horizon, env.state_words)
}

/// A labeled row: `word,category,split,<values...>`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRow {
    pub word: String,
    pub category: String,
    pub split: Split,
    pub values: Vec<f64>,
}

pub fn labeled_rows_to_csv(columns: &[String], rows: &[LabeledRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["word".to_string(), "category".into(), "split".into()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for row in rows {
        if row.values.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                actual: row.values.len(),
            });
        }
        let mut record = vec![row.word.clone(), row.category.clone(), row.split.to_string()];
        record.extend(row.values.iter().map(|&v| fmt_f64(v)));
        w.write_record(&record)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_labeled_csv(columns: &[String], rows: &[LabeledRow], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &labeled_rows_to_csv(columns, rows)?)
}

/// Returns the numeric column names and the rows.
pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<LabeledRow>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4 || headers.iter().take(3).collect::<Vec<_>>() != ["word", "category", "split"] {
        return Err(Error::parse(
            path,
            1,
            "expected header `word,category,split,<value columns...>`",
        ));
    }
    let columns: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let split: Split = record[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        let values = record
            .iter()
            .skip(3)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, line, format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(LabeledRow {
            word: record[0].to_string(),
            category: record[1].to_string(),
            split,
            values,
        });
    }
    Ok((columns, rows))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip() {
        let m = Matrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_matrix_csv(&m, &p).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        assert_eq!(fmt_f64(1.25), "1.2500000000000000e0");
    }

    #[test]
    fn successor_envelope_round_trip() {
        let m = SuccessorMatrix::new(
            Matrix::from_rows(&[vec![1.25, 0.5], vec![0.5, 1.0 / 3.0]]).unwrap(),
            0.5,
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sr.json");
        write_successor_json(&m, &p).unwrap();
        assert_eq!(read_successor_json(&p).unwrap(), m);
    }

    #[test]
    fn labeled_csv_round_trip_and_errors() {
        let rows = vec![
            LabeledRow { word: "dog".into(), category: "animal".into(), split: Split::Train, values: vec![0.1, 2.0] },
            LabeledRow { word: "car".into(), category: "vehicle".into(), split: Split::Validation, values: vec![-1.0, 0.0] },
        ];
        let cols = vec!["x".to_string(), "y".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        write_labeled_csv(&cols, &rows, &p).unwrap();
        assert_eq!(read_labeled_csv(&p).unwrap(), (cols, rows));

        fs::write(&p, "word,category,split,x\ndog,animal,test,1\n").unwrap();
        assert!(read_labeled_csv(&p).unwrap_err().to_string().contains(":2:"));
        fs::write(&p, "word,category,x\n").unwrap();
        assert!(read_labeled_csv(&p).is_err());
    }
}
