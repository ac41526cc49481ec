//! CSV emission for experiment reports: fixed schemas, full-precision
//! numbers, and byte-stable output so identical runs produce identical files.

use crate::error::{Error, Result};
use std::path::Path;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Text(String),
    Num(f64),
    Int(i64),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Text(s) => s.clone(),
            // 17 significant digits: round-trips every f64
            Field::Num(x) => format!("{x:.16e}"),
            Field::Int(k) => k.to_string(),
        }
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}
impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}
impl From<i64> for Field {
    fn from(k: i64) -> Self {
        Field::Int(k)
    }
}
impl From<u64> for Field {
    fn from(k: u64) -> Self {
        Field::Int(k as i64)
    }
}

/// Writes rows under the given header schema. Every row must match the
/// schema width; the mismatch is reported before anything is written.
pub fn write_csv(path: &Path, schema: &[&str], rows: &[Vec<Field>]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != schema.len() {
            return Err(Error::InvalidParams(format!(
                "row {i} has {} fields for a schema of {}",
                row.len(),
                schema.len()
            )));
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(schema)?;
    for row in rows {
        w.write_record(row.iter().map(Field::render))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_rows() {
        let dir = std::env::temp_dir().join("frachardy-report-empty.csv");
        write_csv(&dir, &["a", "b"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&dir).unwrap(), "a,b\n");
    }

    #[test]
    fn round_trip_preserves_values() {
        let path = std::env::temp_dir().join("frachardy-report-rt.csv");
        let x = std::f64::consts::PI * 1e-7;
        write_csv(&path, &["name", "value", "count"], &[vec!["pi".into(), x.into(), 42i64.into()]])
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], "pi");
        assert_eq!(cols[1].parse::<f64>().unwrap(), x);
        assert_eq!(cols[2], "42");
    }

    #[test]
    fn schema_mismatch_rejected_before_write() {
        let path = std::env::temp_dir().join("frachardy-report-bad.csv");
        let _ = std::fs::remove_file(&path);
        let err = write_csv(&path, &["a", "b"], &[vec![Field::Int(1)]]);
        assert!(err.is_err());
        assert!(!path.exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let p1 = std::env::temp_dir().join("frachardy-report-d1.csv");
        let p2 = std::env::temp_dir().join("frachardy-report-d2.csv");
        let rows = vec![vec![Field::Num(1.0 / 3.0), Field::Num(2e300)]];
        write_csv(&p1, &["x", "y"], &rows).unwrap();
        write_csv(&p2, &["x", "y"], &rows).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
