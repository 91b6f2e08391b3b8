//! Numeric CSV tables: one header row, then rows of `f64` in scientific
//! notation with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("csv", format!("no column named {name:?} (have {:?})", self.header)))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Column by position, for readers that accept any header names.
    pub fn nth_column(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.header.len() {
            return Err(Error::parse("csv", format!("need at least {} columns, have {}", k + 1, self.header.len())));
        }
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Parses a table; blank lines and lines starting with `#` are skipped.
pub fn parse_table(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (_, head) = lines.next().ok_or_else(|| Error::parse("csv", "empty table"))?;
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err(Error::parse("csv header", format!("empty column name in {head:?}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let row = line
            .split(',')
            .map(|cell| {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(format!("csv line {}", lineno + 1), format!("{cell:?}: {e}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::parse(format!("csv line {}", lineno + 1), format!("non-finite value {cell:?}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::parse(
                format!("csv line {}", lineno + 1),
                format!("{} fields, header has {}", row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_table(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse { context: format!("{}: {context}", path.display()), message },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut t = CsvTable::new(&["Jt", "S"]);
        let vals = [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, f64::MIN_POSITIVE, 0.0];
        for v in vals {
            t.push(vec![v, -v * 7.0]);
        }
        let back = parse_table(&t.render()).unwrap();
        assert_eq!(back, t);
        assert!(t.render().lines().nth(2).unwrap().starts_with("3.3333333333333331e-1,"));
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(parse_table("").is_err());
        assert!(parse_table("a,b\n1,2,3\n").is_err());
        assert!(parse_table("a,b\n1,x\n").is_err());
        assert!(parse_table("a,,b\n").is_err());
        assert!(parse_table("a\nNaN\n").is_err());
        let t = parse_table("# comment\na, b\n\n1, 2\n").unwrap();
        assert_eq!(t.column("b").unwrap(), vec![2.0]);
        assert!(t.column("c").is_err());
    }
}
