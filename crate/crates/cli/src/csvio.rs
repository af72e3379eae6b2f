//! Reading the CSV series this tool writes (`#` comment lines, one header
//! row, numeric columns).

use std::path::Path;

use conveyor_core::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Usage(format!("no column `{name}` (have {})", self.headers.join(", "))))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn column_at(&self, idx: usize) -> Result<(String, Vec<f64>)> {
        let name = self
            .headers
            .get(idx)
            .ok_or_else(|| Error::Usage(format!("no column {idx} (have {})", self.headers.len())))?;
        Ok((name.clone(), self.rows.iter().map(|r| r[idx]).collect()))
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(csv_message(&e)))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse("empty CSV: no header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(csv_message(&e)))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(i, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {line}: column `{}` holds `{field}`, not a number", headers[i]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("CSV has a header but no data rows".into()));
    }
    Ok(Table { headers, rows })
}

fn csv_message(e: &csv::Error) -> String {
    match e.position() {
        Some(p) => format!("line {}: {e}", p.line()),
        None => e.to_string(),
    }
}
