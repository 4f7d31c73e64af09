//! Plain-text numeric files: whitespace-separated columns with `#` headers and
//! `key = value` manifests. Every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// `x` with 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Renders rows of numbers under a `# col col …` header.
pub fn table_text(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", header.join(" "));
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_text(path, &table_text(header, rows))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// `key = value` lines in the given order.
pub fn manifest_text(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Numeric rows of a column file; blank lines and `#` comments are skipped.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: `{tok}`: {e}", i + 1))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_is_exact() {
        let rows = vec![vec![0.1, -1.0 / 3.0], vec![std::f64::consts::PI, 1e-300]];
        let text = table_text(&["a", "b"], &rows);
        assert_eq!(parse_table(&text).unwrap(), rows);
        assert!(parse_table("1 x\n").is_err());
    }
}
