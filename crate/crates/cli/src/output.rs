// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use instprobe::seed::sha256_hex;

use crate::error::{CliError, Result};

/// Writes through a `.partial` sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Fixed six-decimal rendering; negative zero prints as zero.
pub fn f6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Percentage points to one decimal.
pub fn pp(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

pub fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// A tab-separated table. The first line is `# config_hash=<hash>`, the
/// second the column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        debug_assert!(row.iter().all(|c| !c.contains(['\t', '\n'])));
        self.rows.push(row);
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\n{}\n", self.columns.join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        s
    }

    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        write_atomic(path, self.render(config_hash).as_bytes())
    }
}

/// Replaces characters that would break a TSV cell.
pub fn cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rendering() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), f6(-0.0)]);
        assert_eq!(t.render("abc"), "# config_hash=abc\na\tb\n1\t0.000000\n");
        assert_eq!(pp(-0.04), "0.0");
        assert_eq!(pp(-58.0), "-58.0");
        assert_eq!(cell("x\ty"), "x y");
    }
}
