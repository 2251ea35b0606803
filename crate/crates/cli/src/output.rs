use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text built in memory and written in one go.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn with_header(columns: &[&str]) -> Self {
        let mut text = columns.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// Row with leading text cells followed by numbers.
    pub fn mixed_row(&mut self, labels: &[&str], values: &[f64]) {
        let mut cells: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        cells.extend(values.iter().map(|v| fmt_f64(*v)));
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    /// Adds a trailing text cell to the most recent row.
    pub fn append_to_last_row(&mut self, cell: &str) {
        if self.text.ends_with('\n') {
            self.text.pop();
        }
        self.text.push(',');
        self.text.push_str(cell);
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.text.as_bytes())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::with_header(&["a", "b"]);
        c.row(&[1.0, 2.5]);
        c.mixed_row(&["x"], &[0.0]);
        assert_eq!(c.as_str(), "a,b\n1.0000000000000000e0,2.5000000000000000e0\nx,0.0000000000000000e0\n");
    }
}
