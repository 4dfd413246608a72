//! CSV output with fixed six-significant-digit floats.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::CliError;

/// `%.6g`: six significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e6)`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

/// Writes one CSV file, creating parent directories.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| runtime(path, e))?;
        }
        let mut writer = csv::Writer::from_path(path).map_err(|e| runtime(path, e))?;
        writer.write_record(header).map_err(|e| runtime(path, e))?;
        Ok(Table { path: path.to_path_buf(), writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| runtime(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|e| runtime(&self.path, e))?;
        Ok(self.path)
    }
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        let cases = [
            (10.64, "10.64"),
            (100090.0, "100090"),
            (1234567.0, "1.23457e+06"),
            (999999.7, "1e+06"),
            (0.000012345678, "1.23457e-05"),
            (0.0001234, "0.0001234"),
            (-2.5, "-2.5"),
            (1.0 / 3.0, "0.333333"),
            (9.88, "9.88"),
            (0.0, "0"),
            (f64::NAN, "nan"),
            (2.0f64.ln(), "0.693147"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g(x), s, "{x}");
        }
    }
}
