//! CSV and JSON writers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::CliError;

/// C's `%.17g`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mant), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Comma-separated table with a header row.
pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text, width: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{}", g17(*v));
        }
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn to_json<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<S: Serialize>(path: &Path, v: &S) -> Result<(), CliError> {
    write_file(path, &to_json(v))
}

pub fn columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("{prefix}{k}")).collect()
}
