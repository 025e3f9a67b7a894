//! Shared CSV dialect: comma separated, header row, LF line endings and
//! floats written with 17 significant digits so that values round-trip.

use std::io::{self, Write};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_owned()
    } else if v > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

pub fn write_header<W: Write>(out: &mut W, columns: &[&str]) -> io::Result<()> {
    writeln!(out, "{}", columns.join(","))
}

pub fn write_row<W: Write>(out: &mut W, fields: &[String]) -> io::Result<()> {
    writeln!(out, "{}", fields.join(","))
}
