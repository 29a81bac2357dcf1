//! Plain CSV output shared by all writers: `.` decimal separator, `\n`
//! line endings, one header row, floats with 17 significant digits.

use std::io::Write;

use crate::error::Result;

/// 17 significant digits in scientific notation; parses back bit-exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_header<W: Write>(w: &mut W, columns: &[&str]) -> Result<()> {
    writeln!(w, "{}", columns.join(","))?;
    Ok(())
}

pub fn write_row<W: Write>(w: &mut W, fields: &[String]) -> Result<()> {
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

pub fn float_row<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let fields: Vec<String> = values.iter().map(|&x| fmt_float(x)).collect();
    write_row(w, &fields)
}
