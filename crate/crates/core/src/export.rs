//! Plain-text table output shared by the CSV writers.

use std::io::{self, Write};

/// Formats a double with 17 significant digits (round-trip exact).
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_row<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        out.write_all(fmt_full(*v).as_bytes())?;
    }
    out.write_all(b"\n")
}
