use std::io::Write;

use digitdrift_core::exactdist::{format_decimal, format_rational};
use digitdrift_core::Rational;
use serde::Serialize;

use crate::args::Format;
use crate::failure::Failure;

/// Significant digits of every decimal rendering of a rational.
pub const DECIMAL_DIGITS: usize = 15;

pub fn decimal(q: &Rational) -> String {
    format_decimal(q, DECIMAL_DIGITS)
}

/// `(num/den, decimal)`
pub fn both(q: &Rational) -> (String, String) {
    (format_rational(q), decimal(q))
}

/// Writes `rows` as a CSV table with a header, or as a JSON array of objects.
pub fn write_rows<T: Serialize>(out: &mut dyn Write, format: Format, rows: &[T]) -> Result<(), Failure> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
