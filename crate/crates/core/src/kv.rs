//! Flat `key = value` documents (a TOML subset) used for bitcell, technology
//! and anchor files.

use toml::{Table, Value};

use crate::error::{Error, Result};

pub(crate) fn parse(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Parse(e.to_string()))
}

pub(crate) fn number(table: &Table, field: &str) -> Result<f64> {
    match table.get(field) {
        None => Err(Error::MissingField(field.to_string())),
        Some(Value::Float(v)) => Ok(*v),
        Some(Value::Integer(v)) => Ok(*v as f64),
        Some(other) => Err(Error::invalid(
            field,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

pub(crate) fn positive(table: &Table, field: &str) -> Result<f64> {
    let v = number(table, field)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::NonPositiveValue(field.to_string()))
    }
}

pub(crate) fn string<'a>(table: &'a Table, field: &str) -> Result<&'a str> {
    match table.get(field) {
        None => Err(Error::MissingField(field.to_string())),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(Error::invalid(
            field,
            format!("expected a string, found {}", other.type_str()),
        )),
    }
}

/// Formats a float so that parsing it back yields the identical bit pattern.
pub(crate) fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
