//! Report serialization: JSON with 17 significant digits and tagged
//! infinities, and plain CSV.

use std::io;

use oqho_core::matfun::{CMat, RMat};
use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::ser::Formatter;

/// A float that serializes infinities and NaN as tagged objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let tag = match self.0 {
            x if x.is_finite() => return s.serialize_f64(x),
            x if x == f64::INFINITY => "inf",
            x if x == f64::NEG_INFINITY => "neg_inf",
            _ => "nan",
        };
        let mut map = s.serialize_map(Some(1))?;
        map.serialize_entry(tag, &true)?;
        map.end()
    }
}

pub fn real(x: f64) -> Real {
    Real(x)
}

pub type Rows = Vec<Vec<Real>>;

pub fn rows(a: &RMat) -> Rows {
    a.row_iter().map(|r| r.iter().map(|&x| Real(x)).collect()).collect()
}

/// A complex matrix as separate real and imaginary row arrays.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ComplexRows {
    pub re: Rows,
    pub im: Rows,
}

pub fn complex_rows(a: &CMat) -> ComplexRows {
    ComplexRows {
        re: rows(&a.map(|z| z.re)),
        im: rows(&a.map(|z| z.im)),
    }
}

/// 17 significant digits, the round-trip precision of an f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON with fixed field order and full float precision.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

/// CSV with a header; `None` cells are left empty.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<Option<String>>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(Option::unwrap_or_default).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
