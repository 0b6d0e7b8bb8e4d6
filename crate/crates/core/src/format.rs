//! Byte-stable text output: 17-significant-digit floats, JSON with sorted
//! keys, and a dense complex matrix dump.

use std::io;

use faer::{Mat, MatRef};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::c64;
use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, e.g. `1.2500000000000000e-1`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `re±imj` with both parts in [`fmt_f64`] precision.
pub fn fmt_c64(z: c64) -> String {
    format!("{:.16e}{:+.16e}j", z.re, z.im)
}

/// Pretty-printing JSON formatter that writes every float through [`fmt_f64`].
struct FixedFloatFormatter<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Formatter for FixedFloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Serialises `value` as pretty JSON with lexicographically ordered keys and
/// fixed float formatting, followed by a newline. Non-finite floats become
/// `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    // going through Value sorts every object's keys
    let tree = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        FixedFloatFormatter {
            pretty: PrettyFormatter::with_indent(b"  "),
        },
    );
    tree.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
}

/// First line `"N M"`, then one row per line of space-separated `re±imj` tokens.
pub fn write_matrix_dump(m: MatRef<'_, c64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_c64(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_c64(token: &str) -> Result<c64> {
    let bad = || Error::Parse(format!("bad complex token {token:?}"));
    let body = token.strip_suffix('j').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    // the sign joining real and imaginary part is the last one not part of an exponent
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    Ok(c64::new(re, im))
}

pub fn parse_matrix_dump(text: &str) -> Result<Mat<c64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix dump".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("bad header {header:?}")));
    };
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let row: Vec<c64> = line.split_whitespace().map(parse_c64).collect::<Result<_>>()?;
        if row.len() != cols || i >= rows {
            return Err(Error::Parse(format!("row {i} does not match header {rows} {cols}")));
        }
        entries.extend(row);
    }
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {rows} rows, found {}",
            entries.len() / cols.max(1)
        )));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| entries[i * cols + j]))
}
