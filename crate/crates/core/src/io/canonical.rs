//! Canonical JSON: sorted object keys, floats as 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{EvalError, Result};

/// Fixed 17-significant-digit scientific notation, e.g. `9.0000000000000002e-1`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Canonical<F>(F);

impl<F: Formatter> Formatter for Canonical<F> {
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        w.write_all(format_f64(v as f64).as_bytes())
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_with<F: Formatter, T: Serialize>(value: &T, formatter: F) -> Result<String> {
    // Round-tripping through Value sorts every object's keys.
    let tree = serde_json::to_value(value).map_err(|e| EvalError::Io(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical(formatter));
    tree.serialize(&mut ser)
        .map_err(|e| EvalError::Io(e.to_string()))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Single-line canonical JSON.
pub fn to_canonical_line<T: Serialize>(value: &T) -> Result<String> {
    write_with(value, CompactFormatter)
}

/// Indented canonical JSON with a trailing newline.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = write_with(value, PrettyFormatter::with_indent(b"  "))?;
    s.push('\n');
    Ok(s)
}
