//! Deterministic serialization helpers.
//!
//! Reports are versioned (`schema: 1`) and every float is printed with 17
//! significant digits, enough to round-trip an f64 exactly, so repeated runs
//! with the same seed produce byte-identical files.

use serde::Serialize;

/// Schema version stamped into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// 17-significant-digit form of a float, valid as a JSON number.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "null".to_owned()
    } else if x > 0.0 {
        "1e999".to_owned()
    } else {
        "-1e999".to_owned()
    }
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Pretty JSON with deterministic float formatting.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    let compact = String::from_utf8(out).expect("serializer emits utf-8");
    // Re-indent for readability without touching the number tokens.
    indent_json(&compact)
}

/// Minimal pretty printer for the serializer output above. Operates on the
/// token level so the custom float formatting survives.
fn indent_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 2);
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let bytes = s.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let c = b as char;
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '{' | '[' => {
                out.push(c);
                // Empty containers stay on one line.
                let close = if c == '{' { b'}' } else { b']' };
                if bytes.get(i + 1) == Some(&close) {
                    continue;
                }
                depth += 1;
                out.push('\n');
                out.push_str(&"  ".repeat(depth));
            }
            '}' | ']' => {
                if bytes.get(i.wrapping_sub(1)) == Some(&(if c == '}' { b'{' } else { b'[' })) {
                    out.push(c);
                    continue;
                }
                depth = depth.saturating_sub(1);
                out.push('\n');
                out.push_str(&"  ".repeat(depth));
                out.push(c);
            }
            ',' => {
                out.push(c);
                out.push('\n');
                out.push_str(&"  ".repeat(depth));
            }
            ':' => {
                out.push(c);
                out.push(' ');
            }
            _ => out.push(c),
        }
    }
    out.push('\n');
    out
}

/// One CSV cell for a float column.
pub fn csv_f64(x: f64) -> String {
    fmt_f64(x)
}
