//! Canonical JSON and CSV emission.
//!
//! Keys come out sorted (serde_json maps are ordered) and every float is
//! written with 17 significant digits, so equal results give equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use qmlab::wavefront::format_float;

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Canonical pretty-printed JSON with a trailing newline.
pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    emit(v, 0, &mut out);
    out.push('\n');
    out
}

fn emit(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64")));
            } else {
                write!(out, "{n}").expect("string write");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                emit(x, depth + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                emit(x, depth + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
    }
}

/// `series,h,value` rows for every fitted decay series.
pub fn decay_csv(series: &[(String, Vec<f64>, Vec<f64>)]) -> String {
    let mut out = String::from("series,h,value\n");
    for (name, h, values) in series {
        for (h, v) in h.iter().zip(values) {
            writeln!(out, "{name},{},{}", format_float(*h), format_float(*v)).expect("string write");
        }
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, WriteError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| WriteError {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed_width() {
        let v = json!({"b": 0.1, "a": [1, 2.5e-300], "c": {"z": true, "y": null}});
        let s = to_canonical_json(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.5000000000000000e-300"));
        assert!(s.contains("\"y\": null"));
        // integers stay integers
        assert!(s.contains("    1,\n"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"], json!(0.1));
    }

    #[test]
    fn empty_containers() {
        assert_eq!(to_canonical_json(&json!({"a": [], "b": {}})), "{\n  \"a\": [],\n  \"b\": {}\n}\n");
    }

    #[test]
    fn decay_rows() {
        let s = decay_csv(&[("residual".into(), vec![0.5, 0.25], vec![1.0, 0.0])]);
        assert_eq!(s.lines().count(), 3);
        assert!(s.lines().nth(2).unwrap().ends_with(",0"));
    }
}
