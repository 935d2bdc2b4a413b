//! Small text-format helpers shared by the CSV writers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, which round-trips any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Parse a float written by [`fmt_f64`].
pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "NaN" | "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("{t:?}: {e}"))),
    }
}

/// Write a `key=value` metadata file, one pair per line, sorted by key.
pub fn write_meta(path: &Path, meta: &BTreeMap<String, String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in meta {
        writeln!(f, "{k}={v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Read a `key=value` file. Blank lines and lines starting with `#` are skipped.
pub fn read_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -38.589369890370705, 1e-300, 6.02e23, -0.0, 1.0 / 3.0] {
            let back = parse_f64(&fmt_f64(x)).unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
        assert!(parse_f64(&fmt_f64(f64::NAN)).unwrap().is_nan());
        assert_eq!(parse_f64("inf").unwrap(), f64::INFINITY);
    }

    #[test]
    fn key_values_skip_comments() {
        let kv = read_key_values("# c\n a = 1\n\nb=x=y\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "x=y");
        assert!(read_key_values("novalue").is_err());
    }
}
