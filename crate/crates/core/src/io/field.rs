//! Field files: one UTF-8 JSON header line, then `m^{2n}` little-endian f64
//! values in row-major order over `(x1, y1, ..., xn, yn)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE: &str = "f64le";
pub const LAYOUT: &str = "row-major";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub field_name: String,
    pub dtype: String,
    pub layout: String,
}

pub fn encode_field(f: &ScalarField, field_name: &str) -> Result<Vec<u8>> {
    let spec = f.spec();
    let header = FieldHeader {
        format_version: FORMAT_VERSION,
        n: spec.n(),
        m: spec.m(),
        lo: spec.lo().to_vec(),
        hi: spec.hi().to_vec(),
        field_name: field_name.to_string(),
        dtype: DTYPE.to_string(),
        layout: LAYOUT.to_string(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(8 * f.values().len());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<(ScalarField, String)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no newline terminating the header".into()))?;
    let text = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::MalformedHeader(format!("header is not UTF-8: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::MalformedHeader(format!("header is not JSON: {e}")))?;
    // version and dtype are checked before the full schema so that a future
    // format is reported as unsupported rather than malformed
    if let Some(v) = value.get("format_version") {
        if v.as_u64() != Some(FORMAT_VERSION as u64) {
            return Err(Error::UnsupportedFormat(format!("format_version {v} (supported: {FORMAT_VERSION})")));
        }
    }
    if let Some(d) = value.get("dtype") {
        if d.as_str() != Some(DTYPE) {
            return Err(Error::UnsupportedFormat(format!("dtype {d} (supported: \"{DTYPE}\")")));
        }
    }
    if let Some(l) = value.get("layout") {
        if l.as_str() != Some(LAYOUT) {
            return Err(Error::UnsupportedFormat(format!("layout {l} (supported: \"{LAYOUT}\")")));
        }
    }
    let header: FieldHeader = serde_json::from_value(value).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let spec = GridSpec::new(header.n, header.lo, header.hi, header.m)
        .map_err(|e| Error::MalformedHeader(format!("grid description: {e}")))?;
    let payload = &bytes[nl + 1..];
    let expected = 8 * spec.len();
    if payload.len() != expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((ScalarField::new(spec, values)?, header.field_name))
}

pub fn write_field(f: &ScalarField, field_name: &str, path: &Path) -> Result<()> {
    let bytes = encode_field(f, field_name)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

/// Reads a field and its stored name.
pub fn read_field(path: &Path) -> Result<(ScalarField, String)> {
    decode_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::AnalyticFn;

    fn grid() -> GridSpec {
        GridSpec::new(2, vec![0.0, -0.5, 0.1, 0.0], vec![1.0, 0.5, 0.7, 2.0], 5).unwrap()
    }

    #[test]
    fn payload_size_and_round_trip() {
        let zero = ScalarField::constant(grid(), 0.0);
        let bytes = encode_field(&zero, "u").unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 5000);

        let f = ScalarField::sample(grid(), &AnalyticFn::SinProduct { scale: 1.3, amp: 1e-7 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        write_field(&f, "usub", &path).unwrap();
        let (back, name) = read_field(&path).unwrap();
        assert_eq!(name, "usub");
        assert_eq!(back.spec(), f.spec());
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(encode_field(&back, "usub").unwrap(), fs::read(&path).unwrap());
    }

    fn with_header(edit: impl Fn(&mut serde_json::Value)) -> Vec<u8> {
        let bytes = encode_field(&ScalarField::constant(grid(), 1.0), "u").unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let mut h: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        edit(&mut h);
        let mut out = serde_json::to_vec(&h).unwrap();
        out.extend_from_slice(&bytes[nl..]);
        out
    }

    #[test]
    fn distinct_error_kinds() {
        let bad_dtype = with_header(|h| h["dtype"] = "f32le".into());
        assert!(matches!(decode_field(&bad_dtype), Err(Error::UnsupportedFormat(_))));
        let bad_version = with_header(|h| h["format_version"] = 2.into());
        assert!(matches!(decode_field(&bad_version), Err(Error::UnsupportedFormat(_))));
        let missing = with_header(|h| {
            h.as_object_mut().unwrap().remove("m");
        });
        assert!(matches!(decode_field(&missing), Err(Error::MalformedHeader(_))));
        let even_m = with_header(|h| h["m"] = 4.into());
        assert!(matches!(decode_field(&even_m), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_field(b"not json\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_field(b"{}"), Err(Error::MalformedHeader(_))));
        let mut cut = encode_field(&ScalarField::constant(grid(), 1.0), "u").unwrap();
        cut.truncate(cut.len() - 3);
        assert!(matches!(decode_field(&cut), Err(Error::TruncatedPayload { expected: 5000, found: 4997 })));
    }
}
