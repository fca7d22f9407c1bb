//! Shared on-disk framing: one line of compact JSON, a `\n`, then raw
//! little-endian `f64` values.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_framed<H: Serialize>(path: &Path, header: &H, payload: &[f64]) -> Result<()> {
    let mut bytes = serde_json::to_vec(header).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    bytes.push(b'\n');
    bytes.reserve(payload.len() * 8);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses the header line and returns it along with the raw payload bytes.
pub(crate) fn read_framed<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: "no header terminator".into(),
        })?;
    let header = serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok((header, bytes[newline + 1..].to_vec()))
}

pub(crate) fn check_version(path: &Path, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

pub(crate) fn decode_f64(path: &Path, payload: &[u8], count: usize) -> Result<Vec<f64>> {
    let expected = count * 8;
    if payload.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!(
                "payload has {} trailing bytes beyond the declared {} values",
                payload.len() - expected,
                count
            ),
        });
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize)]
    struct H {
        version: u32,
    }

    #[test]
    fn truncation_and_garbage_are_distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_framed(&path, &H { version: 1 }, &[1.0, 2.0, 3.0]).unwrap();
        let (h, payload): (H, _) = read_framed(&path).unwrap();
        assert_eq!(h.version, 1);
        assert_eq!(decode_f64(&path, &payload, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            decode_f64(&path, &payload[..20], 3),
            Err(Error::Truncated { .. })
        ));

        fs::write(&path, b"not json\n").unwrap();
        assert!(matches!(
            read_framed::<H>(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }
}
