//! Middlebury `.flo` files: `PIEH`, little-endian `i32` width and height, then
//! row-major `(dx, dy)` `f32` pairs.
//!
//! [`FlowField`] stores `f64`, so values are narrowed on write. Fields whose
//! components are exact `f32` values round-trip bit for bit.

use std::path::Path;

use camoseg_core::FlowField;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PIEH";
const HEADER: usize = 12;

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(HEADER + w * h * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for [dx, dy] in flow.vectors() {
        out.extend_from_slice(&(*dx as f32).to_le_bytes());
        out.extend_from_slice(&(*dy as f32).to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER {
        return Err(Error::format(format!("flow payload of {} bytes has no header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(format!("bad flow magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
    }
    let dim = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (w, h) = (dim(4), dim(8));
    if w <= 0 || h <= 0 {
        return Err(Error::format(format!("bad flow dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| Error::format("flow dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(Error::format(format!("truncated flow payload: {} of {expected} bytes", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::format(format!("{} trailing bytes after flow payload", bytes.len() - expected)));
    }
    let vectors = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| {
            let dx = f32::from_le_bytes(c[..4].try_into().unwrap());
            let dy = f32::from_le_bytes(c[4..].try_into().unwrap());
            [dx as f64, dy as f64]
        })
        .collect();
    Ok(FlowField::new(w, h, vectors)?)
}

pub fn read_flow_file(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flow(&bytes)
}

pub fn write_flow_file(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_length_counts_header_and_pairs() {
        let f = FlowField::new(3, 1, vec![[0.0, 0.0], [3.0, 4.0], [-3.0, -4.0]]).unwrap();
        let bytes = encode_flow(&f);
        assert_eq!(bytes.len(), 4 + 8 + 24);
        assert_eq!(decode_flow(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = encode_flow(&FlowField::uniform(2, 2, [1.0, -2.0]));
        assert!(decode_flow(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(decode_flow(&bytes).is_err());
        bytes.pop();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_flow(&bytes), Err(Error::Format(m)) if m.contains("magic")));
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let mut bytes = encode_flow(&FlowField::zeros(1, 1));
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_flow(&bytes).is_err());
    }
}
