//! Checkpoint layout: a text line `arch=<in>-<hidden>-<classes>\n` followed by
//! the flat parameter vector as little-endian f64.

use std::fs;
use std::path::Path;

use super::model::{Architecture, ModelParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn encode_checkpoint<F: Scalar>(params: &ModelParams<F>) -> Vec<u8> {
    let mut out = format!("arch={}\n", params.arch()).into_bytes();
    out.reserve(params.len() * 8);
    for v in params.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_checkpoint<F: Scalar>(bytes: &[u8]) -> Result<ModelParams<F>> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| Error::parse(1, "header is not UTF-8"))?;
    let arch: Architecture = header
        .strip_prefix("arch=")
        .ok_or_else(|| Error::parse(1, "header must start with `arch=`"))?
        .parse()?;
    let body = &bytes[newline + 1..];
    if body.len() != arch.num_params() * 8 {
        return Err(Error::DimensionMismatch {
            expected: arch.num_params() * 8,
            found: body.len(),
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| F::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    ModelParams::new(arch, values)
}

pub fn save_checkpoint<F: Scalar>(params: &ModelParams<F>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<F>> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let p = ModelParams::new(Architecture::softmax(1, 2), vec![1.0f64, -2.0, 0.5, 0.0]).unwrap();
        let bytes = encode_checkpoint(&p);
        assert!(bytes.starts_with(b"arch=1-0-2\n"));
        assert_eq!(bytes.len(), 11 + 32);
        assert_eq!(&bytes[11..19], &1.0f64.to_le_bytes());
        assert_eq!(decode_checkpoint::<f64>(&bytes).unwrap(), p);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = ModelParams::<f64>::init(Architecture::mlp(5, 3, 4), 2).unwrap();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), p);
    }

    #[test]
    fn rejects_truncated() {
        let p = ModelParams::<f64>::init(Architecture::softmax(2, 2), 0).unwrap();
        let bytes = encode_checkpoint(&p);
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_checkpoint::<f64>(b"nope\n").is_err());
    }
}
