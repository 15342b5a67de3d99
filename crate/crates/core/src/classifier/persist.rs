//! Binary model file.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   b"ESCM"
//! version u32 (= 1)
//! n_nodes u32
//! n_dims  u32, then n_dims x u32 layer widths (input first)
//! shift   f64, scale f64      fidelity standardization
//! per layer: weights (row-major, outputs x inputs) f64, biases f64
//! sha256 of all preceding bytes (32 bytes)
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::network::{ClassifierModel, DenseLayer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ESCM";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

impl ClassifierModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_nodes as u32).to_le_bytes());
        let dims = self.layer_dims();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.fidelity_shift.to_le_bytes());
        out.extend_from_slice(&self.fidelity_scale.to_le_bytes());
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a model file".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("model checksum mismatch".into()));
        }
        let mut cur = Cursor { buf: &body[4..] };
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let n_nodes = cur.u32()? as usize;
        let n_dims = cur.u32()? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::Format(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let shift = cur.f64()?;
        let scale = cur.f64()?;
        let mut layers = Vec::with_capacity(n_dims - 1);
        for w in dims.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = cur.f64s(inputs * outputs)?;
            let biases = cur.f64s(outputs)?;
            layers.push(DenseLayer { inputs, outputs, weights, biases });
        }
        if !cur.buf.is_empty() {
            return Err(Error::Format("trailing bytes in model file".into()));
        }
        ClassifierModel::from_parts(n_nodes, layers, shift, scale)
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        ClassifierModel::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("truncated model file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn model() -> ClassifierModel {
        let mut rng = substream(3, Stream::Training, &[]);
        let mut m = ClassifierModel::initialize(10, &[12, 6], &mut rng);
        m.set_fidelity_normalization(0.88, 0.04);
        m
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"ESCM");
        let back = ClassifierModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = model().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        assert!(matches!(ClassifierModel::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(ClassifierModel::from_bytes(b"ESCM").is_err());
        assert!(ClassifierModel::from_bytes(&[0u8; 64]).is_err());
    }

    #[test]
    fn node_count_is_checked() {
        let m = ClassifierModel::from_bytes(&model().to_bytes()).unwrap();
        assert!(m.check_nodes(10).is_ok());
        assert!(matches!(m.check_nodes(12), Err(Error::Config(_))));
    }
}
