//! Checkpoint container.
//!
//! Layout (little-endian):
//! ```text
//! b"CLOODCKP"  u32 header_len  header_json  tensor payloads in header order
//! ```
//! The JSON header carries the network spec, its hash, step count, seed,
//! element type and the name/shape of every tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::{Network, NetworkSpec};
use super::scalar::{DType, Scalar};
use super::tensor::Tensor;

const MAGIC: &[u8; 8] = b"CLOODCKP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec_hash: String,
    pub spec: NetworkSpec,
    pub step: u64,
    pub seed: u64,
    pub dtype: DType,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode<F: Scalar>(net: &Network<F>, step: u64, seed: u64) -> Vec<u8> {
    let header = CheckpointHeader {
        spec_hash: net.spec().hash(),
        spec: net.spec().clone(),
        step,
        seed,
        dtype: F::DTYPE,
        tensors: net
            .named_params()
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + net.param_count() * F::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for p in net.params() {
        for &v in p.data() {
            v.write_le(&mut out);
        }
    }
    out
}

pub fn read_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::format("checkpoint", "missing CLOODCKP magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let json = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::format("checkpoint", "truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(json)?;
    if header.spec.hash() != header.spec_hash {
        return Err(Error::format("checkpoint", "spec hash does not match spec"));
    }
    Ok((header, 12 + hlen))
}

/// Decode a checkpoint stored with element type `F`.
pub fn decode<F: Scalar>(bytes: &[u8]) -> Result<(Network<F>, CheckpointHeader)> {
    let (header, mut off) = read_header(bytes)?;
    if header.dtype != F::DTYPE {
        return Err(Error::format(
            "checkpoint",
            format!("stored as {:?}, requested {:?}", header.dtype, F::DTYPE),
        ));
    }
    let width = F::DTYPE.size();
    let mut params = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let raw = bytes
            .get(off..off + n * width)
            .ok_or_else(|| Error::format("checkpoint", format!("truncated tensor {}", entry.name)))?;
        let data = raw.chunks_exact(width).map(F::read_le).collect();
        params.push(Tensor::from_vec(&entry.shape, data)?);
        off += n * width;
    }
    if off != bytes.len() {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    let net = Network::from_params(header.spec.clone(), params)?;
    Ok((net, header))
}

pub fn save<F: Scalar>(path: &Path, net: &Network<F>, step: u64, seed: u64) -> Result<()> {
    std::fs::write(path, encode(net, step, seed)).map_err(|e| Error::io(path, e))
}

pub fn load<F: Scalar>(path: &Path) -> Result<(Network<F>, CheckpointHeader)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Load a checkpoint regardless of its stored element type, converting to `F`.
pub fn load_as<F: Scalar>(path: &Path) -> Result<(Network<F>, CheckpointHeader)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, _) = read_header(&bytes)?;
    match header.dtype {
        DType::F32 => decode::<f32>(&bytes).map(|(n, h)| (n.cast(), h)),
        DType::F64 => decode::<f64>(&bytes).map(|(n, h)| (n.cast(), h)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Network::<f32>::init(NetworkSpec::reference(), 77).unwrap();
        let bytes = encode(&net, 123, 77);
        let (back, header) = decode::<f32>(&bytes).unwrap();
        assert_eq!(header.step, 123);
        assert_eq!(header.seed, 77);
        assert_eq!(back, net);
        assert_eq!(encode(&back, 123, 77), bytes);
    }

    #[test]
    fn dtype_and_corruption_errors() {
        let net = Network::<f64>::init(NetworkSpec::with_input_side(8), 1).unwrap();
        let bytes = encode(&net, 0, 1);
        assert!(decode::<f32>(&bytes).is_err());
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode::<f64>(&bad).is_err());
    }
}
