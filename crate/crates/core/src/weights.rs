//! Binary weights format.
//!
//! ```text
//! "CXRW"                        4-byte magic
//! version: u32 LE               currently 1
//! repeated until end of input:
//!   name_len: u32 LE
//!   name: name_len UTF-8 bytes  "<layer>/<param>", e.g. "conv2d_1/kernel"
//!   rank: u32 LE
//!   dims: rank × u32 LE
//!   data: product(dims) × f32 LE
//! ```
//!
//! Every parameter is stored, including the batch-norm moving statistics.
//! Values are always 32-bit, so a 64-bit model round-trips at `f32` precision.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CXRW";
pub const VERSION: u32 = 1;

/// A decoded tensor record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn encode<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (name, p) in model.named_params() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(p.value.dims().len() as u32).to_le_bytes());
        for &d in p.value.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!("truncated file: {what} at byte {} needs {n} bytes", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses every record, checking magic, version and completeness.
pub fn decode(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"CXRW\"")));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}, expected {VERSION}")));
    }
    let mut records = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = core::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .into();
        let rank = r.u32("rank")? as usize;
        if !(1..=4).contains(&rank) {
            return Err(Error::Format(format!("tensor {name}: rank {rank} outside 1..=4")));
        }
        let dims = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::Format(format!("tensor {name}: dims {dims:?} overflow")))?;
        let data = r
            .take(count, "tensor data")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        records.push(Record { name, dims, data });
    }
    Ok(records)
}

/// Loads records into `model`, which must have exactly the stored tensors.
pub fn load_into<T: Scalar>(model: &mut Model<T>, bytes: &[u8]) -> Result<()> {
    let mut by_name: BTreeMap<String, Record> = BTreeMap::new();
    for rec in decode(bytes)? {
        if by_name.contains_key(&rec.name) {
            return Err(Error::Format(format!("duplicate tensor {}", rec.name)));
        }
        by_name.insert(rec.name.clone(), rec);
    }
    let mut pending = Vec::new();
    for (name, p) in model.named_params() {
        let rec = by_name
            .remove(&name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
        if rec.dims != p.value.dims() {
            let layer = name.split('/').next().unwrap_or(&name);
            return Err(shape_err!(
                "layer {layer}: tensor {name} has shape {:?}, architecture expects {:?}",
                rec.dims,
                p.value.dims()
            ));
        }
        pending.push(rec.data);
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Format(format!("unexpected tensor {extra}")));
    }
    for ((_, p), data) in model.named_params_mut().into_iter().zip(pending) {
        p.value.data_mut().iter_mut().zip(data).for_each(|(v, d)| *v = T::from_f64(d as f64));
    }
    model.mark_stats_ready();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;

    fn mini() -> Model<f32> {
        Model::build(&Architecture::miniature(), 4).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&mini());
        assert_eq!(&bytes[..4], b"CXRW");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let name = b"conv2d_1/kernel";
        assert_eq!(&bytes[8..12], &(name.len() as u32).to_le_bytes());
        assert_eq!(&bytes[12..12 + name.len()], name);
        let recs = decode(&bytes).unwrap();
        assert_eq!(recs[0].dims, [3, 3, 1, 2]);
    }

    #[test]
    fn round_trip_restores_values() {
        let a = mini();
        let mut b = Model::<f32>::build(&Architecture::miniature(), 99).unwrap();
        load_into(&mut b, &encode(&a)).unwrap();
        for ((n1, p1), (n2, p2)) in a.named_params().into_iter().zip(b.named_params()) {
            assert_eq!(n1, n2);
            assert_eq!(p1.value, p2.value);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode(&mini());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode(&bytes[..2]), Err(Error::Format(_))));
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let mut other = Architecture::miniature();
        other.blocks[0].filters = 3;
        let wrong = Model::<f32>::build(&other, 1).unwrap();
        let mut m = mini();
        match load_into(&mut m, &encode(&wrong)) {
            Err(Error::Shape(msg)) => assert!(msg.contains("conv2d_1"), "{msg}"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }
}
