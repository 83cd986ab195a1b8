//! Dataset files (`LCD1`).
//!
//! All integers little-endian. Header: magic `LCD1`, version `u16`, code
//! length `u32`, parameter count `u8` (8), group count `u32`, reps `u32`,
//! base seed `u64`, 32-byte camera digest, transmitted code bit-packed.
//! Then per group: 8 `f32` parameters followed by `reps` bit-packed codes.
//! Bits are packed MSB-first, `ceil(L/8)` bytes per code, padding bits 0.
//!
//! Parameters are stored as `f32`, so a dataset round-trips exactly when its
//! parameters are `f32` values (as drawn by
//! [`random_param_sets`](crate::oracle::random_param_sets)).

use sha2::{Digest, Sha256};

use super::bytes::{pack_bits, unpack_bits, Reader};
use crate::error::{Error, Result};
use crate::oracle::{CameraParams, Dataset, DatasetGroup, N_PARAMS};
use crate::signal::{BinaryCode, CodeBatch};

pub const MAGIC: &[u8; 4] = b"LCD1";
pub const VERSION: u16 = 1;

/// Parsed header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u16,
    pub code_len: usize,
    pub groups: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub oracle_digest: [u8; 32],
    pub transmitted: Vec<bool>,
}

pub fn to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let len = ds.code_len();
    let row = len.div_ceil(8);
    let mut out = Vec::with_capacity(64 + row + ds.groups.len() * (4 * N_PARAMS + ds.reps * row));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(len, "code length")?.to_le_bytes());
    out.push(N_PARAMS as u8);
    out.extend_from_slice(&u32_of(ds.groups.len(), "group count")?.to_le_bytes());
    out.extend_from_slice(&u32_of(ds.reps, "reps")?.to_le_bytes());
    out.extend_from_slice(&ds.base_seed.to_le_bytes());
    out.extend_from_slice(&ds.oracle_digest);
    pack_bits(&ds.transmitted.to_bools(), &mut out);
    for g in &ds.groups {
        if g.codes.n_rows() != ds.reps || g.codes.code_len() != len {
            return Err(Error::Shape("group does not match the dataset dimensions".into()));
        }
        for &p in g.params.values() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        for r in g.codes.rows() {
            let bits: Vec<bool> = r.iter().map(|&v| v >= 0.5).collect();
            pack_bits(&bits, &mut out);
        }
    }
    Ok(out)
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit the file format")))
}

fn read_header(r: &mut Reader<'_>) -> Result<DatasetHeader> {
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let code_len = r.u32()? as usize;
    let n_params = r.u8()?;
    if n_params as usize != N_PARAMS {
        return Err(Error::Format(format!("dataset declares {n_params} parameters, expected {N_PARAMS}")));
    }
    let groups = r.u32()? as usize;
    let reps = r.u32()? as usize;
    let base_seed = r.u64()?;
    let oracle_digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    if code_len == 0 {
        return Err(Error::Format("dataset declares zero-length codes".into()));
    }
    let transmitted = unpack_bits(r.take(code_len.div_ceil(8))?, code_len);
    Ok(DatasetHeader {
        version,
        code_len,
        groups,
        reps,
        base_seed,
        oracle_digest,
        transmitted,
    })
}

pub fn header_from_bytes(buf: &[u8]) -> Result<DatasetHeader> {
    read_header(&mut Reader::new(buf))
}

pub fn from_bytes(buf: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(buf);
    let h = read_header(&mut r)?;
    let row = h.code_len.div_ceil(8);
    let expected = (4 * N_PARAMS + h.reps * row) as u128 * h.groups as u128;
    if r.remaining() as u128 != expected {
        return Err(Error::Format(format!(
            "dataset payload has {} bytes, header declares {expected}",
            r.remaining()
        )));
    }
    let mut groups = Vec::with_capacity(h.groups);
    for _ in 0..h.groups {
        let mut p = [0.0; N_PARAMS];
        for v in &mut p {
            *v = r.f32()? as f64;
        }
        let params = CameraParams::new(p).map_err(|e| Error::Format(format!("stored parameters: {e}")))?;
        let mut data = Vec::with_capacity(h.reps * h.code_len);
        for _ in 0..h.reps {
            data.extend(unpack_bits(r.take(row)?, h.code_len).into_iter().map(|b| b as u8 as f64));
        }
        groups.push(DatasetGroup {
            params,
            codes: CodeBatch::new(h.reps, h.code_len, data)?,
        });
    }
    Ok(Dataset {
        transmitted: BinaryCode::from_bools(&h.transmitted)?,
        groups,
        reps: h.reps,
        base_seed: h.base_seed,
        oracle_digest: h.oracle_digest,
    })
}

/// SHA-256 of the serialized dataset; identifies it in checkpoints.
pub fn digest(ds: &Dataset) -> Result<[u8; 32]> {
    Ok(Sha256::digest(to_bytes(ds)?).into())
}

pub fn save(ds: &Dataset, path: &std::path::Path) -> Result<[u8; 32]> {
    let bytes = to_bytes(ds)?;
    std::fs::write(path, &bytes)?;
    Ok(Sha256::digest(&bytes).into())
}

pub fn load(path: &std::path::Path) -> Result<(Dataset, [u8; 32])> {
    let bytes = std::fs::read(path)?;
    let ds = from_bytes(&bytes)?;
    Ok((ds, Sha256::digest(&bytes).into()))
}
