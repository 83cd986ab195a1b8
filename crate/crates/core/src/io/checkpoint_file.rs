//! Checkpoint files (`LCK1`).
//!
//! All integers little-endian. Header: magic `LCK1`, version `u16`,
//! architecture (code length, noise dimension, blocks, channels, kernel as
//! `u32`), completed iterations `u64`, 32-byte dataset digest, transmitted
//! code bit-packed MSB-first, training configuration as length-prefixed
//! TOML. Then the generator and discriminator tensors, then the optimizer
//! state of each. A tensor list is a `u32` count followed by tensors; a
//! tensor is its rank (`u8`), its dimensions (`u32` each) and its values as
//! `f64`.

use super::bytes::{pack_bits, unpack_bits, Reader};
use crate::cgan::{Adam, Architecture, Checkpoint, DiscriminatorNet, GeneratorNet, TrainConfig};
use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::BinaryCode;

pub const MAGIC: &[u8; 4] = b"LCK1";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub version: u16,
    pub arch: Architecture,
    pub iteration: u64,
    pub dataset_digest: [u8; 32],
    pub config: TrainConfig,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} does not fit the file format")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_tensors<T: Scalar>(out: &mut Vec<u8>, ts: &[Tensor<T>]) -> Result<()> {
    put_u32(out, ts.len())?;
    for t in ts {
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            put_u32(out, d)?;
        }
        for v in t.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    Ok(())
}

fn put_adam<T: Scalar>(out: &mut Vec<u8>, a: &Adam<T>) -> Result<()> {
    out.extend_from_slice(&a.step.to_le_bytes());
    for v in [a.lr, a.beta1, a.beta2, a.eps] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_tensors(out, &a.m)?;
    put_tensors(out, &a.v)
}

pub fn to_bytes<T: Scalar>(ck: &Checkpoint<T>) -> Result<Vec<u8>> {
    let a = ck.generator.arch();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [a.code_len, a.z_dim, a.blocks, a.channels, a.kernel] {
        put_u32(&mut out, v)?;
    }
    out.extend_from_slice(&ck.iteration.to_le_bytes());
    out.extend_from_slice(&ck.dataset_digest);
    if ck.transmitted.len() != a.code_len {
        return Err(Error::Shape("transmitted code does not match the architecture".into()));
    }
    pack_bits(&ck.transmitted.to_bools(), &mut out);
    let cfg = toml::to_string(&ck.config).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
    put_u32(&mut out, cfg.len())?;
    out.extend_from_slice(cfg.as_bytes());
    put_tensors(&mut out, ck.generator.tensors())?;
    put_tensors(&mut out, ck.discriminator.tensors())?;
    put_adam(&mut out, &ck.adam_g)?;
    put_adam(&mut out, &ck.adam_d)?;
    Ok(out)
}

fn read_header(r: &mut Reader<'_>) -> Result<(CheckpointHeader, Vec<bool>)> {
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let arch = Architecture {
        code_len: dims[0],
        z_dim: dims[1],
        blocks: dims[2],
        channels: dims[3],
        kernel: dims[4],
    };
    arch.validate().map_err(|e| Error::Format(format!("stored architecture: {e}")))?;
    let iteration = r.u64()?;
    let dataset_digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let transmitted = unpack_bits(r.take(arch.code_len.div_ceil(8))?, arch.code_len);
    let n = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(n)?).map_err(|_| Error::Format("config is not UTF-8".into()))?;
    let config: TrainConfig =
        toml::from_str(text).map_err(|e| Error::Format(format!("stored config: {}", e.message())))?;
    Ok((
        CheckpointHeader {
            version,
            arch,
            iteration,
            dataset_digest,
            config,
        },
        transmitted,
    ))
}

fn get_tensors<T: Scalar>(r: &mut Reader<'_>) -> Result<Vec<Tensor<T>>> {
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        if n > r.remaining() / 8 {
            return Err(Error::Format("tensor larger than the remaining file".into()));
        }
        let data = (0..n).map(|_| r.f64().map(T::lit)).collect::<Result<Vec<_>>>()?;
        out.push(Tensor::from_vec(&shape, data)?);
    }
    Ok(out)
}

fn get_adam<T: Scalar>(r: &mut Reader<'_>) -> Result<Adam<T>> {
    let step = r.u64()?;
    let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let m = get_tensors(r)?;
    let v = get_tensors(r)?;
    Ok(Adam {
        lr,
        beta1,
        beta2,
        eps,
        step,
        m,
        v,
    })
}

pub fn header_from_bytes(buf: &[u8]) -> Result<CheckpointHeader> {
    Ok(read_header(&mut Reader::new(buf))?.0)
}

pub fn from_bytes<T: Scalar>(buf: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader::new(buf);
    let (h, transmitted) = read_header(&mut r)?;
    let format = |e: Error| Error::Format(format!("stored weights: {e}"));
    let generator = GeneratorNet::from_tensors(h.arch, get_tensors(&mut r)?).map_err(format)?;
    let discriminator = DiscriminatorNet::from_tensors(h.arch, get_tensors(&mut r)?).map_err(format)?;
    let adam_g = get_adam(&mut r)?;
    let adam_d = get_adam(&mut r)?;
    let same = |a: &[Tensor<T>], b: &[Tensor<T>]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.shape() == y.shape());
    if !same(&adam_g.m, generator.tensors())
        || !same(&adam_g.v, generator.tensors())
        || !same(&adam_d.m, discriminator.tensors())
        || !same(&adam_d.v, discriminator.tensors())
    {
        return Err(Error::Format("optimizer state does not match the weights".into()));
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", r.remaining())));
    }
    Ok(Checkpoint {
        generator,
        discriminator,
        adam_g,
        adam_d,
        config: h.config,
        iteration: h.iteration,
        dataset_digest: h.dataset_digest,
        transmitted: BinaryCode::from_bools(&transmitted)?,
    })
}

pub fn save<T: Scalar>(ck: &Checkpoint<T>, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_bytes(ck)?)?;
    Ok(())
}

pub fn load<T: Scalar>(path: &std::path::Path) -> Result<Checkpoint<T>> {
    from_bytes(&std::fs::read(path)?)
}
