//! File formats and text artifacts.

mod bytes;
pub mod checkpoint_file;
pub mod dataset_file;
pub mod pgm;
pub mod records;

use crate::error::{Error, Result};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Human-readable header of any file this crate writes.
pub fn inspect(buf: &[u8]) -> Result<String> {
    if buf.starts_with(dataset_file::MAGIC) {
        let h = dataset_file::header_from_bytes(buf)?;
        let bits: String = h.transmitted.iter().map(|&b| if b { '1' } else { '0' }).collect();
        return Ok(format!(
            "kind: dataset\nversion: {}\ncode_length: {}\nparams: 8\ngroups: {}\nreps: {}\nbase_seed: {}\noracle_digest: {}\ntransmitted: {bits}\nsize_bytes: {}\n",
            h.version,
            h.code_len,
            h.groups,
            h.reps,
            h.base_seed,
            hex(&h.oracle_digest),
            buf.len()
        ));
    }
    if buf.starts_with(checkpoint_file::MAGIC) {
        let h = checkpoint_file::header_from_bytes(buf)?;
        let a = h.arch;
        return Ok(format!(
            "kind: checkpoint\nversion: {}\ncode_length: {}\nz_dim: {}\nblocks: {}\nchannels: {}\nkernel: {}\niteration: {}\ndataset_digest: {}\nsize_bytes: {}\n[config]\n{}",
            h.version,
            a.code_len,
            a.z_dim,
            a.blocks,
            a.channels,
            a.kernel,
            h.iteration,
            hex(&h.dataset_digest),
            buf.len(),
            toml::to_string(&h.config).unwrap_or_default()
        ));
    }
    if buf.starts_with(b"P5") {
        let r = pgm::Raster::from_bytes(buf)?;
        return Ok(format!(
            "kind: pgm\nwidth: {}\nheight: {}\nmaxval: 255\n",
            r.width(),
            r.height()
        ));
    }
    if let Ok(text) = std::str::from_utf8(buf) {
        if let Ok(rec) = records::ParamsRecord::from_toml(text) {
            return Ok(format!("kind: params\n{}", rec.to_toml()));
        }
        if let Some(first) = text.lines().next() {
            return Ok(format!("kind: text\nfirst_line: {first}\nlines: {}\n", text.lines().count()));
        }
    }
    Err(Error::Format("unrecognized file".into()))
}
