//! Single-file checkpoint container: magic, text header, named f32
//! parameter blobs, and a trailing SHA-256 over everything before it.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::ArrayD;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::{ParamArena, Scalar};

const MAGIC: &[u8; 8] = b"NNCKPT01";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic (not a checkpoint file)")]
    BadMagic,

    #[error("content hash mismatch (corrupt checkpoint)")]
    HashMismatch,

    #[error("malformed checkpoint: {0}")]
    Malformed(String),

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
}

/// Decoded checkpoint: free-form text header plus named tensors.
pub struct Checkpoint {
    pub header: String,
    pub params: Vec<(String, bool, ArrayD<f32>)>,
    /// Hex SHA-256 of the file content (excluding the hash itself).
    pub content_hash: String,
}

/// Serialize an arena. The header carries whatever spec text the caller
/// needs to rebuild the architecture.
pub fn save_checkpoint<F: Scalar>(
    path: impl AsRef<Path>,
    header: &str,
    arena: &ParamArena<F>,
) -> Result<String, CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let hbytes = header.as_bytes();
    buf.extend_from_slice(&(hbytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(hbytes);
    buf.extend_from_slice(&(arena.len() as u32).to_le_bytes());
    for (name, value, trainable) in arena.iter_named() {
        let nbytes = name.as_bytes();
        buf.extend_from_slice(&(nbytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(nbytes);
        buf.push(u8::from(trainable));
        buf.push(value.ndim() as u8);
        for d in value.shape() {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(value.len() as u64).to_le_bytes());
        for v in value.iter() {
            buf.extend_from_slice(&(v.to_f64_val() as f32).to_le_bytes());
        }
    }
    let hash = Sha256::digest(&buf);
    let hex = hex_string(&hash);

    // Write-temp-then-rename keeps checkpoint files atomic.
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.write_all(&hash)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(hex)
}

/// Read and verify a checkpoint file.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 32 {
        return Err(CheckpointError::Malformed("file too short".into()));
    }
    let (body, stored_hash) = bytes.split_at(bytes.len() - 32);
    let hash = Sha256::digest(body);
    if hash.as_slice() != stored_hash {
        return Err(CheckpointError::HashMismatch);
    }
    let mut cur = body;
    let magic = take(&mut cur, 8)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let hlen = read_u32(&mut cur)? as usize;
    let header = String::from_utf8(take(&mut cur, hlen)?.to_vec())
        .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    let count = read_u32(&mut cur)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = read_u16(&mut cur)? as usize;
        let name = String::from_utf8(take(&mut cur, nlen)?.to_vec())
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let trainable = take(&mut cur, 1)?[0] != 0;
        let ndim = take(&mut cur, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut cur)? as usize);
        }
        let len = read_u64(&mut cur)? as usize;
        if len != shape.iter().product::<usize>() {
            return Err(CheckpointError::Malformed(format!(
                "length/shape mismatch for `{name}`"
            )));
        }
        let raw = take(&mut cur, len * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let arr = ArrayD::from_shape_vec(shape, data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        params.push((name, trainable, arr));
    }
    Ok(Checkpoint {
        header,
        params,
        content_hash: hex_string(&hash),
    })
}

impl Checkpoint {
    /// Copy every stored tensor into a matching arena entry.
    pub fn load_into<F: Scalar>(&self, arena: &mut ParamArena<F>) -> Result<(), CheckpointError> {
        if self.params.len() != arena.len() {
            return Err(CheckpointError::ParamMismatch(format!(
                "checkpoint has {} tensors, arena expects {}",
                self.params.len(),
                arena.len()
            )));
        }
        for (name, _, arr) in &self.params {
            let cast = arr.mapv(|v| F::from_f64(v as f64));
            arena
                .set_by_name(name, cast)
                .map_err(CheckpointError::ParamMismatch)?;
        }
        Ok(())
    }
}

fn take<'a>(cur: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if cur.len() < n {
        return Err(CheckpointError::Malformed("unexpected end of file".into()));
    }
    let (head, tail) = cur.split_at(n);
    *cur = tail;
    Ok(head)
}

fn read_u16(cur: &mut &[u8]) -> Result<u16, CheckpointError> {
    let b = take(cur, 2)?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(cur: &mut &[u8]) -> Result<u32, CheckpointError> {
    let b = take(cur, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_u64(cur: &mut &[u8]) -> Result<u64, CheckpointError> {
    let b = take(cur, 8)?;
    Ok(u64::from_le_bytes([
        b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
    ]))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
