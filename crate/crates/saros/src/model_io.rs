//! Binary model files.
//!
//! Layout, all little-endian: the 4 bytes `SARM`, a `u32` format version
//! (1), `n_users`, `n_items` and `dim` as `u64`, then the user matrix and the
//! item matrix as row-major `f64`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use saros_core::LatentModel;

pub const MAGIC: [u8; 4] = *b"SARM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 8;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model contents: {0}")]
    Corrupt(String),
}

pub fn write_model<W: Write>(mut w: W, model: &LatentModel) -> io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for n in [model.n_users(), model.n_items(), model.dim()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in model.user_factors().iter().chain(model.item_factors()) {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()
}

pub fn save_model(path: &Path, model: &LatentModel) -> io::Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

fn read_up_to<R: Read>(r: &mut R, n: u64) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(n).read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn read_model<R: Read>(mut r: R) -> Result<LatentModel, ModelIoError> {
    let head = read_up_to(&mut r, HEADER_LEN as u64)?;
    if head.len() >= 4 && head[..4] != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    if head.len() < HEADER_LEN {
        return Err(ModelIoError::Truncated {
            expected: HEADER_LEN as u64,
            found: head.len() as u64,
        });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelIoError::UnsupportedVersion(version));
    }
    let dim_at = |i: usize| u64::from_le_bytes(head[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
    let (n_users, n_items, dim) = (dim_at(0), dim_at(1), dim_at(2));
    let payload = n_users
        .checked_add(n_items)
        .and_then(|rows| rows.checked_mul(dim))
        .and_then(|cells| cells.checked_mul(8))
        .ok_or_else(|| ModelIoError::DimensionMismatch(format!("header shape {n_users}x{n_items}x{dim} overflows")))?;
    let body = read_up_to(&mut r, payload)?;
    if (body.len() as u64) < payload {
        return Err(ModelIoError::Truncated {
            expected: HEADER_LEN as u64 + payload,
            found: HEADER_LEN as u64 + body.len() as u64,
        });
    }
    if !read_up_to(&mut r, 1)?.is_empty() {
        return Err(ModelIoError::DimensionMismatch(format!(
            "payload is longer than the declared shape {n_users}x{n_items}x{dim}"
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let split = (n_users * dim) as usize;
    let items = values[split..].to_vec();
    let mut users = values;
    users.truncate(split);
    LatentModel::from_parts(n_users as usize, n_items as usize, dim as usize, users, items)
        .map_err(|e| ModelIoError::Corrupt(e.to_string()))
}

pub fn load_model(path: &Path) -> Result<LatentModel, ModelIoError> {
    read_model(BufReader::new(File::open(path)?))
}

/// Checks that a loaded model covers exactly the given vocabulary.
pub fn check_shape(model: &LatentModel, n_users: usize, n_items: usize) -> Result<(), ModelIoError> {
    if model.n_users() != n_users || model.n_items() != n_items {
        return Err(ModelIoError::DimensionMismatch(format!(
            "model has {} users x {} items, data has {n_users} x {n_items}",
            model.n_users(),
            model.n_items()
        )));
    }
    Ok(())
}

/// True when `bytes` start like a model file.
pub fn looks_like_model(bytes: &[u8]) -> bool {
    bytes.starts_with(&MAGIC)
}
