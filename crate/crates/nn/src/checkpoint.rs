//! Flat binary checkpoint format.
//!
//! ```text
//! magic      8 bytes   "SIMNNCK1"
//! count      u32 LE    number of tensors
//! per tensor u32 LE    rank, then rank × u64 LE dimensions
//! payload    f64 LE    all values, tensors in table order, row-major
//! ```

use std::io::{Read, Write};

use crate::tensor::Param;
use crate::{NnError, Result};

pub const MAGIC: &[u8; 8] = b"SIMNNCK1";

pub fn write_params<W: Write>(mut out: W, params: &[&Param]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params {
        out.write_all(&(p.shape().len() as u32).to_le_bytes())?;
        for &d in p.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for p in params {
        for v in p.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Loads values into `params`, which must match the stored shape table
/// exactly. Gradients are left untouched.
pub fn read_params<R: Read>(mut input: R, params: &mut [&mut Param]) -> Result<()> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic bytes".into()));
    }
    let count = read_u32(&mut input)? as usize;
    if count != params.len() {
        return Err(NnError::Checkpoint(format!(
            "file holds {count} tensors, network has {}",
            params.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        let rank = read_u32(&mut input)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut input)? as usize);
        }
        if shape != p.shape() {
            return Err(NnError::Checkpoint(format!(
                "tensor {i} has shape {shape:?}, expected {:?}",
                p.shape()
            )));
        }
    }
    for p in params.iter_mut() {
        for v in p.value.data_mut() {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    Ok(())
}
