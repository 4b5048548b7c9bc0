//! Binary checkpoint (little-endian):
//!
//! ```text
//! "MGNN" | u32 version=1 | u32 m | u32 input_dim=1
//! | encoder{W_ri,W_rf,W_rc,W_ro,W_hi,W_hf,W_hc,W_ho,b_i,b_f,b_c,b_o}
//! | decoder{same} | W_out | b_out
//! ```
//!
//! Matrices are row-major f64. The optional input normalization is not part
//! of this format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::model::Seq2SeqModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MGNN";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn checkpoint_bytes(model: &Seq2SeqModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * model.n_params());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.hidden() as u32).to_le_bytes());
    buf.extend_from_slice(&1u32.to_le_bytes());
    for block in model.blocks() {
        for v in block {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// SHA-256 of the checkpoint bytes, hex.
pub fn checksum(model: &Seq2SeqModel) -> String {
    hex::encode(Sha256::digest(checkpoint_bytes(model)))
}

pub fn write_checkpoint<W: Write>(model: &Seq2SeqModel, mut w: W) -> Result<()> {
    w.write_all(&checkpoint_bytes(model))?;
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(model: &Seq2SeqModel, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Seq2SeqModel> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: buf.len() as u64,
        });
    }
    let word = |i: usize| u32::from_le_bytes(buf[4 * i..4 * i + 4].try_into().unwrap());
    let magic: [u8; 4] = buf[..4].try_into().unwrap();
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    if word(1) != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(word(1)));
    }
    let m = word(2) as usize;
    if word(3) != 1 {
        return Err(Error::Format(format!("input_dim must be 1, found {}", word(3))));
    }
    if m == 0 {
        return Err(Error::Format("hidden size must be positive".into()));
    }

    let mut model = Seq2SeqModel::zeros(m);
    let expected = HEADER_LEN + 8 * model.n_params();
    if buf.len() < expected {
        return Err(Error::Truncated {
            expected: expected as u64,
            found: buf.len() as u64,
        });
    }
    if buf.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - expected)));
    }
    let mut values = buf[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for block in model.blocks_mut() {
        for v in block.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    if !model.is_consistent() {
        return Err(Error::Format("checkpoint contains non-finite weights".into()));
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Seq2SeqModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
