//! Binary dataset container and per-record CSV export.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MGSQ" | u32 version=1 | u64 count | u32 n_steps | f64 tau | f64 kappa
//! | f64 mu | f64 gamma_b | f64 sigma_b | u64 seed | u32 rng_id
//! then per record: n_steps f64 signal values, n_steps f64 field values
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Dataset, PhysicsParams, Record};
use crate::error::{Error, Result};
use crate::rng::RNG_ID_CHACHA20_STREAM;

pub const DATASET_MAGIC: [u8; 4] = *b"MGSQ";
pub const DATASET_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 5 * 8 + 8 + 4;

pub fn header_bytes(d: &Dataset) -> Vec<u8> {
    let p = &d.params;
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(&DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(d.records.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(p.n_steps as u32).to_le_bytes());
    for v in [p.tau, p.kappa, p.mu, p.gamma_b, p.sigma_b] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&d.seed.to_le_bytes());
    buf.extend_from_slice(&d.rng_id.to_le_bytes());
    buf
}

/// SHA-256 of the encoded header, hex.
pub fn header_digest(d: &Dataset) -> String {
    hex::encode(Sha256::digest(header_bytes(d)))
}

pub fn write_dataset<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    d.validate()?;
    w.write_all(&header_bytes(d))?;
    let mut row = Vec::with_capacity(d.params.n_steps * 8);
    for r in &d.records {
        for series in [&r.signal, &r.field] {
            row.clear();
            for v in series {
                row.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    write_dataset(d, BufWriter::new(f))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(Error::Truncated {
                expected: end as u64,
                found: self.buf.len() as u64,
            });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };

    let magic: [u8; 4] = c.take()?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = c.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = c.u64()?;
    let n_steps = c.u32()? as usize;
    let tau = c.f64()?;
    let kappa = c.f64()?;
    let mu = c.f64()?;
    let gamma_b = c.f64()?;
    let sigma_b = c.f64()?;
    let seed = c.u64()?;
    let rng_id = c.u32()?;
    if rng_id != RNG_ID_CHACHA20_STREAM {
        return Err(Error::UnknownRng(rng_id));
    }
    let params = PhysicsParams {
        kappa,
        mu,
        tau,
        n_steps,
        gamma_b,
        sigma_b,
    };
    params.validate()?;

    let payload = (count as u128) * (n_steps as u128) * 16;
    let available = (buf.len() - HEADER_LEN) as u128;
    if payload > available {
        return Err(Error::Truncated {
            expected: (HEADER_LEN as u128 + payload).min(u64::MAX as u128) as u64,
            found: buf.len() as u64,
        });
    }
    if payload < available {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last record",
            available - payload
        )));
    }

    let series = |c: &mut Cursor| -> Result<Vec<f64>> { (0..n_steps).map(|_| c.f64()).collect() };
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let signal = series(&mut c)?;
        let field = series(&mut c)?;
        records.push(Record::new(signal, field)?);
    }
    Ok(Dataset {
        params,
        records,
        seed,
        rng_id,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let f = File::open(path)?;
    read_dataset(BufReader::new(f))
}

/// `t,signal,field` for one record.
pub fn write_record_csv<W: Write>(params: &PhysicsParams, rec: &Record, mut w: W) -> Result<()> {
    writeln!(w, "t,signal,field")?;
    for (k, (x, b)) in rec.signal.iter().zip(&rec.field).enumerate() {
        writeln!(w, "{},{},{}", params.time(k), x, b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_dataset;

    fn small() -> Dataset {
        let p = PhysicsParams {
            n_steps: 16,
            ..PhysicsParams::reference()
        };
        generate_dataset(&p, 3, 11).unwrap()
    }

    fn encode(d: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset(d, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_identity() {
        let d = small();
        let bytes = encode(&d);
        assert_eq!(bytes.len(), HEADER_LEN + 3 * 16 * 16);
        let back = read_dataset(&bytes[..]).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn corrupted_magic_is_a_format_error() {
        let mut bytes = encode(&small());
        bytes[0] = b'X';
        assert!(matches!(read_dataset(&bytes[..]), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut bytes = encode(&small());
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            read_dataset(&bytes[..]),
            Err(Error::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn inflated_count_is_truncation() {
        let mut bytes = encode(&small());
        bytes[8..16].copy_from_slice(&4u64.to_le_bytes());
        assert!(matches!(read_dataset(&bytes[..]), Err(Error::Truncated { .. })));
        // a header cut short is truncation too
        assert!(matches!(read_dataset(&bytes[..20]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn record_csv_has_one_row_per_sample() {
        let d = small();
        let mut out = Vec::new();
        write_record_csv(&d.params, &d.records[0], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,signal,field");
        assert_eq!(lines.len(), 17);
    }
}
