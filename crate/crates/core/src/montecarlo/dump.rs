//! Binary stream dumps: a fixed little-endian header followed by each
//! detector's samples in turn.
//!
//! ```text
//! "SBMC" | version u32 | f_s f64 | M u64 | length u64 | seed u64 | M·length f64
//! ```

use std::io::{self, Read, Write};

use super::DetectorStreams;

const MAGIC: &[u8; 4] = b"SBMC";
const VERSION: u32 = 1;

pub fn write_dump<W: Write>(mut w: W, streams: &DetectorStreams) -> io::Result<()> {
    let length = streams.len();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&streams.sample_rate.to_le_bytes())?;
    w.write_all(&(streams.data.len() as u64).to_le_bytes())?;
    w.write_all(&(length as u64).to_le_bytes())?;
    w.write_all(&streams.seed.to_le_bytes())?;
    for ch in &streams.data {
        for x in ch {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a dump. Detector names are not stored and come back as `D1..DM`.
pub fn read_dump<R: Read>(mut r: R) -> io::Result<DetectorStreams> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if &b4 != MAGIC {
        return Err(bad("not a stream dump (bad magic)"));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(bad(format!("unsupported dump version {version}")));
    }
    let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let sample_rate = f64::from_le_bytes(next(&mut r)?);
    let m = u64::from_le_bytes(next(&mut r)?) as usize;
    let length = u64::from_le_bytes(next(&mut r)?) as usize;
    let seed = u64::from_le_bytes(next(&mut r)?);
    let mut data = Vec::with_capacity(m);
    for _ in 0..m {
        let mut raw = vec![0u8; length.checked_mul(8).ok_or_else(|| bad("dump too large"))?];
        r.read_exact(&mut raw)?;
        data.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
    }
    Ok(DetectorStreams {
        sample_rate,
        seed,
        names: (1..=m).map(|k| format!("D{k}")).collect(),
        data,
    })
}
