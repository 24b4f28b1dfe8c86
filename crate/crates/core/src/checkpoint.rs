//! Checkpoint format: a self-describing little-endian binary dump of named
//! parameter stores (data plus Adam moments and step counters) behind a
//! versioned header.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "QMLECKPT"
//! version  u32      currently 1
//! steps    u64      agent environment-step counter
//! n_stores u32
//! per store:
//!   name        u16 length + bytes
//!   adam_step   u64
//!   n_entries   u32
//!   per entry:
//!     name      u16 length + bytes
//!     rows,cols u32, u32
//!     data      rows*cols f64
//!     adam_m    rows*cols f64
//!     adam_v    rows*cols f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ParamStore;

const MAGIC: &[u8; 8] = b"QMLECKPT";
const VERSION: u32 = 1;

fn write_u16(w: &mut impl Write, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    write_u16(w, bytes.len() as u16)?;
    w.write_all(bytes)?;
    Ok(())
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact::<2>(r)?))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u16(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("invalid UTF-8 name".into()))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(f64::from_le_bytes(read_exact::<8>(r)?));
    }
    Ok(out)
}

/// Writes named stores plus an environment-step counter.
pub fn save(path: &Path, env_steps: u64, stores: &[(&str, &ParamStore)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u64(&mut w, env_steps)?;
    write_u32(&mut w, stores.len() as u32)?;
    for (name, store) in stores {
        write_str(&mut w, name)?;
        write_u64(&mut w, store.step())?;
        let entries = store.export_entries();
        write_u32(&mut w, entries.len() as u32)?;
        for (ename, rows, cols, data, m, v) in entries {
            write_str(&mut w, &ename)?;
            write_u32(&mut w, rows as u32)?;
            write_u32(&mut w, cols as u32)?;
            write_f64s(&mut w, data)?;
            write_f64s(&mut w, m)?;
            write_f64s(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Restores stores saved by [`save`] into structurally identical ones.
/// Returns the stored environment-step counter.
pub fn load(path: &Path, stores: &mut [(&str, &mut ParamStore)]) -> Result<u64> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_exact::<8>(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let env_steps = read_u64(&mut r)?;
    let n_stores = read_u32(&mut r)? as usize;
    if n_stores != stores.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {n_stores} stores, expected {}",
            stores.len()
        )));
    }
    for (expected_name, store) in stores.iter_mut() {
        let name = read_str(&mut r)?;
        if name != *expected_name {
            return Err(Error::Checkpoint(format!(
                "store order mismatch: found '{name}', expected '{expected_name}'"
            )));
        }
        let step = read_u64(&mut r)?;
        let n_entries = read_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(n_entries);
        for _ in 0..n_entries {
            let ename = read_str(&mut r)?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let n = rows * cols;
            let data = read_f64s(&mut r, n)?;
            let m = read_f64s(&mut r, n)?;
            let v = read_f64s(&mut r, n)?;
            entries.push((ename, rows, cols, data, m, v));
        }
        store.import_entries(step, &entries)?;
    }
    Ok(env_steps)
}
