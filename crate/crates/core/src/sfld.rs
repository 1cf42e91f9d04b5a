//! SFLD1: a small self-describing binary container for spectral fields.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic bytes "SFLD"
//! 4       4     u32 format version (1)
//! 8       4     u32 dimension d
//! 12      4     u32 component count
//! 16      1     u8  real flag (1 = amplitudes are Hermitian-symmetric,
//!                   physical samples real; 0 = literal one-sided data)
//! 17      8*d   u64 per-axis mode counts (row-major order)
//! ..      8*d   f64 per-axis torus periods
//! ..      rest  payload: for each lattice site in row-major wavevector
//!               order, for each component, (re, im) as f64 pairs
//! ```
//!
//! The payload is exactly `product(shape) * ncomp * 16` bytes; a trailing
//! byte mismatch is a format error.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use num_complex::Complex64;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SFLD";
pub const VERSION: u32 = 1;

pub fn write_field(path: &Path, field: &SpectralField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.dims() as u32).to_le_bytes())?;
    w.write_all(&(field.ncomp() as u32).to_le_bytes())?;
    w.write_all(&[u8::from(field.hermitian)])?;
    for &n in field.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in field.period() {
        w.write_all(&l.to_le_bytes())?;
    }
    let ncomp = field.ncomp();
    let comps: Vec<&[Complex64]> = (0..ncomp).map(|c| field.comp(c)).collect();
    for s in 0..field.nsites() {
        for comp in &comps {
            let z = comp[s];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than SFLD1 header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported SFLD version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let ncomp = read_u32(&mut r)? as usize;
    if d == 0 || d > 16 || ncomp == 0 || ncomp > 64 {
        return Err(Error::Format(format!("implausible header: d={d}, ncomp={ncomp}")));
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let mut shape = Vec::with_capacity(d);
    for _ in 0..d {
        let n = read_u64(&mut r)? as usize;
        if n == 0 {
            return Err(Error::Format("zero axis length".into()));
        }
        shape.push(n);
    }
    let mut period = Vec::with_capacity(d);
    for _ in 0..d {
        let l = read_f64(&mut r)?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Format(format!("nonpositive period {l}")));
        }
        period.push(l);
    }

    let mut field = SpectralField::zeros(&shape, &period, ncomp);
    field.hermitian = flag[0] != 0;
    let nsites = field.nsites();
    {
        // read payload site-major, scatter into component-major storage
        let mut buf = vec![0u8; ncomp * 16];
        for s in 0..nsites {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("truncated SFLD payload".into()))?;
            for c in 0..ncomp {
                let re = f64::from_le_bytes(buf[c * 16..c * 16 + 8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[c * 16 + 8..c * 16 + 16].try_into().unwrap());
                field.comp_mut(c)[s] = Complex64::new(re, im);
            }
        }
    }
    // no trailing garbage
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after SFLD payload".into()));
    }
    Ok(field)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated SFLD header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated SFLD header".into()))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated SFLD header".into()))?;
    Ok(f64::from_le_bytes(b))
}
