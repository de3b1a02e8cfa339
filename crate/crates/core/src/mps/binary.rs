//! Binary MPS container.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "TNCS" | version | N | d | (left, right) x N | payload
//! ```
//!
//! The payload stores each active site as `d * left * right` little-endian
//! `f64` values in (physical, left, right) row-major order. A measured-out
//! site is written with bond dimensions `(0, 0)` and contributes no payload.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{Mps, SiteTensor};
use crate::error::{Result, TncsError};

pub const MAGIC: &[u8; 4] = b"TNCS";
pub const FORMAT_VERSION: u32 = 1;

const PHYS_DIM: u32 = 2;
const MAX_BOND: u32 = 1 << 16;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

impl Mps {
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&PHYS_DIM.to_le_bytes())?;
        for t in &self.sites {
            let (l, r) = t[0].shape();
            w.write_all(&(l as u32).to_le_bytes())?;
            w.write_all(&(r as u32).to_le_bytes())?;
        }
        for t in &self.sites {
            let (l, r) = t[0].shape();
            for m in t {
                for i in 0..l {
                    for j in 0..r {
                        w.write_all(&m[(i, j)].to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TncsError::format("bad MPS magic"));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(TncsError::format(format!(
                "unsupported MPS format version {version}"
            )));
        }
        let n = read_u32(r)? as usize;
        let d = read_u32(r)?;
        if d != PHYS_DIM {
            return Err(TncsError::format(format!(
                "physical dimension {d} unsupported"
            )));
        }
        let mut dims = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let l = read_u32(r)?;
            let rr = read_u32(r)?;
            if l > MAX_BOND || rr > MAX_BOND {
                return Err(TncsError::format(format!("bond ({l}, {rr}) too large")));
            }
            dims.push((l as usize, rr as usize));
        }
        let mut sites: Vec<SiteTensor> = Vec::with_capacity(n);
        let mut active = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for &(l, rr) in &dims {
            if (l == 0) != (rr == 0) {
                return Err(TncsError::format("half-empty bond pair"));
            }
            active.push(l != 0);
            let mut t = [DMatrix::zeros(l, rr), DMatrix::zeros(l, rr)];
            for m in t.iter_mut() {
                for i in 0..l {
                    for j in 0..rr {
                        r.read_exact(&mut buf)?;
                        m[(i, j)] = f64::from_le_bytes(buf);
                    }
                }
            }
            sites.push(t);
        }
        Mps::from_parts(sites, active).map_err(|e| match e {
            TncsError::Structural(msg) => TncsError::Format(msg),
            other => other,
        })
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_binary(&mut bytes)
    }
}
