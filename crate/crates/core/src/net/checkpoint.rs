//! Binary checkpoint: magic, version, role, architecture descriptor, then the
//! parameters as little-endian `f64`. Integers are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Architecture, LayerSpec, NetParams, Role};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SM2CNET\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(params: &NetParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(match params.role {
        Role::Teacher => 0,
        Role::Student => 1,
    });
    out.extend_from_slice(&(params.arch.layers.len() as u32).to_le_bytes());
    for l in &params.arch.layers {
        for v in [l.kernel, l.in_ch, l.out_ch] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(l.relu as u8);
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse(bytes: &[u8]) -> std::result::Result<NetParams, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let role = match r.u8()? {
        0 => Role::Teacher,
        1 => Role::Student,
        other => return Err(format!("unknown role tag {other}")),
    };
    let n_layers = r.u32()? as usize;
    if n_layers > 64 {
        return Err(format!("implausible layer count {n_layers}"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let kernel = r.u32()? as usize;
        let in_ch = r.u32()? as usize;
        let out_ch = r.u32()? as usize;
        let relu = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(format!("bad relu flag {other}")),
        };
        layers.push(LayerSpec::conv(kernel, in_ch, out_ch, relu));
    }
    let arch = Architecture { layers };
    arch.validate().map_err(|e| e.to_string())?;
    let n = r.u64()? as usize;
    if n != arch.param_count() {
        return Err(format!(
            "stored {n} parameters, architecture needs {}",
            arch.param_count()
        ));
    }
    let values = r
        .take(n.checked_mul(8).ok_or("parameter count overflow")?)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(NetParams { arch, values, role })
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<NetParams> {
    parse(bytes).map_err(Error::InvalidInput)
}

/// Writes atomically: temp file in the same directory, then rename.
pub fn save_checkpoint(params: &NetParams, path: &Path) -> Result<()> {
    crate::io_util::write_atomic(path, &write_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<NetParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = NetParams::init(Architecture::default_for(4), Role::Student, &mut RngState::new(2));
        let bytes = write_checkpoint(&p);
        let q = read_checkpoint(&bytes).unwrap();
        assert_eq!(p.role, q.role);
        assert_eq!(p.arch, q.arch);
        assert!(p.values.iter().zip(&q.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(write_checkpoint(&q), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let p = NetParams::zeros(Architecture::default_for(3), Role::Teacher);
        let bytes = write_checkpoint(&p);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(read_checkpoint(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(read_checkpoint(&long).is_err());
    }
}
