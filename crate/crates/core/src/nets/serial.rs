//! Versioned flat binary format for network parameters: magic bytes, an
//! architecture header, then little-endian 64-bit floats (per layer:
//! weights row-major, then biases).

use crate::error::{Error, Result};
use crate::nets::mlp::{Arch, HeadKind, NetParams};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DGNP";
const VERSION: u32 = 1;

pub fn params_to_bytes(params: &NetParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match params.arch.head {
        HeadKind::Score => 0,
        HeadKind::Discriminator => 1,
    });
    out.extend_from_slice(&(params.arch.data_dim as u32).to_le_bytes());
    out.extend_from_slice(&(params.arch.time_embed as u32).to_le_bytes());
    out.extend_from_slice(&(params.arch.hidden.len() as u32).to_le_bytes());
    for &h in &params.arch.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    for layer in &params.layers {
        for &v in layer.w.iter().chain(&layer.b) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("parameter file truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<NetParams> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let head = match cur.take(1)?[0] {
        0 => HeadKind::Score,
        1 => HeadKind::Discriminator,
        other => return Err(Error::Format(format!("unknown head tag {other}"))),
    };
    let data_dim = cur.u32()? as usize;
    let time_embed = cur.u32()? as usize;
    let n_hidden = cur.u32()? as usize;
    if n_hidden > 64 {
        return Err(Error::Format(format!("implausible hidden layer count {n_hidden}")));
    }
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(cur.u32()? as usize);
    }
    let arch = Arch { data_dim, hidden, time_embed, head };
    let mut params = NetParams::zeros(arch)?;
    for layer in &mut params.layers {
        for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
            *v = cur.f64()?;
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - cur.pos
        )));
    }
    Ok(params)
}

pub fn save_params<P: AsRef<Path>>(params: &NetParams, path: P) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&params_to_bytes(params))?;
    Ok(())
}

pub fn load_params<P: AsRef<Path>>(path: P) -> Result<NetParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    params_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_params() {
        let net = NetParams::init(Arch::standard(2, HeadKind::Discriminator), 3).unwrap();
        let bytes = params_to_bytes(&net);
        let back = params_from_bytes(&bytes).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let net = NetParams::init(Arch::standard(1, HeadKind::Score), 3).unwrap();
        let mut bytes = params_to_bytes(&net);

        assert!(matches!(params_from_bytes(&bytes[..10]), Err(Error::Format(_))));

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(params_from_bytes(&wrong_magic), Err(Error::Format(_))));

        bytes.push(0);
        assert!(matches!(params_from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = NetParams::init(Arch::standard(2, HeadKind::Score), 5).unwrap();
        save_params(&net, &path).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(net, back);
    }
}
