//! Versioned binary container for trained parameters.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! "SCSR" | version u8 | cfg_len u32 | cfg utf-8 | rng u64 x2
//! | n_params u32 | { name_len u32 | name | shape u32 x4 | f32 data } ...
//! | crc32 u32 over everything above
//! ```
//!
//! Parameter values are stored as f32. The optimizer keeps every
//! master value quantized to f32 precision, so save followed by load
//! reproduces each parameter bit for bit. The embedded config echo
//! lets a file refuse to load into a differently shaped model.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::tape::ParamBundle;
use crate::tensor::{Shape, Tensor};

const MAGIC: [u8; 4] = *b"SCSR";
const VERSION: u8 = 1;
const MAX_NAME: usize = 4096;
const MAX_CFG: usize = 1 << 20;
const MAX_PARAMS: usize = 1 << 20;

/// A parameter snapshot plus the metadata needed to validate a load.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Flat key=value rendering of the producing config.
    pub config_echo: String,
    /// Training stream position: (seed, completed iterations).
    pub rng_state: [u64; 2],
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    /// Snapshots a model's parameters in bundle order.
    pub fn from_bundle(config_echo: impl Into<String>, rng_state: [u64; 2], bundle: &impl ParamBundle) -> Self {
        Checkpoint {
            config_echo: config_echo.into(),
            rng_state,
            params: bundle
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Writes the stored values into a live model. The config echo and
    /// the full parameter name set must match exactly.
    pub fn load_into(&self, expected_echo: &str, bundle: &mut impl ParamBundle) -> Result<()> {
        if self.config_echo != expected_echo {
            return Err(Error::Checkpoint(format!(
                "config mismatch: file built for\n{}but loading into\n{}",
                self.config_echo, expected_echo
            )));
        }
        let mut stored: HashMap<&str, &Tensor> = self.params.iter().map(|(n, t)| (n.as_str(), t)).collect();
        for p in bundle.params_mut() {
            let t = stored.remove(p.name.as_str()).ok_or_else(|| {
                Error::Checkpoint(format!("parameter `{}` missing from checkpoint", p.name))
            })?;
            if t.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {} in file, {} in model",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
            p.zero_grad();
        }
        if let Some(extra) = stored.keys().next() {
            return Err(Error::Checkpoint(format!(
                "checkpoint contains unexpected parameter `{extra}` ({} extra total)",
                stored.len()
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    let cfg = ckpt.config_echo.as_bytes();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg);
    for word in ckpt.rng_state {
        out.extend_from_slice(&word.to_le_bytes());
    }
    out.extend_from_slice(&(ckpt.params.len() as u32).to_le_bytes());
    for (name, t) in &ckpt.params {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let s = t.shape();
        for d in [s.n, s.c, s.h, s.w] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&crc32fast::hash(&out).to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

/// Byte reader with explicit truncation errors.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() + 1 + 4 {
        return Err(Error::Checkpoint("file too short for a header".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::Checkpoint("checksum mismatch: file is corrupt".into()));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (this build reads {VERSION})"
        )));
    }
    let cfg_len = r.u32()? as usize;
    if cfg_len > MAX_CFG {
        return Err(Error::Checkpoint(format!("config block of {cfg_len} bytes is implausible")));
    }
    let config_echo = String::from_utf8(r.take(cfg_len)?.to_vec())
        .map_err(|_| Error::Checkpoint("config echo is not utf-8".into()))?;
    let rng_state = [r.u64()?, r.u64()?];
    let n_params = r.u32()? as usize;
    if n_params > MAX_PARAMS {
        return Err(Error::Checkpoint(format!("{n_params} parameters is implausible")));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name_len = r.u32()? as usize;
        if name_len > MAX_NAME {
            return Err(Error::Checkpoint(format!("name of {name_len} bytes is implausible")));
        }
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not utf-8".into()))?;
        let dims: Vec<usize> = (0..4).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
        let shape = Shape::new(dims[0], dims[1], dims[2], dims[3]);
        let mut data = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            let v = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
            data.push(v as f64);
        }
        params.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != body.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last parameter",
            body.len() - r.pos
        )));
    }
    Ok(Checkpoint { config_echo, rng_state, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{Generator, GeneratorConfig};
    use crate::tensor::tape::ParamBundle;

    fn tiny(scale: usize) -> GeneratorConfig {
        GeneratorConfig { scale, n_sc_blocks: 1, base_channels: 4, r_pool: 2 }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ckpt");
        let cfg = tiny(2);
        let g = Generator::init(&cfg, 99).unwrap();
        let ckpt = Checkpoint::from_bundle(cfg.echo(), [99, 1234], &g);
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.rng_state, [99, 1234]);
        assert_eq!(back.config_echo, cfg.echo());
        assert_eq!(back.params.len(), ckpt.params.len());
        for ((n1, t1), (n2, t2)) in ckpt.params.iter().zip(back.params.iter()) {
            assert_eq!(n1, n2);
            let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits1, bits2, "{n1} not bitwise equal");
        }
        // And a full load_into round trip leaves the model identical.
        let mut g2 = Generator::init(&cfg, 7).unwrap();
        back.load_into(&cfg.echo(), &mut g2).unwrap();
        for (a, b) in g.params().iter().zip(g2.params().iter()) {
            assert_eq!(a.value.data(), b.value.data(), "{}", a.name);
        }
    }

    #[test]
    fn truncation_and_corruption_are_named_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ckpt");
        let cfg = tiny(2);
        let g = Generator::init(&cfg, 1).unwrap();
        save_checkpoint(&path, &Checkpoint::from_bundle(cfg.echo(), [1, 0], &g)).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_checkpoint(&cut).unwrap_err().to_string();
        assert!(err.contains("corrupt") || err.contains("truncated"), "{err}");

        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x40;
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, &flipped).unwrap();
        let err = load_checkpoint(&bad).unwrap_err().to_string();
        assert!(err.contains("corrupt"), "{err}");

        let not = dir.path().join("not.ckpt");
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        // Fix the crc so only the magic is wrong.
        let crc = crc32fast::hash(&wrong[..wrong.len() - 4]).to_le_bytes();
        let n = wrong.len();
        wrong[n - 4..].copy_from_slice(&crc);
        std::fs::write(&not, &wrong).unwrap();
        let err = load_checkpoint(&not).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn config_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g2.ckpt");
        let cfg2 = tiny(2);
        let g2 = Generator::init(&cfg2, 3).unwrap();
        save_checkpoint(&path, &Checkpoint::from_bundle(cfg2.echo(), [3, 0], &g2)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let cfg4 = tiny(4);
        let mut g4 = Generator::init(&cfg4, 3).unwrap();
        let err = loaded.load_into(&cfg4.echo(), &mut g4).unwrap_err().to_string();
        assert!(err.contains("config mismatch"), "{err}");
    }

    #[test]
    fn version_bumps_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.ckpt");
        let cfg = tiny(2);
        let g = Generator::init(&cfg, 1).unwrap();
        save_checkpoint(&path, &Checkpoint::from_bundle(cfg.echo(), [1, 0], &g)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = VERSION + 1;
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]).to_le_bytes();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&crc);
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
