//! Binary checkpoints, all integers little-endian:
//!
//! ```text
//! "PDCK"  u8 version  u32 arch_len  arch utf-8  u64 seed  u64 epoch  u64 n  n × f64
//! ```

use std::path::Path;

use super::arch::ArchSpec;
use super::net::Network;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

const MAGIC: &[u8; 4] = b"PDCK";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchSpec,
    pub seed: u64,
    pub epoch: u64,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of<T: Scalar>(net: &Network<T>, seed: u64, epoch: u64) -> Self {
        Self {
            arch: net.arch().clone(),
            seed,
            epoch,
            params: net.params().iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.arch.to_string();
        let mut out = Vec::with_capacity(29 + arch.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        out.extend_from_slice(arch.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::invalid("not a checkpoint: bad magic"));
        }
        let version = r.take(1)?[0];
        if version != VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {version}")));
        }
        let arch_len = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as usize;
        let text = std::str::from_utf8(r.take(arch_len)?).map_err(|_| Error::invalid("checkpoint arch is not UTF-8"))?;
        let arch = ArchSpec::parse(text)?;
        let seed = r.u64()?;
        let epoch = r.u64()?;
        let n = r.u64()? as usize;
        if n != arch.param_count() {
            return Err(Error::invalid(format!(
                "checkpoint holds {n} parameters but {arch} needs {}",
                arch.param_count()
            )));
        }
        let params = (0..n)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<f64>>>()?;
        if r.at != bytes.len() {
            return Err(Error::invalid("trailing bytes after checkpoint parameters"));
        }
        Ok(Self {
            arch,
            seed,
            epoch,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Rebuilds the network; dropout and pooling settings come from `cfg`.
    pub fn network<T: Scalar>(&self, cfg: &TrainConfig) -> Result<Network<T>> {
        let mut net = Network::zeroed(&self.arch, cfg)?;
        let params: Vec<T> = self.params.iter().map(|&v| T::lit(v)).collect();
        net.set_params(&params)?;
        Ok(net)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::invalid("truncated checkpoint"))?;
        self.at += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
