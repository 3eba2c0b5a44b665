//! Versioned binary checkpoint.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic       8 bytes  "TCNCKPT\0"
//! version     u8       = 1
//! n_blocks    u32
//! kernel      u32
//! dropout_p   f64
//! padding     u8       0 = symmetric, 1 = causal
//! init        u8 + f64 0 = He (f64 unused, 0), 1 = normal with the given std
//! blocks      n_blocks x (width u32, dilation u32)
//! seed        u64
//! norm stats  4 x f64  seismic mean, seismic std, impedance mean, impedance std
//! n_tensors   u32
//! tensors     n_tensors x (len u32, len x f64)
//! n_history   u32
//! history     n_history x f64
//! ```
//!
//! Parameter tensors appear in canonical order: per block conv1, conv2, then
//! the 1x1 skip when present, then the head; `v`, `g`, `bias` for each. Their
//! shapes follow from the config, so only lengths are stored and checked.

use std::fs;
use std::path::Path;

use crate::data::{NormStats, Normalizer};
use crate::error::{Error, Result};
use crate::nn::{InitScheme, PaddingMode};
use crate::rng::Rng;
use crate::tcn::{ModelParams, TcnConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TCNCKPT\0";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Everything needed to reproduce predictions of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TcnConfig,
    pub params: ModelParams,
    pub stats: NormStats,
    /// Mean training loss of each epoch (normalized units).
    pub history: Vec<f64>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        let c = &self.config;
        out.extend_from_slice(&(c.n_blocks() as u32).to_le_bytes());
        out.extend_from_slice(&(c.kernel as u32).to_le_bytes());
        out.extend_from_slice(&c.dropout_p.to_le_bytes());
        out.push(match c.padding {
            PaddingMode::Symmetric => 0,
            PaddingMode::Causal => 1,
        });
        let (tag, std) = match c.init {
            InitScheme::He => (0u8, 0.0f64),
            InitScheme::Normal { std } => (1, std),
        };
        out.push(tag);
        out.extend_from_slice(&std.to_le_bytes());
        for (&w, &d) in c.channels.iter().zip(&c.dilations) {
            out.extend_from_slice(&(w as u32).to_le_bytes());
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        for x in [
            self.stats.seismic.mean,
            self.stats.seismic.std,
            self.stats.impedance.mean,
            self.stats.impedance.std,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.history.len() as u32).to_le_bytes());
        for h in &self.history {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out
    }

    /// Errors: [`Error::Format`] for a wrong magic, inconsistent lengths or
    /// trailing bytes, [`Error::Version`] for an unknown version byte,
    /// [`Error::Truncated`] when the data ends early.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8).ok() != Some(&CHECKPOINT_MAGIC[..]) {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u8()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version(version));
        }
        let n_blocks = r.u32()? as usize;
        let kernel = r.u32()? as usize;
        let dropout_p = r.f64()?;
        let padding = match r.u8()? {
            0 => PaddingMode::Symmetric,
            1 => PaddingMode::Causal,
            other => return Err(Error::Format(format!("unknown padding mode {other}"))),
        };
        let init = match (r.u8()?, r.f64()?) {
            (0, _) => InitScheme::He,
            (1, std) => InitScheme::Normal { std },
            (other, _) => return Err(Error::Format(format!("unknown init scheme {other}"))),
        };
        if n_blocks == 0 || n_blocks > 64 {
            return Err(Error::Format(format!("implausible block count {n_blocks}")));
        }
        let mut channels = Vec::with_capacity(n_blocks);
        let mut dilations = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            channels.push(r.u32()? as usize);
            dilations.push(r.u32()? as usize);
        }
        let config = TcnConfig {
            kernel,
            dropout_p,
            channels,
            dilations,
            padding,
            init,
        };
        config
            .validate()
            .map_err(|e| Error::Format(format!("stored config invalid: {e}")))?;
        let seed = r.u64()?;
        let stats = NormStats {
            seismic: Normalizer {
                mean: r.f64()?,
                std: r.f64()?,
            },
            impedance: Normalizer {
                mean: r.f64()?,
                std: r.f64()?,
            },
        };

        // Shapes come from the config; a throwaway init provides the layout.
        let mut params = ModelParams::init(&config, &mut Rng::new(0))?;
        let n_tensors = r.u32()? as usize;
        let mut slots = params.tensors_mut();
        if n_tensors != slots.len() {
            return Err(Error::Format(format!(
                "config implies {} parameter tensors, file has {n_tensors}",
                slots.len()
            )));
        }
        for (k, slot) in slots.iter_mut().enumerate() {
            let len = r.u32()? as usize;
            if len != slot.len() {
                return Err(Error::Format(format!(
                    "parameter tensor {k}: length field {len}, expected {}",
                    slot.len()
                )));
            }
            for v in slot.data_mut() {
                *v = r.f64()?;
            }
            slot.check_finite("checkpoint parameters")?;
        }
        let n_hist = r.u32()? as usize;
        if n_hist > r.remaining() / 8 {
            return Err(Error::Truncated(format!("history of {n_hist} epochs")));
        }
        let history = (0..n_hist).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }
        params
            .check_matches(&config)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(Checkpoint {
            config,
            params,
            stats,
            history,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, c: &Checkpoint) -> Result<()> {
    c.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(format!(
                "checkpoint ends at byte {}, needed {} more",
                self.bytes.len(),
                n - self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
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

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = TcnConfig {
            padding: PaddingMode::Causal,
            init: InitScheme::He,
            ..TcnConfig::new(3, 4, 3, 0.1)
        };
        Checkpoint {
            params: ModelParams::init(&config, &mut Rng::new(7)).unwrap(),
            config,
            stats: NormStats {
                seismic: Normalizer { mean: 0.01, std: 0.2 },
                impedance: Normalizer { mean: 6000.0, std: 1500.0 },
            },
            history: vec![1.0, 0.5, 0.25],
            seed: 42,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let b = c.to_bytes();
        let back = Checkpoint::from_bytes(&b).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), b);
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[..8], b"TCNCKPT\0");
        assert_eq!(b[8], 1);
        assert_eq!(&b[9..13], &3u32.to_le_bytes());
        assert_eq!(&b[13..17], &3u32.to_le_bytes());
        assert_eq!(&b[17..25], &0.1f64.to_le_bytes());
        assert_eq!(b[25], 1);
    }

    #[test]
    fn distinct_errors() {
        let b = sample().to_bytes();
        let mut bad_version = b.clone();
        bad_version[8] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad_version), Err(Error::Version(9))));

        let mut bad_magic = b.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Format(_))));

        assert!(matches!(Checkpoint::from_bytes(&b[..b.len() - 3]), Err(Error::Truncated(_))));
        assert!(matches!(Checkpoint::from_bytes(&b[..20]), Err(Error::Truncated(_))));

        // First tensor length field sits after the fixed header:
        // 8 + 1 + 4 + 4 + 8 + 1 + 9 (init) + 3 * 8 (blocks) + 8 (seed) + 32 (stats) + 4 (count).
        let off = 8 + 1 + 4 + 4 + 8 + 1 + 9 + 3 * 8 + 8 + 32 + 4;
        let mut bad_len = b.clone();
        bad_len[off..off + 4].copy_from_slice(&999u32.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&bad_len), Err(Error::Format(_))));

        let mut trailing = b;
        trailing.push(0);
        assert!(matches!(Checkpoint::from_bytes(&trailing), Err(Error::Format(_))));
    }
}
