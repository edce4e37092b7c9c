//! Binary checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "MOLCAPCK" | u32 format version | u32 settings length | settings (key = value UTF-8)
//! u64 vocabulary size | 32-byte vocabulary fingerprint | u8 precision (32 or 64)
//! u32 parameter count | per parameter:
//!     u32 name length | name | u32 rank | u64 dims… | values (f32 or f64)
//! ```

use std::path::Path;

use molcap_core::harness::CaptionModel;
use molcap_core::numerics::{ParamStore, Tensor};
use molcap_core::text::Vocabulary;
use molcap_core::Error;

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::vocab_file::fingerprint;

pub const MAGIC: &[u8; 8] = b"MOLCAPCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub settings: Settings,
    pub vocab_size: usize,
    pub vocab_fingerprint: [u8; 32],
    pub precision: Precision,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn capture(model: &CaptionModel, store: &ParamStore, vocab: &Vocabulary, precision: Precision) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| NamedTensor { name: p.name.clone(), shape: p.value.shape().to_vec(), values: p.value.data().to_vec() })
            .collect();
        Self {
            settings: Settings { run: model.config, ablation: model.ablation },
            vocab_size: vocab.len(),
            vocab_fingerprint: fingerprint(vocab),
            precision,
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let settings = self.settings.to_kv();
        out.extend_from_slice(&(settings.len() as u32).to_le_bytes());
        out.extend_from_slice(settings.as_bytes());
        out.extend_from_slice(&(self.vocab_size as u64).to_le_bytes());
        out.extend_from_slice(&self.vocab_fingerprint);
        out.push(self.precision.bits());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &p.values {
                match self.precision {
                    Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
        out
    }

    /// Parses checkpoint bytes; `path` only labels errors, whose line field
    /// carries the byte offset.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(CliError::format(path, 0, "not a molcap checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version(format!(
                "checkpoint format version {version}, this build reads version {FORMAT_VERSION}"
            ))
            .into());
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|e| r.err(e.to_string()))?;
        let mut settings = Settings::default();
        settings.apply_kv(text, path)?;
        let vocab_size = r.u64()? as usize;
        let vocab_fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let precision = match r.take(1)?[0] {
            32 => Precision::F32,
            64 => Precision::F64,
            b => return Err(r.err(format!("unknown precision {b}"))),
        };
        let count = r.u32()? as usize;
        let mut params = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|e| r.err(e.to_string()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let width = precision.bits() as usize / 8;
            let raw = r.take(n.checked_mul(width).ok_or_else(|| r.err("tensor size overflows"))?)?;
            let values = match precision {
                Precision::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
                Precision::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            };
            params.push(NamedTensor { name, shape, values });
        }
        if r.pos != bytes.len() {
            return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { settings, vocab_size, vocab_fingerprint, precision, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Rebuilds the model and its parameters. The vocabulary must be the one
    /// the checkpoint was trained with.
    pub fn restore(&self, vocab: &Vocabulary) -> Result<(ParamStore, CaptionModel)> {
        if vocab.len() != self.vocab_size || fingerprint(vocab) != self.vocab_fingerprint {
            return Err(Error::Version(format!(
                "vocabulary ({} tokens) does not match the checkpoint's ({} tokens)",
                vocab.len(),
                self.vocab_size
            ))
            .into());
        }
        let mut store = ParamStore::new();
        let model = CaptionModel::new(&mut store, vocab, self.settings.run, self.settings.ablation)?;
        if store.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "checkpoint holds {} parameters, the model has {}",
                self.params.len(),
                store.len()
            ))
            .into());
        }
        for p in &self.params {
            let id = store
                .id(&p.name)
                .ok_or_else(|| Error::Dimension(format!("checkpoint parameter {} is not in the model", p.name)))?;
            store.set_value(id, Tensor::new(&p.shape, p.values.clone())?)?;
        }
        Ok((store, model))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> CliError {
        CliError::format(self.path, self.pos, message)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| self.err("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
