//! Binary checkpoint container.
//!
//! All integers are little-endian `u64` unless noted; floats are raw
//! little-endian `f64`.
//!
//! ```text
//! magic      8 bytes  "ACUBECKP"
//! version    u32
//! config     len + UTF-8 key = value text (canonical form)
//! iteration  completed training iterations
//! opt_step   optimizer step counter
//! count      number of parameter records
//! record     name (len + UTF-8), 4 dims, value, first moment, second moment
//! ```
//!
//! The random state is not stored: every stream is keyed by the seed in the
//! config and the iteration counter.

use std::path::Path;

use super::config::TrainConfig;
use super::optim::AdamOptimizer;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{Shape, Tensor};

const MAGIC: &[u8; 8] = b"ACUBECKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub iteration: u64,
    pub model: Model,
    pub optimizer: AdamOptimizer,
}

impl Checkpoint {
    /// Freshly initialized model and optimizer at iteration 0.
    pub fn initial(config: &TrainConfig) -> Result<Checkpoint> {
        config.validate()?;
        let model = Model::build(&config.model, config.seed)?;
        let optimizer = AdamOptimizer::new(&model.params);
        Ok(Checkpoint {
            config: config.clone(),
            iteration: 0,
            model,
            optimizer,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_bytes(&mut w, self.config.to_text().as_bytes());
        put_u64(&mut w, self.iteration);
        put_u64(&mut w, self.optimizer.step_count());
        put_u64(&mut w, self.model.params.len() as u64);
        let moments = self.optimizer.first_moments().iter().zip(self.optimizer.second_moments());
        for ((_, p), (m, v)) in self.model.params.iter().zip(moments) {
            put_bytes(&mut w, p.name().as_bytes());
            for d in p.value().shape().0 {
                put_u64(&mut w, d as u64);
            }
            for t in [p.value(), m, v] {
                for x in t.data() {
                    w.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let text = String::from_utf8(r.bytes()?.to_vec()).map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
        let config: TrainConfig = text.parse()?;
        let iteration = r.u64()?;
        let opt_step = r.u64()?;
        let count = r.u64()? as usize;

        let mut model = Model::build(&config.model, config.seed)?;
        if count != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "{count} parameter records, config implies {}",
                model.params.len()
            )));
        }
        let mut first = Vec::with_capacity(count);
        let mut second = Vec::with_capacity(count);
        for p in model.params.iter_mut() {
            let name = String::from_utf8_lossy(r.bytes()?).into_owned();
            if name != p.name() {
                return Err(Error::Checkpoint(format!("record `{name}` where `{}` was expected", p.name())));
            }
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = r.u64()? as usize;
            }
            let shape = Shape(dims);
            if shape != p.value().shape() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {shape}, config implies {}",
                    p.value().shape()
                )));
            }
            *p.value_mut() = r.tensor(shape)?;
            first.push(r.tensor(shape)?);
            second.push(r.tensor(shape)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let optimizer = AdamOptimizer::from_parts(&model.params, opt_step, first, second)?;
        Ok(Checkpoint {
            config,
            iteration,
            model,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(w: &mut Vec<u8>, b: &[u8]) {
    put_u64(w, b.len() as u64);
    w.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()?;
        self.take(usize::try_from(n).map_err(|_| Error::Checkpoint("record too long".into()))?)
    }

    fn tensor(&mut self, shape: Shape) -> Result<Tensor> {
        let raw = self.take(shape.numel() * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::from_vec(shape, data)
    }
}
