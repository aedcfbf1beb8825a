//! Binary checkpoint format. All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "NTHCKPT\0"
//! version      u32
//! encoder      u8       0 = uni, 1 = bi
//! variant      u8       0 neighbor, 1 neighbor-ae, 2 one-target,
//!                       3 skip-thought, 4 skip-thought-ae, 5 k-neighbor
//! variant_k    u32      k for k-neighbor, else 0
//! d_emb d_z vocab_size max_len   u32 each
//! has_training u8
//!   alpha beta1 beta2 eps clip   f64 each   (only when has_training = 1)
//!   batch_size u32, seed u64, steps u64
//! vocab_hash   32 bytes (SHA-256 of the vocabulary file)
//! n_params     u32
//! per parameter, canonical order:
//!   name_len u32, name bytes (UTF-8), rank u32, dims u32 x rank,
//!   data f32 x prod(dims), row-major
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::{EncoderKind, ModelConfig};
use super::model::{zeroed_model, Model};
use crate::corpus::Variant;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NTHCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Optimizer settings a checkpoint was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab_hash: [u8; 32],
    pub training: Option<TrainingRecord>,
}

fn variant_code(v: Variant) -> (u8, u32) {
    match v {
        Variant::Neighbor => (0, 0),
        Variant::NeighborAe => (1, 0),
        Variant::OneTarget => (2, 0),
        Variant::SkipThought => (3, 0),
        Variant::SkipThoughtAe => (4, 0),
        Variant::KNeighbor(k) => (5, k as u32),
    }
}

fn variant_from(code: u8, k: u32) -> Result<Variant> {
    Ok(match code {
        0 => Variant::Neighbor,
        1 => Variant::NeighborAe,
        2 => Variant::OneTarget,
        3 => Variant::SkipThought,
        4 => Variant::SkipThoughtAe,
        5 => Variant::KNeighbor(k as usize),
        c => return Err(Error::Checkpoint(format!("unknown variant code {c}"))),
    })
}

fn dim32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Checkpoint(format!("dimension {x} exceeds u32")))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.model.config;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&[match c.encoder {
            EncoderKind::Uni => 0,
            EncoderKind::Bi => 1,
        }])?;
        let (code, k) = variant_code(c.variant);
        w.write_all(&[code])?;
        w.write_all(&k.to_le_bytes())?;
        for d in [c.d_emb, c.d_z, c.vocab_size, c.max_len] {
            w.write_all(&dim32(d)?.to_le_bytes())?;
        }
        match &self.training {
            None => w.write_all(&[0])?,
            Some(t) => {
                w.write_all(&[1])?;
                for f in [t.alpha, t.beta1, t.beta2, t.eps, t.clip] {
                    w.write_all(&f.to_le_bytes())?;
                }
                w.write_all(&dim32(t.batch_size)?.to_le_bytes())?;
                w.write_all(&t.seed.to_le_bytes())?;
                w.write_all(&t.steps.to_le_bytes())?;
            }
        }
        w.write_all(&self.vocab_hash)?;
        let tensors = self.model.params.tensors();
        w.write_all(&dim32(tensors.len())?.to_le_bytes())?;
        for (name, t) in tensors {
            w.write_all(&dim32(name.len())?.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&dim32(t.ndim())?.to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&dim32(d)?.to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.len() * 4);
            for x in t.iter() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        buf
    }

    /// Reads a checkpoint and checks every key and shape against the
    /// structure its header declares.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let encoder = match read_u8(&mut r)? {
            0 => EncoderKind::Uni,
            1 => EncoderKind::Bi,
            e => return Err(Error::Checkpoint(format!("unknown encoder code {e}"))),
        };
        let code = read_u8(&mut r)?;
        let k = read_u32(&mut r)?;
        let variant = variant_from(code, k)?;
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = read_u32(&mut r)? as usize;
        }
        let config = ModelConfig {
            encoder,
            d_emb: dims[0],
            d_z: dims[1],
            vocab_size: dims[2],
            max_len: dims[3],
            variant,
        };
        let training = match read_u8(&mut r)? {
            0 => None,
            1 => {
                let mut f = [0f64; 5];
                for x in f.iter_mut() {
                    *x = read_f64(&mut r)?;
                }
                let batch_size = read_u32(&mut r)? as usize;
                let seed = read_u64(&mut r)?;
                let steps = read_u64(&mut r)?;
                Some(TrainingRecord {
                    alpha: f[0],
                    beta1: f[1],
                    beta2: f[2],
                    eps: f[3],
                    clip: f[4],
                    batch_size,
                    seed,
                    steps,
                })
            }
            b => return Err(Error::Checkpoint(format!("bad training flag {b}"))),
        };
        let mut vocab_hash = [0u8; 32];
        r.read_exact(&mut vocab_hash)?;

        let mut model = zeroed_model::<f32>(&config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let n = read_u32(&mut r)? as usize;
        let mut slots = model.params.tensors_mut();
        if n != slots.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {n}",
                slots.len()
            )));
        }
        for (expected, slot) in slots.iter_mut() {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("non-UTF-8 key".into()))?;
            if &name != expected {
                return Err(Error::Checkpoint(format!("expected key {expected}, found {name}")));
            }
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(&mut r)? as usize);
            }
            if shape != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "key {name}: shape {shape:?}, expected {:?}",
                    slot.shape()
                )));
            }
            let mut buf = vec![0u8; slot.len() * 4];
            r.read_exact(&mut buf)?;
            for (x, chunk) in slot.iter_mut().zip(buf.chunks_exact(4)) {
                *x = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            }
        }
        drop(slots);
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        Ok(Checkpoint {
            model,
            vocab_hash,
            training,
        })
    }
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}
