use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Variant;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// One forward GRU with `d_z` hidden units.
    Uni,
    /// Forward and backward GRUs with `d_z / 2` units each, concatenated.
    Bi,
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderKind::Uni => "uni",
            EncoderKind::Bi => "bi",
        })
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uni" => Ok(EncoderKind::Uni),
            "bi" => Ok(EncoderKind::Bi),
            other => Err(Error::Config(format!("unknown encoder type {other:?}"))),
        }
    }
}

/// Shape and objective of a model. The decoder hidden size and its
/// conditioning input both equal `d_z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub d_emb: usize,
    pub d_z: usize,
    pub vocab_size: usize,
    /// Fixed training sentence length (tokens plus EOS, padded or clipped).
    pub max_len: usize,
    pub variant: Variant,
}

impl ModelConfig {
    /// The dimensions used for the published models: 620-d embeddings and
    /// 1200-d sentence vectors.
    pub fn published_dims(encoder: EncoderKind, variant: Variant, vocab_size: usize, max_len: usize) -> Self {
        ModelConfig {
            encoder,
            d_emb: 620,
            d_z: 1200,
            vocab_size,
            max_len,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_emb", self.d_emb),
            ("d_z", self.d_z),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.encoder == EncoderKind::Bi && self.d_z % 2 != 0 {
            return Err(Error::Config(format!(
                "bi encoder needs an even d_z, got {}",
                self.d_z
            )));
        }
        if self.vocab_size < crate::corpus::RESERVED.len() {
            return Err(Error::Config("vocab_size must cover the reserved tokens".into()));
        }
        self.variant.validate()
    }

    /// Hidden size of each directional encoder.
    pub fn encoder_hidden(&self) -> usize {
        match self.encoder {
            EncoderKind::Uni => self.d_z,
            EncoderKind::Bi => self.d_z / 2,
        }
    }

    pub fn encoder_directions(&self) -> usize {
        match self.encoder {
            EncoderKind::Uni => 1,
            EncoderKind::Bi => 2,
        }
    }

    /// Closed-form size of one decoder group: conditional GRU plus the
    /// output projection.
    pub fn decoder_group_size(&self) -> usize {
        let (h, e, v) = (self.d_z, self.d_emb, self.vocab_size);
        let gru = 3 * h * h + 3 * h * e;
        let cond = 3 * h * self.d_z;
        let proj = v * h + v;
        gru + cond + proj
    }

    /// Closed-form count of all learnable scalars.
    pub fn expected_param_count(&self) -> usize {
        let h = self.encoder_hidden();
        let encoder = self.encoder_directions() * (3 * h * h + 3 * h * self.d_emb);
        self.vocab_size * self.d_emb + encoder + self.variant.decoder_groups() * self.decoder_group_size()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(encoder: EncoderKind, d_z: usize) -> ModelConfig {
        ModelConfig {
            encoder,
            d_emb: 4,
            d_z,
            vocab_size: 10,
            max_len: 5,
            variant: Variant::Neighbor,
        }
    }

    #[test]
    fn validation() {
        assert!(cfg(EncoderKind::Bi, 6).validate().is_ok());
        assert!(cfg(EncoderKind::Bi, 7).validate().is_err());
        assert!(cfg(EncoderKind::Uni, 7).validate().is_ok());
        assert!(cfg(EncoderKind::Uni, 0).validate().is_err());
        let mut c = cfg(EncoderKind::Uni, 4);
        c.vocab_size = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn bi_splits_published_dims() {
        let c = ModelConfig::published_dims(EncoderKind::Bi, Variant::Neighbor, 20000, 30);
        assert_eq!(c.encoder_hidden(), 600);
        assert_eq!(ModelConfig::published_dims(EncoderKind::Uni, Variant::Neighbor, 20000, 30).encoder_hidden(), 1200);
    }

    #[test]
    fn published_scale_count() {
        let c = ModelConfig::published_dims(EncoderKind::Uni, Variant::Neighbor, 20000, 30);
        let emb = 20000 * 620;
        let enc = 2 * 1200 * 1200 + 2 * 1200 * 620 + 1200 * 620 + 1200 * 1200;
        let dec = enc + 2 * 1200 * 1200 + 1200 * 1200 + 20000 * 1200 + 20000;
        assert_eq!(c.expected_param_count(), emb + enc + dec);
    }

    #[test]
    fn tiny_hand_count() {
        let c = ModelConfig {
            encoder: EncoderKind::Uni,
            d_emb: 1,
            d_z: 1,
            vocab_size: 4,
            max_len: 3,
            variant: Variant::OneTarget,
        };
        assert_eq!(c.expected_param_count(), 4 + (2 + 2 + 1 + 1) + (2 + 2 + 1 + 1 + 2 + 1) + (4 + 4));
    }
}
