use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::reader::Document;
use super::vocab::{encode_sentence, EncodedSentence, Vocabulary};
use crate::Error;

/// Which sentences around the center a model reconstructs, and with how many
/// decoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Variant {
    /// One shared decoder for `s[i-1]` and `s[i+1]`.
    Neighbor,
    /// Shared decoder for `s[i-1]`, `s[i]` and `s[i+1]`.
    NeighborAe,
    /// Shared decoder for `s[i+1]` only.
    OneTarget,
    /// Separate previous and next decoders.
    SkipThought,
    /// Separate previous, self and next decoders.
    SkipThoughtAe,
    /// One shared decoder for the `k` sentences on each side.
    KNeighbor(usize),
}

impl Variant {
    /// Offsets of the targets relative to the center, predecessors first.
    pub fn target_offsets(&self) -> Vec<isize> {
        match *self {
            Variant::Neighbor | Variant::SkipThought => vec![-1, 1],
            Variant::NeighborAe | Variant::SkipThoughtAe => vec![-1, 0, 1],
            Variant::OneTarget => vec![1],
            Variant::KNeighbor(k) => {
                let k = k as isize;
                (-k..0).chain(1..=k).collect()
            }
        }
    }

    pub fn num_targets(&self) -> usize {
        self.target_offsets().len()
    }

    /// Number of independent decoder parameter groups.
    pub fn decoder_groups(&self) -> usize {
        match self {
            Variant::SkipThought => 2,
            Variant::SkipThoughtAe => 3,
            _ => 1,
        }
    }

    /// Decoder group that reconstructs target slot `slot`.
    pub fn decoder_for_slot(&self, slot: usize) -> usize {
        match self {
            Variant::SkipThought | Variant::SkipThoughtAe => slot,
            _ => 0,
        }
    }

    /// Names of the decoder groups, used as parameter-key prefixes.
    pub fn decoder_names(&self) -> &'static [&'static str] {
        match self {
            Variant::SkipThought => &["decoder.prev", "decoder.next"],
            Variant::SkipThoughtAe => &["decoder.prev", "decoder.self", "decoder.next"],
            _ => &["decoder"],
        }
    }

    /// The decoder used for generation: the next-sentence decoder where the
    /// groups are position-specific.
    pub fn generation_decoder(&self) -> usize {
        self.decoder_groups() - 1
    }

    pub fn validate(&self) -> crate::Result<()> {
        if let Variant::KNeighbor(0) = self {
            return Err(Error::Config("k-neighbor requires k >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Neighbor => f.write_str("neighbor"),
            Variant::NeighborAe => f.write_str("neighbor-ae"),
            Variant::OneTarget => f.write_str("one-target"),
            Variant::SkipThought => f.write_str("skip-thought"),
            Variant::SkipThoughtAe => f.write_str("skip-thought-ae"),
            Variant::KNeighbor(k) => write!(f, "k-neighbor:{k}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let v = match norm.as_str() {
            "neighbor" => Variant::Neighbor,
            "neighbor-ae" => Variant::NeighborAe,
            "one-target" | "next" => Variant::OneTarget,
            "skip-thought" | "skip" => Variant::SkipThought,
            "skip-thought-ae" | "skip-ae" => Variant::SkipThoughtAe,
            other => {
                let k = other
                    .strip_prefix("k-neighbor:")
                    .or_else(|| other.strip_prefix("k-neighbor"))
                    .and_then(|k| k.trim_start_matches(['(', ':']).trim_end_matches(')').parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))?;
                Variant::KNeighbor(k)
            }
        };
        v.validate()?;
        Ok(v)
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

/// A center sentence and the targets its representation must reconstruct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodExample {
    pub center: EncodedSentence,
    pub targets: Vec<EncodedSentence>,
    pub variant: Variant,
}

/// Lazily yields neighborhood examples from a stream of documents.
pub struct Neighborhoods<'v, I> {
    docs: I,
    vocab: &'v Vocabulary,
    variant: Variant,
    len: usize,
    pending: VecDeque<NeighborhoodExample>,
}

/// Streams every neighborhood `variant` admits, one document at a time, in
/// document order then center order.
pub fn iter_neighborhoods<'v, I>(
    docs: I,
    vocab: &'v Vocabulary,
    variant: Variant,
    len: usize,
) -> Neighborhoods<'v, I::IntoIter>
where
    I: IntoIterator<Item = Document>,
{
    Neighborhoods {
        docs: docs.into_iter(),
        vocab,
        variant,
        len,
        pending: VecDeque::new(),
    }
}

impl<I: Iterator<Item = Document>> Iterator for Neighborhoods<'_, I> {
    type Item = NeighborhoodExample;

    fn next(&mut self) -> Option<NeighborhoodExample> {
        loop {
            if let Some(ex) = self.pending.pop_front() {
                return Some(ex);
            }
            let doc = self.docs.next()?;
            self.fill(&doc);
        }
    }
}

impl<I> Neighborhoods<'_, I> {
    fn fill(&mut self, doc: &Document) {
        let offsets = self.variant.target_offsets();
        let before = offsets.iter().map(|&o| (-o).max(0)).max().unwrap_or(0) as usize;
        let after = offsets.iter().map(|&o| o.max(0)).max().unwrap_or(0) as usize;
        let n = doc.len();
        if n < before + after + 1 {
            return;
        }
        let encoded: Vec<EncodedSentence> = doc
            .iter()
            .map(|s| encode_sentence(self.vocab, s, self.len))
            .collect();
        for i in before..n - after {
            let targets = offsets
                .iter()
                .map(|&o| encoded[(i as isize + o) as usize].clone())
                .collect();
            self.pending.push_back(NeighborhoodExample {
                center: encoded[i].clone(),
                targets,
                variant: self.variant,
            });
        }
    }
}
