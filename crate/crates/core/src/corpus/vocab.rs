use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const PAD: usize = 0;
pub const GO: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Surface forms of the reserved ids, in id order. These are also the header
/// lines of a vocabulary file.
pub const RESERVED: [&str; 4] = ["<pad>", "<go>", "<eos>", "<unk>"];

/// Bidirectional token/id map. Ids `0..4` are reserved; corpus tokens start
/// at 4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn reserved_only() -> Self {
        Self::from_tokens(Vec::<String>::new()).expect("reserved vocabulary")
    }

    /// Builds a vocabulary whose non-reserved tokens are `tokens`, in order,
    /// starting at id 4.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut token_to_id: HashMap<String, usize> = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        for tok in tokens {
            let tok = tok.into();
            if token_to_id.contains_key(&tok) {
                return Err(Error::Config(format!("duplicate vocabulary token {tok:?}")));
            }
            token_to_id.insert(tok.clone(), id_to_token.len());
            id_to_token.push(tok);
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `token`, or `UNK` when it is not in the vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.id_to_token[RESERVED.len()..]
    }

    /// Maps ids back to tokens, stopping at the first EOS and skipping PAD.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != PAD)
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for tok in &self.id_to_token {
            writeln!(w, "{tok}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        for (i, expected) in RESERVED.iter().enumerate() {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if line != *expected {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: format!("expected reserved token {expected}, found {line:?}"),
                        });
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "truncated reserved-token header".into(),
                    })
                }
            }
        }
        let tokens = lines.collect::<std::io::Result<Vec<String>>>()?;
        Self::from_tokens(tokens)
    }

    /// SHA-256 of the vocabulary file serialization.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        Sha256::digest(&buf).into()
    }
}

/// Keeps the `max_size - 4` most frequent tokens, ties broken
/// lexicographically. Tokens spelled like a reserved token are ignored.
pub fn build_vocab<'a, I>(sentences: I, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if max_size < RESERVED.len() {
        return Err(Error::Config(format!(
            "vocabulary size must be at least {}, got {max_size}",
            RESERVED.len()
        )));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sentence in sentences {
        for tok in sentence {
            if !RESERVED.contains(&tok.as_str()) {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()))
}

/// A sentence as `len` ids: tokens, then EOS, then PAD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    /// Token count plus one for EOS, before any clipping.
    pub original_length: usize,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of unmasked positions, EOS included.
    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    /// The same sentence re-laid out to a different fixed length.
    pub fn with_len(&self, len: usize) -> EncodedSentence {
        let real = self.real_len();
        let tokens = &self.ids[..real.saturating_sub(1)];
        encode_ids(tokens, len, self.original_length)
    }
}

/// Maps tokens to ids and lays them out in `len` slots. Sentences longer
/// than `len - 1` tokens keep their prefix; the last slot always holds EOS.
pub fn encode_sentence<S: AsRef<str>>(vocab: &Vocabulary, tokens: &[S], len: usize) -> EncodedSentence {
    let ids: Vec<usize> = tokens.iter().map(|t| vocab.id(t.as_ref())).collect();
    encode_ids(&ids, len, ids.len() + 1)
}

pub(crate) fn encode_ids(tokens: &[usize], len: usize, original_length: usize) -> EncodedSentence {
    assert!(len >= 1, "sentence length must be at least 1");
    let kept = tokens.len().min(len - 1);
    let mut ids = Vec::with_capacity(len);
    ids.extend_from_slice(&tokens[..kept]);
    ids.push(EOS);
    let real = ids.len();
    ids.resize(len, PAD);
    let mask = (0..len).map(|i| i < real).collect();
    EncodedSentence {
        ids,
        mask,
        original_length,
    }
}
