//! Corpus ingestion: tokenization, vocabularies, fixed-length encodings and
//! neighborhood streaming.
//!
//! A corpus file is UTF-8 text with one sentence per line; a blank line ends
//! a document. Neighborhoods never cross document boundaries.

mod neighborhood;
mod reader;
mod tokenize;
mod vocab;

pub use neighborhood::{iter_neighborhoods, Neighborhoods, NeighborhoodExample, Variant};
pub use reader::{read_documents, Document, DocumentReader};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, encode_sentence, EncodedSentence, Vocabulary, EOS, GO, PAD, RESERVED, UNK};
