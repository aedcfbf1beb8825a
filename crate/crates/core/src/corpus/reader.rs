use std::io::BufRead;

use super::tokenize::tokenize;
use crate::Result;

/// A document: its sentences in order, each already tokenized.
pub type Document = Vec<Vec<String>>;

/// Streams documents out of a corpus file, one sentence per line with blank
/// lines between documents. Runs of blank lines never produce empty
/// documents.
pub struct DocumentReader<R> {
    lines: std::io::Lines<R>,
    done: bool,
}

pub fn read_documents<R: BufRead>(reader: R) -> DocumentReader<R> {
    DocumentReader {
        lines: reader.lines(),
        done: false,
    }
}

impl<R: BufRead> Iterator for DocumentReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut doc = Document::new();
        loop {
            match self.lines.next() {
                None => {
                    self.done = true;
                    return if doc.is_empty() { None } else { Some(Ok(doc)) };
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Some(Ok(line)) => {
                    if line.trim().is_empty() {
                        if !doc.is_empty() {
                            return Some(Ok(doc));
                        }
                    } else {
                        doc.push(tokenize(&line));
                    }
                }
            }
        }
    }
}
