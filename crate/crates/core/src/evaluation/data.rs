use std::io::BufRead;

use crate::corpus::tokenize;
use crate::{Error, Result};

/// One line of a pair file: `score_or_label<TAB>sentence1<TAB>sentence2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub score: f64,
    pub a: Vec<String>,
    pub b: Vec<String>,
}

/// One line of a classification file: `label<TAB>sentence`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledRecord {
    pub label: String,
    pub tokens: Vec<String>,
}

/// Parses a pair TSV, tokenizing both sentences. Blank lines are skipped.
pub fn read_pairs<R: BufRead>(r: R) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let score: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad score {:?}", fields[0])))?;
        if !score.is_finite() {
            return Err(err("score is not finite".into()));
        }
        out.push(PairRecord {
            score,
            a: tokenize(fields[1]),
            b: tokenize(fields[2]),
        });
    }
    Ok(out)
}

/// Parses a classification TSV, tokenizing the sentence. Blank lines are
/// skipped.
pub fn read_labeled<R: BufRead>(r: R) -> Result<Vec<LabeledRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected label<TAB>sentence".into(),
        })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty label".into(),
            });
        }
        out.push(LabeledRecord {
            label: label.to_string(),
            tokens: tokenize(text),
        });
    }
    Ok(out)
}
