use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::cv::{select_lambda, split, stratified_folds, LAMBDA_GRID};
use super::data::{LabeledRecord, PairRecord};
use super::features::pair_feature_matrix;
use super::logreg::{fit_softmax_regression, FitConfig, LinearModel, Targets};
use super::metrics::{accuracy, correlation_metrics, f1_score, pearson};
use crate::representation::{SentenceEncoder, SentenceVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sick,
    Msrp,
    Mr,
    Cr,
    Subj,
    Mpqa,
    Trec,
}

impl Task {
    pub const ALL: [Task; 7] = [Task::Sick, Task::Msrp, Task::Mr, Task::Cr, Task::Subj, Task::Mpqa, Task::Trec];

    pub fn name(self) -> &'static str {
        match self {
            Task::Sick => "sick",
            Task::Msrp => "msrp",
            Task::Mr => "mr",
            Task::Cr => "cr",
            Task::Subj => "subj",
            Task::Mpqa => "mpqa",
            Task::Trec => "trec",
        }
    }

    /// Sentence classification evaluated by cross validation alone.
    pub fn is_cross_validated(self) -> bool {
        matches!(self, Task::Mr | Task::Cr | Task::Subj | Task::Mpqa)
    }

    pub fn is_pair_task(self) -> bool {
        matches!(self, Task::Sick | Task::Msrp)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Cross-validation folds, outer and inner.
    pub folds: usize,
    pub grid: Vec<f64>,
    /// Seeds the fold shuffles.
    pub seed: u64,
    pub fit: FitConfig,
    /// l2-normalize sentence vectors before building features.
    pub normalize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            grid: LAMBDA_GRID.to_vec(),
            seed: 0,
            fit: FitConfig::default(),
            normalize: false,
        }
    }
}

/// One outer fold of a cross-validated task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldDetail {
    pub fold: usize,
    pub lambda: f64,
    pub size: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    /// Subset of pearson_r, spearman_rho, mse, accuracy, f1.
    pub metrics: BTreeMap<String, f64>,
    /// Regularization of the final model; absent for per-fold selection.
    pub lambda: Option<f64>,
    /// Mean validation score per grid entry for the final model's search.
    pub lambda_scores: Vec<f64>,
    pub folds: Vec<FoldDetail>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Five rating classes `1..=5`; `y` puts mass `ceil(y) - y` on `floor(y)`
/// and the rest on `ceil(y)`.
pub fn sick_target(y: f64) -> Result<[f64; 5]> {
    if !(1.0..=5.0).contains(&y) {
        return Err(Error::Config(format!("relatedness score {y} outside [1, 5]")));
    }
    let mut p = [0.0; 5];
    let lo = y.floor();
    let k = lo as usize - 1;
    if y == lo {
        p[k] = 1.0;
    } else {
        p[k] = lo + 1.0 - y;
        p[k + 1] = y - lo;
    }
    Ok(p)
}

/// Expected rating under each row of class probabilities.
pub fn expected_scores(p: ArrayView2<f64>) -> Vec<f64> {
    p.axis_iter(Axis(0))
        .map(|r| r.iter().enumerate().map(|(k, &q)| (k + 1) as f64 * q).sum())
        .collect()
}

fn encode_pairs(enc: &dyn SentenceEncoder, pairs: &[PairRecord], normalize: bool) -> Result<Array2<f64>> {
    let a: Vec<Vec<String>> = pairs.iter().map(|p| p.a.clone()).collect();
    let b: Vec<Vec<String>> = pairs.iter().map(|p| p.b.clone()).collect();
    pair_feature_matrix(&enc.encode(&a, normalize)?, &enc.encode(&b, normalize)?)
}

fn sentence_matrix(enc: &dyn SentenceEncoder, records: &[LabeledRecord], normalize: bool) -> Result<Array2<f64>> {
    let s: Vec<Vec<String>> = records.iter().map(|r| r.tokens.clone()).collect();
    stack(&enc.encode(&s, normalize)?)
}

fn stack(vs: &[SentenceVector]) -> Result<Array2<f64>> {
    let dim = vs.first().map_or(0, |v| v.dim());
    let mut m = Array2::zeros((vs.len(), dim));
    for (mut row, v) in m.axis_iter_mut(Axis(0)).zip(vs) {
        if v.dim() != dim {
            return Err(Error::Shape("sentence vectors differ in dimension".into()));
        }
        row.assign(&v.values);
    }
    Ok(m)
}

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn fit_hard(x: &Array2<f64>, labels: &[usize], classes: usize, lambda: f64, cfg: &FitConfig) -> Result<LinearModel> {
    fit_softmax_regression(x.view(), Targets::Hard { labels, classes }, lambda, cfg)
}

/// Cross-validated accuracy search over `cfg.grid` on `(x, labels)`.
fn search_hard(x: &Array2<f64>, labels: &[usize], classes: usize, cfg: &EvalConfig, seed: u64) -> Result<(f64, Vec<f64>)> {
    let folds = stratified_folds(labels, cfg.folds, seed)?;
    let s = select_lambda(&folds, cfg.folds, &cfg.grid, |tr, va, lambda| {
        let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let yva: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
        let m = fit_hard(&rows(x, tr), &ytr, classes, lambda, &cfg.fit)?;
        accuracy(&m.predict(rows(x, va).view()), &yva)
    })?;
    Ok((s.lambda, s.scores))
}

/// Relatedness regression: soft targets over rating classes, expectation
/// decoding, lambda chosen by cross-validated Pearson r on the training
/// split.
pub fn eval_sick(
    train: &[PairRecord],
    test: &[PairRecord],
    enc: &dyn SentenceEncoder,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let encode_targets = |pairs: &[PairRecord]| -> Result<Array2<f64>> {
        let mut t = Array2::zeros((pairs.len(), 5));
        for (i, p) in pairs.iter().enumerate() {
            t.row_mut(i).assign(&ndarray::arr1(&sick_target(p.score)?));
        }
        Ok(t)
    };
    let ttr = encode_targets(train)?;
    encode_targets(test)?;
    if test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let xtr = encode_pairs(enc, train, cfg.normalize)?;
    let xte = encode_pairs(enc, test, cfg.normalize)?;
    let strata: Vec<usize> = train.iter().map(|p| p.score.round() as usize - 1).collect();
    let folds = stratified_folds(&strata, cfg.folds, cfg.seed)?;
    let search = select_lambda(&folds, cfg.folds, &cfg.grid, |tr, va, lambda| {
        let m = fit_softmax_regression(rows(&xtr, tr).view(), Targets::Soft(rows(&ttr, tr).view()), lambda, &cfg.fit)?;
        let pred = expected_scores(m.predict_proba(rows(&xtr, va).view()).view());
        let gold: Vec<f64> = va.iter().map(|&i| train[i].score).collect();
        Ok(pearson(&pred, &gold).unwrap_or(f64::NEG_INFINITY))
    })?;
    let m = fit_softmax_regression(xtr.view(), Targets::Soft(ttr.view()), search.lambda, &cfg.fit)?;
    let pred = expected_scores(m.predict_proba(xte.view()).view());
    let gold: Vec<f64> = test.iter().map(|p| p.score).collect();
    let c = correlation_metrics(&pred, &gold)?;
    Ok(EvalReport {
        task: Task::Sick,
        metrics: BTreeMap::from([
            ("pearson_r".to_string(), c.pearson),
            ("spearman_rho".to_string(), c.spearman),
            ("mse".to_string(), c.mse),
        ]),
        lambda: Some(search.lambda),
        lambda_scores: search.scores,
        folds: Vec::new(),
        train_size: train.len(),
        test_size: test.len(),
    })
}

fn binary_labels(pairs: &[PairRecord]) -> Result<Vec<usize>> {
    pairs
        .iter()
        .map(|p| match p.score {
            s if s == 0.0 => Ok(0),
            s if s == 1.0 => Ok(1),
            s => Err(Error::Config(format!("paraphrase label {s} is not 0 or 1"))),
        })
        .collect()
}

/// Paraphrase detection: lambda by stratified cross-validated accuracy on
/// the training split, refit on all of it, then test accuracy and F1 of
/// the paraphrase class.
pub fn eval_msrp(
    train: &[PairRecord],
    test: &[PairRecord],
    enc: &dyn SentenceEncoder,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let ytr = binary_labels(train)?;
    let yte = binary_labels(test)?;
    if test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let xtr = encode_pairs(enc, train, cfg.normalize)?;
    let xte = encode_pairs(enc, test, cfg.normalize)?;
    let (lambda, scores) = search_hard(&xtr, &ytr, 2, cfg, cfg.seed)?;
    let m = fit_hard(&xtr, &ytr, 2, lambda, &cfg.fit)?;
    let pred = m.predict(xte.view());
    Ok(EvalReport {
        task: Task::Msrp,
        metrics: BTreeMap::from([
            ("accuracy".to_string(), accuracy(&pred, &yte)?),
            ("f1".to_string(), f1_score(&pred, &yte, 1)?),
        ]),
        lambda: Some(lambda),
        lambda_scores: scores,
        folds: Vec::new(),
        train_size: train.len(),
        test_size: test.len(),
    })
}

/// Class ids by sorted label string, taken from the training split.
fn label_ids(train: &[LabeledRecord], test: &[LabeledRecord]) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let names: BTreeSet<&str> = train.iter().map(|r| r.label.as_str()).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let map = |rs: &[LabeledRecord]| -> Result<Vec<usize>> {
        rs.iter()
            .map(|r| {
                index
                    .get(r.label.as_str())
                    .copied()
                    .ok_or_else(|| Error::Config(format!("test label {:?} never seen in training", r.label)))
            })
            .collect()
    };
    Ok((map(train)?, map(test)?, names.len()))
}

/// Sentence classification. MR, CR, SUBJ and MPQA report mean accuracy
/// over outer folds, each with lambda chosen by inner cross validation on
/// its training folds; `test` must be `None`. TREC trains on `train` with a
/// cross-validated lambda and reports accuracy on the required `test`.
pub fn eval_classification(
    task: Task,
    train: &[LabeledRecord],
    test: Option<&[LabeledRecord]>,
    enc: &dyn SentenceEncoder,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if task.is_pair_task() {
        return Err(Error::Config(format!("{task} is not a sentence classification task")));
    }
    if task.is_cross_validated() {
        if test.is_some() {
            return Err(Error::Config(format!("{task} is scored by cross validation; no test split")));
        }
        let (y, _, classes) = label_ids(train, &[])?;
        let x = sentence_matrix(enc, train, cfg.normalize)?;
        let folds = stratified_folds(&y, cfg.folds, cfg.seed)?;
        let mut details = Vec::with_capacity(cfg.folds);
        for f in 0..cfg.folds {
            let (tr, va) = split(&folds, f);
            let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
            let yva: Vec<usize> = va.iter().map(|&i| y[i]).collect();
            let xtr = rows(&x, &tr);
            let inner_seed = cfg.seed.wrapping_add(1 + f as u64);
            let (lambda, _) = search_hard(&xtr, &ytr, classes, cfg, inner_seed)?;
            let m = fit_hard(&xtr, &ytr, classes, lambda, &cfg.fit)?;
            details.push(FoldDetail {
                fold: f,
                lambda,
                size: va.len(),
                accuracy: accuracy(&m.predict(rows(&x, &va).view()), &yva)?,
            });
        }
        let mean = details.iter().map(|d| d.accuracy).sum::<f64>() / details.len() as f64;
        return Ok(EvalReport {
            task,
            metrics: BTreeMap::from([("accuracy".to_string(), mean)]),
            lambda: None,
            lambda_scores: Vec::new(),
            folds: details,
            train_size: train.len(),
            test_size: 0,
        });
    }
    let test = test.ok_or_else(|| Error::Config(format!("{task} needs a test split")))?;
    if test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let (ytr, yte, classes) = label_ids(train, test)?;
    let xtr = sentence_matrix(enc, train, cfg.normalize)?;
    let xte = sentence_matrix(enc, test, cfg.normalize)?;
    let (lambda, scores) = search_hard(&xtr, &ytr, classes, cfg, cfg.seed)?;
    let m = fit_hard(&xtr, &ytr, classes, lambda, &cfg.fit)?;
    Ok(EvalReport {
        task,
        metrics: BTreeMap::from([("accuracy".to_string(), accuracy(&m.predict(xte.view()), &yte)?)]),
        lambda: Some(lambda),
        lambda_scores: scores,
        folds: Vec::new(),
        train_size: train.len(),
        test_size: test.len(),
    })
}
