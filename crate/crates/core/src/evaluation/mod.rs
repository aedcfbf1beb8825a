//! Downstream evaluation: pair features, softmax regression, stratified
//! cross validation, correlation and classification metrics, and the SICK,
//! MSRP and sentence-classification harnesses.

mod cv;
mod data;
mod features;
mod logreg;
mod metrics;
mod tasks;

pub use cv::{select_lambda, split, stratified_folds, LambdaSearch, LAMBDA_GRID};
pub use data::{read_labeled, read_pairs, LabeledRecord, PairRecord};
pub use features::{pair_feature_matrix, pair_features, PairFeature};
pub use logreg::{fit_softmax_regression, FitConfig, LinearModel, Targets};
pub use metrics::{accuracy, average_ranks, correlation_metrics, f1_score, mse, pearson, spearman, Confusion, Correlation};
pub use tasks::{
    eval_classification, eval_msrp, eval_sick, expected_scores, sick_target, EvalConfig, EvalReport, FoldDetail, Task,
};
