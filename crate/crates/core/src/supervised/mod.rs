//! Logistic models on power-transformed compositional predictors.

pub mod cv;
pub mod logistic;
pub mod metrics;
pub mod selection;
pub mod stability;

pub use cv::{
    cross_validate, cross_validate_with_folds, stratified_folds, tune_power, CvResult, FoldResult,
    TuneResult,
};
pub use logistic::{
    fit_logistic, fit_logistic_from, standardized_model, LogisticModel, Standardization,
};
pub use metrics::{auc, metrics, ClassifierMetrics, DEFAULT_THRESHOLD};
pub use selection::stepwise_bic;
pub use stability::{
    compositional_effect, model_subcomposition_stability, refit_on_subcomposition, EffectMode,
    EffectResult, StabilityReport,
};
