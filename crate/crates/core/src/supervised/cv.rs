//! Stratified k-fold cross-validation of power-transformed stepwise models.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{metrics, ClassifierMetrics, DEFAULT_THRESHOLD};
use super::selection::stepwise_bic;
use crate::composition::{replicate_rng, CompositionMatrix};
use crate::diagnostics::validate_grid;
use crate::error::{CodaError, Result};
use crate::transforms::power_only;

/// Fold ids in `0..k`. Each class is shuffled with its own seeded stream and
/// dealt round-robin, continuing the deal across classes, so every fold keeps
/// the class proportions and fold sizes differ by at most one.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(CodaError::InvalidArgument(format!(
            "cross-validation needs k >= 2, got {k}"
        )));
    }
    if k > y.len() {
        return Err(CodaError::InvalidArgument(format!(
            "k = {k} exceeds the {} samples",
            y.len()
        )));
    }
    let mut folds = vec![0; y.len()];
    let mut next = 0;
    for (class_id, class) in [false, true].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        let mut rng = replicate_rng(seed, class_id as u64, 0);
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub selected: Vec<usize>,
    pub selected_labels: Vec<String>,
    pub metrics: ClassifierMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    pub fold_assignment: Vec<usize>,
    pub per_fold: Vec<FoldResult>,
    pub mean_auc: f64,
    pub mean_accuracy: f64,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    x.select_rows(idx)
}

/// Cross-validates stepwise BIC selection on power-transformed parts using
/// precomputed fold assignments.
pub fn cross_validate_with_folds(
    m: &CompositionMatrix,
    y: &[bool],
    lambda: f64,
    folds: &[usize],
    seed: u64,
) -> Result<CvResult> {
    if y.len() != m.nrows() || folds.len() != m.nrows() {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{} responses and fold ids", m.nrows()),
            found: format!("{} responses, {} fold ids", y.len(), folds.len()),
        });
    }
    let k = folds.iter().max().map_or(0, |f| f + 1);
    if k < 2 {
        return Err(CodaError::InvalidArgument("fewer than 2 folds".into()));
    }
    for f in 0..k {
        for class in [false, true] {
            if !(0..y.len()).any(|i| folds[i] == f && y[i] == class) {
                return Err(CodaError::InvalidArgument(format!(
                    "fold {f} has no samples of class {}; too few samples for k = {k}",
                    u8::from(class)
                )));
            }
        }
    }
    let transformed = power_only(m, lambda)?;
    let labels = m.part_labels().to_vec();
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            let model = stepwise_bic(&rows(&transformed.values, &train), &labels, &y_train)?;
            let x_test = model.design(&rows(&transformed.values, &test));
            let scores = model.predict(&x_test);
            Ok(FoldResult {
                fold: f,
                selected: model.predictor_indices.clone(),
                selected_labels: model.labels.clone(),
                metrics: metrics(&scores, &y_test, DEFAULT_THRESHOLD)?,
            })
        })
        .collect::<Result<Vec<FoldResult>>>()?;
    let aucs: Vec<f64> = per_fold
        .iter()
        .map(|r| r.metrics.auc.expect("every test fold holds both classes"))
        .collect();
    let accs: Vec<f64> = per_fold.iter().map(|r| r.metrics.accuracy).collect();
    Ok(CvResult {
        k,
        seed,
        lambda,
        fold_assignment: folds.to_vec(),
        per_fold,
        mean_auc: crate::stats::mean(&aucs),
        mean_accuracy: crate::stats::mean(&accs),
    })
}

pub fn cross_validate(
    m: &CompositionMatrix,
    y: &[bool],
    lambda: f64,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let folds = stratified_folds(y, k, seed)?;
    cross_validate_with_folds(m, y, lambda, &folds, seed)
}

/// On a decreasing grid the first maximum is the one at the larger λ.
fn first_maximum(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in values.iter().enumerate() {
        if a > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub optimal_lambda: f64,
    pub optimal_mean_auc: f64,
    pub lambdas: Vec<f64>,
    pub mean_aucs: Vec<f64>,
    pub results: Vec<CvResult>,
}

/// Cross-validates every λ on the same folds and picks the largest mean AUC,
/// preferring the larger λ on ties.
pub fn tune_power(
    m: &CompositionMatrix,
    y: &[bool],
    lambdas: &[f64],
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    validate_grid(lambdas)?;
    let folds = stratified_folds(y, k, seed)?;
    let results = lambdas
        .par_iter()
        .map(|&l| cross_validate_with_folds(m, y, l, &folds, seed))
        .collect::<Result<Vec<CvResult>>>()?;
    let mean_aucs: Vec<f64> = results.iter().map(|r| r.mean_auc).collect();
    let best = first_maximum(&mean_aucs);
    Ok(TuneResult {
        optimal_lambda: lambdas[best],
        optimal_mean_auc: mean_aucs[best],
        lambdas: lambdas.to_vec(),
        mean_aucs,
        results,
    })
}
