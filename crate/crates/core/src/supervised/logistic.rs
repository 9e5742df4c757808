//! Binary logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};

pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const DEVIANCE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
/// Coefficient norm beyond which the fit is treated as diverging.
pub const SEPARATION_NORM: f64 = 1e4;
/// Fitted probabilities this close to 0 or 1 indicate separation.
pub const SEPARATION_PROBABILITY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Sample standard deviations (divisor n - 1).
    pub sds: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub std_errors: Vec<f64>,
    pub intercept_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Columns of the candidate matrix used as predictors, in model order.
    pub predictor_indices: Vec<usize>,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub std_errors: Vec<f64>,
    pub intercept_std_error: f64,
    /// Inverse Fisher information, intercept first.
    pub covariance: Vec<Vec<f64>>,
    /// Power applied to the compositional predictors, when known.
    pub lambda: Option<f64>,
    pub standardization: Option<Standardization>,
    pub deviance: f64,
    pub bic: f64,
    pub n: usize,
    pub converged: bool,
    pub separated: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn n_predictors(&self) -> usize {
        self.coefficients.len()
    }

    pub fn linear_predictor(&self, predictors: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(predictors)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Fitted probabilities for the rows of `x`, whose columns are the model
    /// predictors in model order.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                sigmoid(self.linear_predictor(&row))
            })
            .collect()
    }

    /// Columns of `candidates` selected by this model, in model order.
    pub fn design(&self, candidates: &DMatrix<f64>) -> DMatrix<f64> {
        candidates.select_columns(&self.predictor_indices)
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn deviance(eta: &[f64], y: &[bool]) -> f64 {
    2.0 * eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| if yi { softplus(-e) } else { softplus(e) })
        .sum::<f64>()
}

pub fn bic(deviance: f64, n_predictors: usize, n: usize) -> f64 {
    deviance + (n_predictors + 1) as f64 * (n as f64).ln()
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut out = DMatrix::from_element(n, p + 1, 1.0);
    out.columns_mut(1, p).copy_from(x);
    out
}

/// Predictor columns (0-based) that are linear combinations of the
/// intercept and earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let design = with_intercept(x);
    let n = design.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..design.ncols() {
        let col = design.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r -= q * proj;
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-9 * norm.max(f64::MIN_POSITIVE) * (n as f64).sqrt() {
            if j > 0 {
                dependent.push(j - 1);
            }
        } else {
            basis.push(r / rn);
        }
    }
    dependent
}

pub fn fit_logistic(x: &DMatrix<f64>, y: &[bool]) -> Result<LogisticModel> {
    fit_logistic_from(x, y, None)
}

/// Fits with optional starting values `[intercept, coefficients...]`.
pub fn fit_logistic_from(
    x: &DMatrix<f64>,
    y: &[bool],
    start: Option<&[f64]>,
) -> Result<LogisticModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{n} responses"),
            found: format!("{} responses", y.len()),
        });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(CodaError::SingleClass);
    }
    if n < p + 1 {
        return Err(CodaError::InvalidArgument(format!(
            "{n} samples cannot support {p} predictors plus an intercept"
        )));
    }
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(CodaError::NonFinite {
            row: k % n.max(1),
            column: k / n.max(1),
        });
    }
    let collinear = collinear_columns(x);
    if !collinear.is_empty() {
        return Err(CodaError::RankDeficient { columns: collinear });
    }

    let design = with_intercept(x);
    let yv = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let mut beta = match start {
        Some(s) if s.len() == p + 1 => DVector::from_column_slice(s),
        _ => {
            let mean = positives as f64 / n as f64;
            let mut b = DVector::zeros(p + 1);
            b[0] = (mean / (1.0 - mean)).ln();
            b
        }
    };

    let mut eta = &design * &beta;
    let mut dev = deviance(eta.as_slice(), y);
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    let mut info = DMatrix::zeros(p + 1, p + 1);
    while iterations < MAX_ITERATIONS {
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| m * (1.0 - m));
        let score = design.transpose() * (&yv - &mu);
        info = weighted_gram(&design, &w);
        if score.amax() <= SCORE_TOLERANCE {
            converged = true;
            break;
        }
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&score),
            None => {
                // weights collapsed: only happens when fitted values hit 0 or 1
                separated = true;
                break;
            }
        };
        beta += step;
        iterations += 1;
        eta = &design * &beta;
        let new_dev = deviance(eta.as_slice(), y);
        let change = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if beta.norm() > SEPARATION_NORM {
            separated = true;
            break;
        }
        if change <= DEVIANCE_TOLERANCE {
            let mu = eta.map(sigmoid);
            info = weighted_gram(&design, &mu.map(|m| m * (1.0 - m)));
            converged = true;
            break;
        }
    }
    if strictly_separates(eta.as_slice(), y)
        || eta
            .iter()
            .map(|&e| sigmoid(e))
            .any(|m| !(SEPARATION_PROBABILITY..=1.0 - SEPARATION_PROBABILITY).contains(&m))
    {
        separated = true;
    }

    let covariance = info
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .unwrap_or_else(|| DMatrix::from_element(p + 1, p + 1, f64::NAN));
    let se: Vec<f64> = (0..=p).map(|j| covariance[(j, j)].sqrt()).collect();
    Ok(LogisticModel {
        predictor_indices: (0..p).collect(),
        labels: (0..p).map(|j| format!("X{}", j + 1)).collect(),
        coefficients: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        std_errors: se[1..].to_vec(),
        intercept_std_error: se[0],
        covariance: (0..=p)
            .map(|i| covariance.row(i).iter().copied().collect())
            .collect(),
        lambda: None,
        standardization: None,
        deviance: dev,
        bic: bic(dev, p, n),
        n,
        converged: converged && !separated,
        separated,
        iterations,
    })
}

/// True when every positive has a larger linear predictor than every
/// negative. A linear predictor with that property can be scaled up without
/// bound, so the likelihood has no finite maximum.
fn strictly_separates(eta: &[f64], y: &[bool]) -> bool {
    let max_neg = eta
        .iter()
        .zip(y)
        .filter(|(_, &c)| !c)
        .map(|(e, _)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_pos = eta
        .iter()
        .zip(y)
        .filter(|(_, &c)| c)
        .map(|(e, _)| *e)
        .fold(f64::INFINITY, f64::min);
    max_neg < min_pos
}

fn weighted_gram(design: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = design.clone();
    for (i, &wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(wi);
    }
    design.transpose() * scaled
}

/// Adds the mean-0, variance-1 reparameterization of a fitted model.
///
/// `x` holds the model predictors in model order. With means `m` and standard
/// deviations `s`, standardized coefficients are `β_j s_j` and the
/// standardized intercept is `β_0 + Σ β_j m_j`, so fitted probabilities are
/// unchanged.
pub fn standardized_model(model: &LogisticModel, x: &DMatrix<f64>) -> Result<LogisticModel> {
    let p = model.n_predictors();
    if x.ncols() != p {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{p} predictor columns"),
            found: format!("{} columns", x.ncols()),
        });
    }
    if x.nrows() < 2 {
        return Err(CodaError::InvalidArgument(
            "standardization needs at least 2 samples".into(),
        ));
    }
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for (j, col) in x.column_iter().enumerate() {
        let values: Vec<f64> = col.iter().copied().collect();
        let sd = crate::stats::sample_variance(&values).sqrt();
        if !(sd > 0.0) {
            return Err(CodaError::InvalidArgument(format!(
                "predictor {} has zero variance",
                model
                    .labels
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| j.to_string())
            )));
        }
        means.push(crate::stats::mean(&values));
        sds.push(sd);
    }
    let coefficients: Vec<f64> = model
        .coefficients
        .iter()
        .zip(&sds)
        .map(|(b, s)| b * s)
        .collect();
    let intercept = model.intercept
        + model
            .coefficients
            .iter()
            .zip(&means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    let std_errors: Vec<f64> = model
        .std_errors
        .iter()
        .zip(&sds)
        .map(|(e, s)| e * s)
        .collect();
    // Var(β0 + Σ m_j β_j) = aᵀ Σ a with a = (1, m)
    let a: Vec<f64> = std::iter::once(1.0).chain(means.iter().copied()).collect();
    let mut var = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (k, ak) in a.iter().enumerate() {
            var += ai * ak * model.covariance[i][k];
        }
    }
    let mut out = model.clone();
    out.standardization = Some(Standardization {
        means,
        sds,
        coefficients,
        intercept,
        std_errors,
        intercept_std_error: var.max(0.0).sqrt(),
    });
    Ok(out)
}
