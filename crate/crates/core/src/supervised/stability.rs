//! How a fitted model behaves across subcompositions, and compositional
//! effect sizes.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, sigmoid, standardized_model, LogisticModel};
use super::metrics::{metrics, DEFAULT_THRESHOLD};
use crate::composition::{CompositionMatrix, SubcompositionPlan};
use crate::error::{CodaError, Result};
use crate::stats::{quantile_sorted, Summary};
use crate::transforms::{check_lambda, power_only};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcompositionFit {
    pub parts: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub standardized_coefficients: Vec<f64>,
    pub standardized_intercept: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub separated: bool,
}

fn check_predictors(m: &CompositionMatrix, model: &LogisticModel) -> Result<()> {
    if model.predictor_indices.is_empty() {
        return Err(CodaError::InvalidArgument("model has no predictors".into()));
    }
    if let Some(&p) = model.predictor_indices.iter().find(|&&p| p >= m.nparts()) {
        return Err(CodaError::InvalidArgument(format!(
            "model predictor {p} is not a part of the {}-part composition",
            m.nparts()
        )));
    }
    Ok(())
}

/// Re-closes `m` on `parts`, powers it and refits the predictors of `model`
/// (same parts, same order), returning raw and standardized coefficients and
/// full-data AUC and accuracy.
pub fn refit_on_subcomposition(
    m: &CompositionMatrix,
    y: &[bool],
    model: &LogisticModel,
    lambda: f64,
    parts: &[usize],
) -> Result<SubcompositionFit> {
    check_predictors(m, model)?;
    let position: Vec<usize> = model
        .predictor_indices
        .iter()
        .map(|p| {
            parts.iter().position(|q| q == p).ok_or_else(|| {
                CodaError::InvalidArgument(format!(
                    "subcomposition does not contain model part {p}"
                ))
            })
        })
        .collect::<Result<_>>()?;
    let sub = m.subcomposition(parts)?;
    let x = power_only(&sub, lambda)?.values.select_columns(&position);
    let fit = standardized_model(&fit_logistic(&x, y)?, &x)?;
    let st = fit.standardization.as_ref().expect("just standardized");
    let scores = fit.predict(&x);
    let m = metrics(&scores, y, DEFAULT_THRESHOLD)?;
    Ok(SubcompositionFit {
        parts: parts.to_vec(),
        coefficients: fit.coefficients.clone(),
        intercept: fit.intercept,
        standardized_coefficients: st.coefficients.clone(),
        standardized_intercept: st.intercept,
        auc: m.auc.expect("fit_logistic requires both classes"),
        accuracy: m.accuracy,
        separated: fit.separated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseModelSummary {
    pub labels: Vec<String>,
    pub predictor_indices: Vec<usize>,
    pub standardized_coefficients: Vec<f64>,
    pub standardized_std_errors: Vec<f64>,
    /// `coefficient ± 1.96 SE` on the standardized scale.
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub auc: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReplicate {
    pub fraction_index: usize,
    pub fraction: f64,
    pub replicate: usize,
    pub fit: Option<SubcompositionFit>,
    pub parts: Vec<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityFraction {
    pub fraction: f64,
    pub subset_size: usize,
    pub replicates: usize,
    pub failed: usize,
    pub auc: Option<Summary>,
    pub accuracy: Option<Summary>,
    /// 2.5% and 97.5% quantiles.
    pub auc_interval95: Option<[f64; 2]>,
    pub accuracy_interval95: Option<[f64; 2]>,
    /// Per predictor, in model order.
    pub standardized_coefficients: Vec<Option<Summary>>,
    /// Per predictor, share of successful replicates inside the base 95% interval.
    pub within_base_ci: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub lambda: f64,
    pub seed: u64,
    pub base: BaseModelSummary,
    pub replicates: Vec<StabilityReplicate>,
    pub fractions: Vec<StabilityFraction>,
}

fn interval95(values: &[f64]) -> Option<[f64; 2]> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some([
        quantile_sorted(&sorted, 0.025),
        quantile_sorted(&sorted, 0.975),
    ])
}

/// Refits the predictors of `base` on every subcomposition drawn by `plan`,
/// whose forced parts must be exactly the model's parts.
pub fn model_subcomposition_stability(
    m: &CompositionMatrix,
    y: &[bool],
    base: &LogisticModel,
    lambda: f64,
    plan: &SubcompositionPlan,
) -> Result<StabilityReport> {
    check_lambda(lambda)?;
    check_predictors(m, base)?;
    let forced: BTreeSet<usize> = plan.must_include.iter().copied().collect();
    let predictors: BTreeSet<usize> = base.predictor_indices.iter().copied().collect();
    if forced != predictors {
        return Err(CodaError::InvalidArgument(
            "plan must force exactly the model's predictor parts".into(),
        ));
    }
    let sizes = plan.sizes(m.nparts())?;
    let subsets = plan.sample(m.nparts())?;

    let full: Vec<usize> = (0..m.nparts()).collect();
    let reference = refit_on_subcomposition(m, y, base, lambda, &full)?;
    let x = power_only(m, lambda)?
        .values
        .select_columns(&base.predictor_indices);
    let st_base = standardized_model(&fit_logistic(&x, y)?, &x)?;
    let st = st_base.standardization.as_ref().expect("just standardized");
    let base_summary = BaseModelSummary {
        labels: base.labels.clone(),
        predictor_indices: base.predictor_indices.clone(),
        standardized_coefficients: st.coefficients.clone(),
        standardized_std_errors: st.std_errors.clone(),
        ci_lower: st
            .coefficients
            .iter()
            .zip(&st.std_errors)
            .map(|(c, e)| c - Z_95 * e)
            .collect(),
        ci_upper: st
            .coefficients
            .iter()
            .zip(&st.std_errors)
            .map(|(c, e)| c + Z_95 * e)
            .collect(),
        auc: reference.auc,
        accuracy: reference.accuracy,
    };

    let mut replicates: Vec<StabilityReplicate> = subsets
        .par_iter()
        .map(|s| {
            let (fit, failure) = match refit_on_subcomposition(m, y, base, lambda, &s.parts) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            StabilityReplicate {
                fraction_index: s.fraction_index,
                fraction: plan.fractions[s.fraction_index],
                replicate: s.replicate,
                parts: s.parts.clone(),
                fit,
                failure,
            }
        })
        .collect();
    replicates.sort_by_key(|r| (r.fraction_index, r.replicate));

    let p = base.n_predictors();
    let fractions = sizes
        .iter()
        .enumerate()
        .map(|(fi, &size)| {
            let fits: Vec<&SubcompositionFit> = replicates
                .iter()
                .filter(|r| r.fraction_index == fi)
                .filter_map(|r| r.fit.as_ref())
                .collect();
            let aucs: Vec<f64> = fits.iter().map(|f| f.auc).collect();
            let accs: Vec<f64> = fits.iter().map(|f| f.accuracy).collect();
            let coef = |j: usize| -> Vec<f64> {
                fits.iter()
                    .map(|f| f.standardized_coefficients[j])
                    .collect()
            };
            StabilityFraction {
                fraction: plan.fractions[fi],
                subset_size: size,
                replicates: plan.replicates_per_fraction,
                failed: plan.replicates_per_fraction - fits.len(),
                auc: Summary::of(&aucs),
                accuracy: Summary::of(&accs),
                auc_interval95: interval95(&aucs),
                accuracy_interval95: interval95(&accs),
                standardized_coefficients: (0..p).map(|j| Summary::of(&coef(j))).collect(),
                within_base_ci: (0..p)
                    .map(|j| {
                        let c = coef(j);
                        let inside = c
                            .iter()
                            .filter(|&&v| {
                                v >= base_summary.ci_lower[j] && v <= base_summary.ci_upper[j]
                            })
                            .count();
                        if c.is_empty() {
                            0.0
                        } else {
                            inside as f64 / c.len() as f64
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(StabilityReport {
        lambda,
        seed: plan.seed,
        base: base_summary,
        replicates,
        fractions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectMode {
    /// Change the part and leave the others untouched.
    Naive,
    /// Change the part and rescale the others proportionally to re-close.
    Reclosed,
}

impl std::str::FromStr for EffectMode {
    type Err = CodaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EffectMode::Naive),
            "reclosed" => Ok(EffectMode::Reclosed),
            other => Err(CodaError::InvalidArgument(format!(
                "unknown effect mode {other:?} (expected naive or reclosed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub linear_predictor: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectResult {
    pub part: usize,
    pub multiplier: f64,
    pub mode: EffectMode,
    pub lambda: f64,
    pub before: Evaluation,
    pub after: Evaluation,
    pub composition_after: Vec<f64>,
}

fn evaluate(model: &LogisticModel, composition: &[f64], lambda: f64) -> Evaluation {
    let x: Vec<f64> = model
        .predictor_indices
        .iter()
        .map(|&p| {
            if composition[p] == 0.0 {
                0.0
            } else {
                composition[p].powf(lambda)
            }
        })
        .collect();
    let eta = model.linear_predictor(&x);
    Evaluation {
        linear_predictor: eta,
        probability: sigmoid(eta),
    }
}

/// Evaluates `model` on the powered `baseline` composition before and after
/// multiplying `part` by `multiplier`.
pub fn compositional_effect(
    model: &LogisticModel,
    baseline: &[f64],
    part: usize,
    multiplier: f64,
    lambda: f64,
    mode: EffectMode,
) -> Result<EffectResult> {
    check_lambda(lambda)?;
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(CodaError::InvalidArgument(format!(
            "multiplier must be positive, got {multiplier}"
        )));
    }
    if let Some(&p) = model
        .predictor_indices
        .iter()
        .chain(std::iter::once(&part))
        .find(|&&p| p >= baseline.len())
    {
        return Err(CodaError::DimensionMismatch {
            expected: format!("composition with more than {p} parts"),
            found: format!("{} parts", baseline.len()),
        });
    }
    if baseline.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(CodaError::InvalidArgument(
            "baseline composition must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = baseline.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CodaError::InvalidArgument(format!(
            "baseline composition must be closed (sums to {total})"
        )));
    }

    let mut after = baseline.to_vec();
    let old = baseline[part];
    let new = old * multiplier;
    after[part] = new;
    if mode == EffectMode::Reclosed {
        if new > 1.0 {
            return Err(CodaError::InvalidArgument(format!(
                "part value {new} exceeds 1 after the change"
            )));
        }
        if old < 1.0 {
            let factor = (1.0 - new) / (1.0 - old);
            for (j, v) in after.iter_mut().enumerate() {
                if j != part {
                    *v *= factor;
                }
            }
        } else if new != old {
            return Err(CodaError::InvalidArgument(
                "cannot reduce a part that makes up the whole composition".into(),
            ));
        }
    }
    Ok(EffectResult {
        part,
        multiplier,
        mode,
        lambda,
        before: evaluate(model, baseline, lambda),
        after: evaluate(model, &after, lambda),
        composition_after: after,
    })
}
