//! Forward stepwise selection by BIC.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::logistic::{fit_logistic, fit_logistic_from, LogisticModel};
use crate::error::{CodaError, Result};

/// Forward selection from the intercept-only model. Each step adds the
/// candidate column whose fit has the lowest BIC, scanning columns in index
/// order so ties keep the lowest index; selection stops when no addition
/// lowers the BIC. Candidates whose fit is rank deficient or separated are
/// skipped at that step.
pub fn stepwise_bic(
    candidates: &DMatrix<f64>,
    labels: &[String],
    y: &[bool],
) -> Result<LogisticModel> {
    let (n, total) = candidates.shape();
    if labels.len() != total {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{total} labels"),
            found: format!("{} labels", labels.len()),
        });
    }
    let mut current = fit_logistic(&DMatrix::zeros(n, 0), y)?;
    let mut selected: Vec<usize> = Vec::new();
    loop {
        if selected.len() + 2 > n {
            break;
        }
        let start: Vec<f64> = std::iter::once(current.intercept)
            .chain(current.coefficients.iter().copied())
            .chain(std::iter::once(0.0))
            .collect();
        let remaining: Vec<usize> = (0..total).filter(|c| !selected.contains(c)).collect();
        let fits: Vec<Option<LogisticModel>> = remaining
            .par_iter()
            .map(|&c| {
                let mut cols = selected.clone();
                cols.push(c);
                let x = candidates.select_columns(&cols);
                match fit_logistic_from(&x, y, Some(&start)) {
                    Ok(m) if !m.separated && m.converged => Some(m),
                    _ => None,
                }
            })
            .collect();
        let mut best: Option<(usize, LogisticModel)> = None;
        for (&c, fit) in remaining.iter().zip(fits) {
            if let Some(m) = fit {
                if best.as_ref().is_none_or(|(_, b)| m.bic < b.bic) {
                    best = Some((c, m));
                }
            }
        }
        match best {
            Some((c, m)) if m.bic < current.bic => {
                selected.push(c);
                current = m;
            }
            _ => break,
        }
    }
    current.predictor_indices = selected.clone();
    current.labels = selected.iter().map(|&c| labels[c].clone()).collect();
    Ok(current)
}
