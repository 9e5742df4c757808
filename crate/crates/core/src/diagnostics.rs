//! Isometry scans over the power parameter and subcompositional coherence.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::composition::{CompositionMatrix, SampledSubset, SubcompositionPlan};
use crate::error::{CodaError, Result};
use crate::procrustes::procrustes_correlation;
use crate::spectral::{self, lra, pca, pca_values, DistanceMatrix, Method};
use crate::stats::{pearson, Summary};
use crate::transforms::{chipower, TransformDescriptor, TransformKind};

/// `1.00, 0.99, …, 0.01`.
pub fn default_grid() -> Vec<f64> {
    (1..=100).rev().map(|k| k as f64 / 100.0).collect()
}

/// Parses `start:end:step` (either order, always returned descending) or a
/// comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| CodaError::InvalidArgument(format!("lambda grid {text:?}: {msg}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad("cannot parse number"))
    };
    let grid = if text.contains(':') {
        let fields: Vec<&str> = text.split(':').collect();
        if fields.len() != 3 {
            return Err(bad("expected start:end:step"));
        }
        let (a, b, step) = (number(fields[0])?, number(fields[1])?, number(fields[2])?);
        if !(step > 0.0) {
            return Err(bad("step must be positive"));
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        let places: Option<Vec<usize>> = fields.iter().map(|f| decimals(f)).collect();
        match places.and_then(|p| p.into_iter().max()) {
            // integer arithmetic in units of the finest decimal gives 0.3, not 0.30000000000000004
            Some(places) if places <= 12 => {
                let scale = 10f64.powi(places as i32);
                let (top, unit) = ((hi * scale).round(), (step * scale).round());
                (0..=count)
                    .map(|k| (top - k as f64 * unit) / scale)
                    .collect()
            }
            _ => (0..=count).map(|k| hi - k as f64 * step).collect(),
        }
    } else {
        let mut values = text.split(',').map(number).collect::<Result<Vec<_>>>()?;
        values.sort_by(|x, y| y.total_cmp(x));
        values
    };
    validate_grid(&grid)?;
    Ok(grid)
}

/// Digits after the decimal point of a plain decimal literal.
fn decimals(text: &str) -> Option<usize> {
    let t = text.trim();
    if t.contains(['e', 'E']) {
        return None;
    }
    Some(t.split_once('.').map_or(0, |(_, frac)| frac.len()))
}

pub fn validate_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(CodaError::InvalidArgument("lambda grid is empty".into()));
    }
    if let Some(l) = lambdas.iter().find(|&&l| !(l > 0.0 && l <= 1.0)) {
        return Err(CodaError::InvalidArgument(format!(
            "lambda {l} outside (0, 1]"
        )));
    }
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(CodaError::InvalidArgument(
            "lambda grid must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryScan {
    pub lambdas: Vec<f64>,
    pub correlations: Vec<f64>,
    pub optimal_lambda: f64,
    pub optimal_correlation: f64,
    /// Number of dimensions compared; `None` means all positive dimensions.
    pub dims: Option<usize>,
}

impl IsometryScan {
    fn optimum_index(&self) -> usize {
        best_index(&self.lambdas, &self.correlations)
    }
}

/// Largest correlation; the smallest λ wins ties.
fn best_index(lambdas: &[f64], correlations: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..correlations.len() {
        let better = correlations[k] > correlations[best]
            || (correlations[k] == correlations[best] && lambdas[k] < lambdas[best]);
        if better {
            best = k;
        }
    }
    best
}

/// Reference geometry shared by a scan and its refinement.
struct IsometryProblem<'a> {
    source: &'a CompositionMatrix,
    reference: DMatrix<f64>,
    dims: Option<usize>,
}

impl<'a> IsometryProblem<'a> {
    fn new(
        chipower_source: &'a CompositionMatrix,
        logratio_source: &CompositionMatrix,
        dims: Option<usize>,
    ) -> Result<Self> {
        if chipower_source.nrows() != logratio_source.nrows() {
            return Err(CodaError::DimensionMismatch {
                expected: format!("{} rows", logratio_source.nrows()),
                found: format!("{} rows", chipower_source.nrows()),
            });
        }
        if dims == Some(0) {
            return Err(CodaError::InvalidArgument("dims must be at least 1".into()));
        }
        let reference = lra(logratio_source)?.row_coordinates(dims);
        Ok(IsometryProblem {
            source: chipower_source,
            reference,
            dims,
        })
    }

    fn correlation(&self, lambda: f64) -> Result<f64> {
        let candidate = pca(&chipower(self.source, lambda)?)?.row_coordinates(self.dims);
        procrustes_correlation(&self.reference, &candidate)
    }
}

/// Procrustes correlation between the chiPower sample geometry of
/// `chipower_source` at each λ and the logratio geometry of `logratio_source`.
pub fn isometry_scan(
    chipower_source: &CompositionMatrix,
    logratio_source: &CompositionMatrix,
    lambdas: &[f64],
    dims: Option<usize>,
) -> Result<IsometryScan> {
    validate_grid(lambdas)?;
    let problem = IsometryProblem::new(chipower_source, logratio_source, dims)?;
    let correlations = lambdas
        .par_iter()
        .map(|&l| problem.correlation(l))
        .collect::<Result<Vec<f64>>>()?;
    let best = best_index(lambdas, &correlations);
    Ok(IsometryScan {
        lambdas: lambdas.to_vec(),
        optimal_lambda: lambdas[best],
        optimal_correlation: correlations[best],
        correlations,
        dims,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedOptimum {
    pub lambda: f64,
    pub correlation: f64,
    /// False when the grid optimum was returned unchanged.
    pub refined: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the correlation maximum between the grid
/// neighbours of the grid optimum. The grid optimum is returned unchanged
/// when it lies on the boundary of the grid, when `tolerance` is not smaller
/// than half the bracketing interval, or when the search finds nothing better
/// (the profile is not locally unimodal).
pub fn refine_optimal_lambda(
    scan: &IsometryScan,
    chipower_source: &CompositionMatrix,
    logratio_source: &CompositionMatrix,
    tolerance: f64,
) -> Result<RefinedOptimum> {
    if !(tolerance > 0.0) {
        return Err(CodaError::InvalidArgument(
            "tolerance must be positive".into(),
        ));
    }
    let best = scan.optimum_index();
    let grid_optimum = RefinedOptimum {
        lambda: scan.lambdas[best],
        correlation: scan.correlations[best],
        refined: false,
    };
    if best == 0 || best + 1 == scan.lambdas.len() {
        return Ok(grid_optimum);
    }
    let (mut lo, mut hi) = (scan.lambdas[best + 1], scan.lambdas[best - 1]);
    if tolerance >= (hi - lo) / 2.0 {
        return Ok(grid_optimum);
    }
    let problem = IsometryProblem::new(chipower_source, logratio_source, scan.dims)?;
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = problem.correlation(x1)?;
    let mut f2 = problem.correlation(x2)?;
    while hi - lo > tolerance {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = problem.correlation(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = problem.correlation(x2)?;
        }
    }
    let (lambda, correlation) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if correlation < grid_optimum.correlation {
        return Ok(grid_optimum);
    }
    Ok(RefinedOptimum {
        lambda,
        correlation,
        refined: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub fraction_index: usize,
    pub fraction: f64,
    pub replicate: usize,
    pub parts: Vec<usize>,
    pub correlation: Option<f64>,
    /// Why no correlation could be computed.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub subset_size: usize,
    pub replicates: usize,
    pub failed: usize,
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub descriptor: TransformDescriptor,
    pub seed: u64,
    pub replicates: Vec<ReplicateResult>,
    pub fractions: Vec<FractionSummary>,
}

impl CoherenceReport {
    pub fn medians(&self) -> Vec<Option<f64>> {
        self.fractions
            .iter()
            .map(|f| f.summary.as_ref().map(|s| s.median))
            .collect()
    }
}

/// Part geometry `G = V D` of a PCA.
fn part_geometry(m: &CompositionMatrix, lambda: Option<f64>) -> Result<DMatrix<f64>> {
    let result = match lambda {
        Some(l) => pca(&chipower(m, l)?)?,
        None => {
            let closed = m.close_rows()?;
            pca_values(
                closed.values(),
                Method::Pca,
                closed.row_labels().to_vec(),
                closed.part_labels().to_vec(),
            )?
        }
    };
    Ok(result.col_coordinates(None))
}

fn assess(
    m: &CompositionMatrix,
    lambda: Option<f64>,
    plan: &SubcompositionPlan,
    descriptor: TransformDescriptor,
) -> Result<CoherenceReport> {
    let sizes = plan.sizes(m.nparts())?;
    let subsets = plan.sample(m.nparts())?;
    let full = part_geometry(m, lambda)?;

    let one = |s: &SampledSubset| -> ReplicateResult {
        let outcome = m
            .subcomposition(&s.parts)
            .and_then(|sub| part_geometry(&sub, lambda))
            .and_then(|g_s| {
                let rows = full.select_rows(&s.parts);
                procrustes_correlation(&g_s, &rows)
            });
        let (correlation, failure) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        ReplicateResult {
            fraction_index: s.fraction_index,
            fraction: plan.fractions[s.fraction_index],
            replicate: s.replicate,
            parts: s.parts.clone(),
            correlation,
            failure,
        }
    };
    let mut replicates: Vec<ReplicateResult> = subsets.par_iter().map(one).collect();
    replicates.sort_by_key(|r| (r.fraction_index, r.replicate));

    let mut by_fraction: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut failed = vec![0; sizes.len()];
    for r in &replicates {
        match r.correlation {
            Some(c) => by_fraction.entry(r.fraction_index).or_default().push(c),
            None => failed[r.fraction_index] += 1,
        }
    }
    let fractions = sizes
        .iter()
        .enumerate()
        .map(|(fi, &size)| FractionSummary {
            fraction: plan.fractions[fi],
            subset_size: size,
            replicates: plan.replicates_per_fraction,
            failed: failed[fi],
            summary: by_fraction.get(&fi).and_then(|v| Summary::of(v)),
        })
        .collect();
    Ok(CoherenceReport {
        descriptor,
        seed: plan.seed,
        replicates,
        fractions,
    })
}

/// Compares the chiPower part geometry of each sampled subcomposition with
/// the geometry of the same parts in the full composition.
pub fn coherence_assessment(
    m: &CompositionMatrix,
    lambda: f64,
    plan: &SubcompositionPlan,
) -> Result<CoherenceReport> {
    let descriptor = chipower(m, lambda)?.descriptor;
    assess(m, Some(lambda), plan, descriptor)
}

/// Same protocol on the closed compositions without transformation.
pub fn raw_coherence_baseline(
    m: &CompositionMatrix,
    plan: &SubcompositionPlan,
) -> Result<CoherenceReport> {
    let descriptor = TransformDescriptor {
        kind: TransformKind::Closure,
        ref_part: None,
        lambda: None,
        column_names: m.part_labels().to_vec(),
    };
    assess(m, None, plan, descriptor)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistancePair {
    pub i: usize,
    pub k: usize,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceComparison {
    pub pairs: Vec<DistancePair>,
    pub correlation: f64,
    /// Least-squares slope of `d2` on `d1` through the origin.
    pub slope: f64,
}

pub fn distance_comparison(d1: &DistanceMatrix, d2: &DistanceMatrix) -> Result<DistanceComparison> {
    if d1.len() != d2.len() {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{} points", d1.len()),
            found: format!("{} points", d2.len()),
        });
    }
    if d1.len() < 2 {
        return Err(CodaError::InvalidArgument(
            "distance comparison needs at least 2 points".into(),
        ));
    }
    let pairs: Vec<DistancePair> = d1
        .upper_triangle()
        .into_iter()
        .map(|(i, k, a)| DistancePair {
            i,
            k,
            d1: a,
            d2: d2.get(i, k),
        })
        .collect();
    let x: Vec<f64> = pairs.iter().map(|p| p.d1).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.d2).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(CodaError::Numerical(
            "first distance matrix is all zero".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    Ok(DistanceComparison {
        correlation: pearson(&x, &y),
        slope: sxy / sxx,
        pairs,
    })
}

/// Convenience wrapper: logratio distances against chiPower distances.
pub fn logratio_vs_chipower_distances(
    m: &CompositionMatrix,
    lambda: f64,
) -> Result<DistanceComparison> {
    distance_comparison(
        &spectral::logratio_distances(m)?,
        &spectral::chipower_distances(m, lambda)?,
    )
}
