//! The compositional data model: samples × parts matrices, closure,
//! subcompositions, zero handling and seeded subcomposition sampling.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};

/// Absolute tolerance on row sums of a closed matrix.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;

/// Nonnegative samples × parts matrix with labels.
///
/// Raw counts and closed compositions share this type; `is_closed` records
/// whether every row has been divided by its total.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
    row_labels: Vec<String>,
    part_labels: Vec<String>,
    closed: bool,
}

impl CompositionMatrix {
    /// Builds an unclosed matrix, validating shape, labels and sign.
    pub fn new(
        values: DMatrix<f64>,
        row_labels: Vec<String>,
        part_labels: Vec<String>,
    ) -> Result<Self> {
        let (rows, cols) = values.shape();
        if rows < 2 || cols < 2 {
            return Err(CodaError::TooSmall {
                rows,
                cols,
                min_rows: 2,
                min_cols: 2,
            });
        }
        if row_labels.len() != rows {
            return Err(CodaError::DimensionMismatch {
                expected: format!("{rows} row labels"),
                found: row_labels.len().to_string(),
            });
        }
        if part_labels.len() != cols {
            return Err(CodaError::DimensionMismatch {
                expected: format!("{cols} part labels"),
                found: part_labels.len().to_string(),
            });
        }
        let mut seen = HashSet::new();
        for label in &part_labels {
            if !seen.insert(label.as_str()) {
                return Err(CodaError::DuplicatePartLabel(label.clone()));
            }
        }
        for j in 0..cols {
            for i in 0..rows {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(CodaError::NonFinite { row: i, column: j });
                }
                if v < 0.0 {
                    return Err(CodaError::NegativeCell {
                        row: i,
                        column: j,
                        value: v,
                    });
                }
            }
        }
        Ok(CompositionMatrix {
            values,
            row_labels,
            part_labels,
            closed: false,
        })
    }

    /// Builds a matrix with generated labels `S1..SI` and `P1..PJ`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let rows = (1..=values.nrows()).map(|i| format!("S{i}")).collect();
        let parts = (1..=values.ncols()).map(|j| format!("P{j}")).collect();
        Self::new(values, rows, parts)
    }

    /// Row-major convenience constructor, mostly for tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(CodaError::InvalidArgument("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_values(DMatrix::from_row_slice(rows.len(), ncols, &flat))
    }

    fn derived(&self, values: DMatrix<f64>, closed: bool) -> Self {
        CompositionMatrix {
            values,
            row_labels: self.row_labels.clone(),
            part_labels: self.part_labels.clone(),
            closed,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn part_labels(&self) -> &[String] {
        &self.part_labels
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn nparts(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn part_index(&self, label: &str) -> Option<usize> {
        self.part_labels.iter().position(|l| l == label)
    }

    /// Errors with the first zero cell (row-major order) if any.
    pub fn require_positive(&self) -> Result<()> {
        for i in 0..self.nrows() {
            for j in 0..self.nparts() {
                if self.values[(i, j)] <= 0.0 {
                    return Err(CodaError::ZeroEntry {
                        row: i,
                        column: j,
                        part: self.part_labels[j].clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Divides every row by its total. Already-closed matrices are returned as is.
    pub fn close_rows(&self) -> Result<Self> {
        if self.closed {
            return Ok(self.clone());
        }
        let mut values = self.values.clone();
        for (i, mut row) in values.row_iter_mut().enumerate() {
            let total = row.sum();
            if total <= 0.0 {
                return Err(CodaError::ZeroRowSum {
                    row: i,
                    label: self.row_labels[i].clone(),
                });
            }
            row /= total;
        }
        Ok(self.derived(values, true))
    }

    /// Restricts to `parts` (in the given order) and re-closes the rows.
    pub fn subcomposition(&self, parts: &[usize]) -> Result<Self> {
        if parts.len() < 2 {
            return Err(CodaError::InvalidArgument(format!(
                "a subcomposition needs at least 2 parts, got {}",
                parts.len()
            )));
        }
        let mut seen = HashSet::new();
        for &p in parts {
            if p >= self.nparts() {
                return Err(CodaError::InvalidArgument(format!(
                    "part index {p} out of range for {} parts",
                    self.nparts()
                )));
            }
            if !seen.insert(p) {
                return Err(CodaError::InvalidArgument(format!(
                    "part index {p} listed twice"
                )));
            }
        }
        let values = self.values.select_columns(parts);
        let sub = CompositionMatrix {
            values,
            row_labels: self.row_labels.clone(),
            part_labels: parts.iter().map(|&p| self.part_labels[p].clone()).collect(),
            closed: false,
        };
        sub.close_rows()
    }

    /// Sets every entry below `detection_limit` to zero (strict `<`).
    ///
    /// Returns the new matrix and the number of cells that were zeroed.
    pub fn inject_zeros(&self, detection_limit: f64) -> Result<(Self, usize)> {
        if self.closed {
            return Err(CodaError::InvalidArgument(
                "zero injection expects raw counts, got a closed matrix".into(),
            ));
        }
        if !(detection_limit >= 0.0) {
            return Err(CodaError::InvalidArgument(format!(
                "detection limit must be nonnegative, got {detection_limit}"
            )));
        }
        let mut zeroed = 0;
        let values = self.values.map(|v| {
            if v < detection_limit && v != 0.0 {
                zeroed += 1;
                0.0
            } else {
                v
            }
        });
        Ok((self.derived(values, false), zeroed))
    }

    pub fn apply_zero_strategy(&self, strategy: ZeroStrategy) -> Self {
        match strategy {
            ZeroStrategy::None => self.clone(),
            ZeroStrategy::AddConstant(delta) => self.derived(self.values.add_scalar(delta), false),
            ZeroStrategy::ReplaceZeros(delta) => {
                self.derived(self.values.map(|v| if v == 0.0 { delta } else { v }), false)
            }
        }
    }

    /// Column means of the closed matrix; sums to 1.
    pub fn mean_composition(&self) -> Result<Vec<f64>> {
        let closed = self.close_rows()?;
        let n = closed.nrows() as f64;
        Ok(closed.values.column_iter().map(|c| c.sum() / n).collect())
    }
}

/// How zeros in a count matrix are avoided before taking logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "delta", rename_all = "kebab-case")]
pub enum ZeroStrategy {
    /// Add `delta` to every cell.
    AddConstant(f64),
    /// Replace only zero cells by `delta`.
    ReplaceZeros(f64),
    None,
}

impl ZeroStrategy {
    pub fn validate(self) -> Result<Self> {
        match self {
            ZeroStrategy::AddConstant(d) | ZeroStrategy::ReplaceZeros(d) if !(d > 0.0) => Err(
                CodaError::InvalidArgument(format!("zero strategy constant must be > 0, got {d}")),
            ),
            s => Ok(s),
        }
    }
}

impl FromStr for ZeroStrategy {
    type Err = CodaError;

    /// Parses `none`, `add:<delta>` or `replace:<delta>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CodaError::InvalidArgument(format!("unrecognised zero strategy {s:?}"));
        if s == "none" {
            return Ok(ZeroStrategy::None);
        }
        let (kind, delta) = s.split_once(':').ok_or_else(bad)?;
        let delta: f64 = delta.parse().map_err(|_| bad())?;
        let strategy = match kind {
            "add" => ZeroStrategy::AddConstant(delta),
            "replace" => ZeroStrategy::ReplaceZeros(delta),
            _ => return Err(bad()),
        };
        strategy.validate()
    }
}

impl fmt::Display for ZeroStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroStrategy::None => write!(f, "none"),
            ZeroStrategy::AddConstant(d) => write!(f, "add:{d}"),
            ZeroStrategy::ReplaceZeros(d) => write!(f, "replace:{d}"),
        }
    }
}

/// What a plan fraction is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeBasis {
    /// Size is `round(f * J)`, forced parts included.
    #[default]
    AllParts,
    /// Size is `|must_include| + round(f * (J - |must_include|))`.
    RemainingParts,
}

/// Random subcomposition design: for each fraction, a number of replicate
/// part subsets, always containing `must_include`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcompositionPlan {
    pub fractions: Vec<f64>,
    pub replicates_per_fraction: usize,
    pub must_include: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub basis: SizeBasis,
}

/// One drawn subset of parts, keyed by its position in the plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampledSubset {
    pub fraction_index: usize,
    pub replicate: usize,
    pub parts: Vec<usize>,
}

fn round_half_up(x: f64) -> usize {
    // guard against 0.3 * 10 = 2.9999999999999996 style representation error
    (x + 0.5 + 1e-9).floor() as usize
}

impl SubcompositionPlan {
    pub fn new(fractions: Vec<f64>, replicates_per_fraction: usize, seed: u64) -> Self {
        SubcompositionPlan {
            fractions,
            replicates_per_fraction,
            must_include: Vec::new(),
            seed,
            basis: SizeBasis::AllParts,
        }
    }

    pub fn with_must_include(mut self, parts: Vec<usize>) -> Self {
        self.must_include = parts;
        self
    }

    pub fn with_basis(mut self, basis: SizeBasis) -> Self {
        self.basis = basis;
        self
    }

    /// Validates the plan against `n_parts` and returns the subset size for
    /// each fraction.
    pub fn sizes(&self, n_parts: usize) -> Result<Vec<usize>> {
        if self.fractions.is_empty() {
            return Err(CodaError::InvalidArgument("plan has no fractions".into()));
        }
        if self.replicates_per_fraction == 0 {
            return Err(CodaError::InvalidArgument(
                "replicates per fraction must be positive".into(),
            ));
        }
        for w in self.fractions.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CodaError::InvalidArgument(
                    "fractions must be strictly increasing".into(),
                ));
            }
        }
        let mut seen = HashSet::new();
        for &p in &self.must_include {
            if p >= n_parts || !seen.insert(p) {
                return Err(CodaError::InvalidArgument(format!(
                    "must-include part {p} is out of range or repeated"
                )));
            }
        }
        let forced = self.must_include.len();
        self.fractions
            .iter()
            .map(|&f| {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(CodaError::InvalidArgument(format!(
                        "fraction {f} outside (0, 1]"
                    )));
                }
                let size = match self.basis {
                    SizeBasis::AllParts => round_half_up(f * n_parts as f64),
                    SizeBasis::RemainingParts => {
                        forced + round_half_up(f * (n_parts - forced) as f64)
                    }
                };
                if size < forced {
                    return Err(CodaError::InvalidArgument(format!(
                        "fraction {f} gives {size} parts, fewer than the {forced} forced parts"
                    )));
                }
                if size < 2 || size > n_parts {
                    return Err(CodaError::InvalidArgument(format!(
                        "fraction {f} gives subcomposition size {size}, outside [2, {n_parts}]"
                    )));
                }
                Ok(size)
            })
            .collect()
    }

    /// Draws every subset of the plan. The generator for (fraction, replicate)
    /// is a ChaCha stream derived from the seed and that key alone, so the
    /// output does not depend on evaluation order.
    pub fn sample(&self, n_parts: usize) -> Result<Vec<SampledSubset>> {
        let sizes = self.sizes(n_parts)?;
        let forced: HashSet<usize> = self.must_include.iter().copied().collect();
        let pool: Vec<usize> = (0..n_parts).filter(|p| !forced.contains(p)).collect();
        let mut out = Vec::with_capacity(sizes.len() * self.replicates_per_fraction);
        for (fi, &size) in sizes.iter().enumerate() {
            let extra = size - self.must_include.len();
            for rep in 0..self.replicates_per_fraction {
                let mut rng = replicate_rng(self.seed, fi as u64, rep as u64);
                let mut parts = self.must_include.clone();
                parts.extend(
                    rand::seq::index::sample(&mut rng, pool.len(), extra)
                        .into_iter()
                        .map(|k| pool[k]),
                );
                parts.sort_unstable();
                out.push(SampledSubset {
                    fraction_index: fi,
                    replicate: rep,
                    parts,
                });
            }
        }
        Ok(out)
    }
}

/// Independent generator for one keyed task.
pub fn replicate_rng(seed: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((major << 32) | (minor & 0xffff_ffff));
    rng
}

pub fn sample_subcompositions(
    matrix: &CompositionMatrix,
    plan: &SubcompositionPlan,
) -> Result<Vec<SampledSubset>> {
    plan.sample(matrix.nparts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> CompositionMatrix {
        CompositionMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn close_divides_by_row_total() {
        let c = m(&[vec![2.0, 3.0, 5.0], vec![1.0, 1.0, 2.0]])
            .close_rows()
            .unwrap();
        assert!(c.is_closed());
        assert_abs_diff_eq!(c.values()[(0, 0)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values()[(0, 1)], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values()[(0, 2)], 0.5, epsilon = 1e-15);

        let c = m(&[vec![1.0, 1.0], vec![3.0, 1.0]]).close_rows().unwrap();
        assert_eq!(c.values()[(1, 0)], 0.75);
        assert_eq!(c.values()[(1, 1)], 0.25);
    }

    #[test]
    fn already_closed_rows_are_unchanged() {
        let c = m(&[vec![0.25, 0.75], vec![0.5, 0.5]]).close_rows().unwrap();
        assert_eq!(c.values()[(0, 0)], 0.25);
        assert_eq!(c.values()[(0, 1)], 0.75);
    }

    #[test]
    fn zero_row_cannot_be_closed() {
        let err = m(&[vec![1.0, 2.0], vec![0.0, 0.0]])
            .close_rows()
            .unwrap_err();
        assert!(matches!(err, CodaError::ZeroRowSum { row: 1, .. }));
    }

    #[test]
    fn subcomposition_recloses() {
        let x = m(&[vec![0.2, 0.3, 0.5], vec![0.5, 0.5, 0.0]]);
        let s = x.subcomposition(&[0, 1]).unwrap();
        assert_abs_diff_eq!(s.values()[(0, 0)], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[(0, 1)], 0.6, epsilon = 1e-15);
        assert_eq!(s.part_labels(), &["P1".to_string(), "P2".to_string()]);

        // zero retained: [0.5, 0.5, 0] on parts {2,3} -> [1, 0]
        let s = x.subcomposition(&[1, 2]).unwrap();
        assert_eq!(s.values()[(1, 0)], 1.0);
        assert_eq!(s.values()[(1, 1)], 0.0);
    }

    #[test]
    fn subcomposition_errors() {
        let x = m(&[vec![0.2, 0.3, 0.5], vec![0.5, 0.5, 0.0]]);
        assert!(x.subcomposition(&[1]).is_err());
        assert!(x.subcomposition(&[]).is_err());
        assert!(x.subcomposition(&[0, 0]).is_err());
        assert!(x.subcomposition(&[0, 3]).is_err());
        let x = m(&[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0]]);
        let err = x.subcomposition(&[1, 2]).unwrap_err();
        assert!(matches!(err, CodaError::ZeroRowSum { row: 1, .. }));
    }

    #[test]
    fn inject_zeros_uses_strict_threshold() {
        let x = m(&[vec![19.0, 20.0], vec![5.0, 100.0]]);
        let (z, n) = x.inject_zeros(20.0).unwrap();
        assert_eq!(n, 2);
        assert_eq!(z.values(), m(&[vec![0.0, 20.0], vec![0.0, 100.0]]).values());
        let (same, n) = x.inject_zeros(0.0).unwrap();
        assert_eq!(n, 0);
        assert_eq!(same, x);
        assert!(x.close_rows().unwrap().inject_zeros(1.0).is_err());
    }

    #[test]
    fn zero_strategies() {
        let x = m(&[vec![0.0, 2.0], vec![1.0, 1.0]]);
        let a = x.apply_zero_strategy(ZeroStrategy::AddConstant(1.0));
        assert_eq!(a.values()[(0, 0)], 1.0);
        assert_eq!(a.values()[(0, 1)], 3.0);
        let r = x.apply_zero_strategy(ZeroStrategy::ReplaceZeros(0.5));
        assert_eq!(r.values()[(0, 0)], 0.5);
        assert_eq!(r.values()[(0, 1)], 2.0);
        assert_eq!(r.values()[(1, 0)], 1.0);
        assert_eq!(x.apply_zero_strategy(ZeroStrategy::None), x);
    }

    #[test]
    fn zero_strategy_parsing() {
        assert_eq!(
            "add:1".parse::<ZeroStrategy>().unwrap(),
            ZeroStrategy::AddConstant(1.0)
        );
        assert_eq!(
            "replace:0.5".parse::<ZeroStrategy>().unwrap(),
            ZeroStrategy::ReplaceZeros(0.5)
        );
        assert_eq!("none".parse::<ZeroStrategy>().unwrap(), ZeroStrategy::None);
        assert!("add:0".parse::<ZeroStrategy>().is_err());
        assert!("mult:1".parse::<ZeroStrategy>().is_err());
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            CompositionMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]),
            Err(CodaError::NegativeCell {
                row: 0,
                column: 1,
                ..
            })
        ));
        assert!(CompositionMatrix::from_rows(&[vec![1.0, 1.0]]).is_err());
        let dup = CompositionMatrix::new(
            DMatrix::from_element(2, 2, 1.0),
            vec!["a".into(), "b".into()],
            vec!["x".into(), "x".into()],
        );
        assert!(matches!(dup, Err(CodaError::DuplicatePartLabel(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let plan = SubcompositionPlan::new(vec![0.5], 1, 42);
        let a = plan.sample(10).unwrap();
        let b = plan.sample(10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].parts.len(), 5);
        let other = SubcompositionPlan::new(vec![0.5], 1, 43)
            .sample(10)
            .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn forced_full_set() {
        let plan = SubcompositionPlan::new(vec![1.0], 3, 1).with_must_include((0..6).collect());
        for s in plan.sample(6).unwrap() {
            assert_eq!(s.parts, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn forced_parts_with_remaining_basis() {
        // 14 forced parts out of 48; extents of 1 to 33 additional parts
        let must: Vec<usize> = (0..48).step_by(3).take(14).collect();
        let fractions: Vec<f64> = (1..=33).map(|k| k as f64 / 34.0).collect();
        let plan = SubcompositionPlan::new(fractions, 5, 9)
            .with_must_include(must.clone())
            .with_basis(SizeBasis::RemainingParts);
        let sets = plan.sample(48).unwrap();
        for s in &sets {
            assert!((15..=47).contains(&s.parts.len()));
            assert!(must.iter().all(|p| s.parts.contains(p)));
        }
        assert_eq!(sets.first().unwrap().parts.len(), 15);
        assert_eq!(sets.last().unwrap().parts.len(), 47);
    }

    #[test]
    fn size_rounding_is_half_up() {
        let plan = SubcompositionPlan::new(vec![0.25, 0.35], 1, 0);
        assert_eq!(plan.sizes(10).unwrap(), vec![3, 4]);
        let plan = SubcompositionPlan::new(vec![0.1, 0.2, 0.3], 1, 0);
        assert_eq!(plan.sizes(20).unwrap(), vec![2, 4, 6]);
        let plan = SubcompositionPlan::new(vec![0.3, 0.7], 1, 0);
        assert_eq!(plan.sizes(10).unwrap(), vec![3, 7]);
    }

    #[test]
    fn invalid_plans() {
        assert!(SubcompositionPlan::new(vec![0.5, 0.4], 1, 0)
            .sizes(10)
            .is_err());
        assert!(SubcompositionPlan::new(vec![0.1], 1, 0).sizes(10).is_err()); // size 1
        assert!(SubcompositionPlan::new(vec![0.5], 0, 0).sizes(10).is_err());
        let plan = SubcompositionPlan::new(vec![0.2], 1, 0).with_must_include(vec![0, 1, 2, 3]);
        assert!(plan.sizes(10).is_err());
    }

    proptest! {
        #[test]
        fn closure_is_idempotent_and_full_subcomposition_matches(
            data in proptest::collection::vec(0.01f64..100.0, 12)
        ) {
            let x = CompositionMatrix::from_values(DMatrix::from_row_slice(3, 4, &data)).unwrap();
            let c = x.close_rows().unwrap();
            prop_assert_eq!(&c.close_rows().unwrap(), &c);
            for row in c.values().row_iter() {
                prop_assert!((row.sum() - 1.0).abs() <= CLOSURE_TOLERANCE);
            }
            let full = x.subcomposition(&[0, 1, 2, 3]).unwrap();
            for (a, b) in full.values().iter().zip(c.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn zero_ops_are_monotone(
            data in proptest::collection::vec(0.0f64..50.0, 8),
            limit in 0.0f64..30.0,
            delta in 0.01f64..2.0,
        ) {
            let x = CompositionMatrix::from_values(DMatrix::from_row_slice(2, 4, &data)).unwrap();
            let (z, _) = x.inject_zeros(limit).unwrap();
            for (a, b) in z.values().iter().zip(x.values().iter()) {
                prop_assert!(a <= b);
            }
            let added = x.apply_zero_strategy(ZeroStrategy::AddConstant(delta));
            for (a, b) in added.values().iter().zip(x.values().iter()) {
                prop_assert!(a > b);
                prop_assert!((a - b - delta).abs() < 1e-12);
            }
        }
    }
}
