//! Logratio transforms and the chiPower family.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::composition::CompositionMatrix;
use crate::error::{CodaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    PairwiseLr,
    Alr,
    Clr,
    ChiPower,
    PowerOnly,
    /// Row closure only, no transformation.
    Closure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDescriptor {
    pub kind: TransformKind,
    /// Reference part for ALR.
    pub ref_part: Option<usize>,
    /// Power for chiPower and power-only.
    pub lambda: Option<f64>,
    pub column_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedMatrix {
    pub values: DMatrix<f64>,
    pub descriptor: TransformDescriptor,
    pub source_dims: (usize, usize),
    /// Column means of the closed powered matrix, for chiPower only.
    pub column_means_used: Option<Vec<f64>>,
    pub row_labels: Vec<String>,
}

/// Serializable description of a transformed matrix (no values).
#[derive(Debug, Clone, Serialize)]
pub struct TransformSummary {
    pub descriptor: TransformDescriptor,
    pub rows: usize,
    pub columns: usize,
    pub source_dims: (usize, usize),
    pub column_means_used: Option<Vec<f64>>,
}

impl TransformedMatrix {
    pub fn summary(&self) -> TransformSummary {
        TransformSummary {
            descriptor: self.descriptor.clone(),
            rows: self.values.nrows(),
            columns: self.values.ncols(),
            source_dims: self.source_dims,
            column_means_used: self.column_means_used.clone(),
        }
    }

    pub fn kind(&self) -> TransformKind {
        self.descriptor.kind
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(CodaError::InvalidArgument(format!(
            "power must lie in (0, 1], got {lambda}"
        )))
    }
}

fn positive_closed(m: &CompositionMatrix) -> Result<CompositionMatrix> {
    m.require_positive()?;
    m.close_rows()
}

fn build(
    m: &CompositionMatrix,
    values: DMatrix<f64>,
    kind: TransformKind,
    ref_part: Option<usize>,
    lambda: Option<f64>,
    column_names: Vec<String>,
) -> TransformedMatrix {
    TransformedMatrix {
        values,
        descriptor: TransformDescriptor {
            kind,
            ref_part,
            lambda,
            column_names,
        },
        source_dims: (m.nrows(), m.nparts()),
        column_means_used: None,
        row_labels: m.row_labels().to_vec(),
    }
}

/// All `J(J-1)/2` logratios `log(x_j / x_k)`, `j < k`, in lexicographic pair order.
pub fn pairwise_lr(m: &CompositionMatrix) -> Result<TransformedMatrix> {
    let x = positive_closed(m)?;
    let (rows, parts) = (x.nrows(), x.nparts());
    let labels = x.part_labels();
    let pairs: Vec<(usize, usize)> = (0..parts)
        .flat_map(|j| (j + 1..parts).map(move |k| (j, k)))
        .collect();
    let v = x.values();
    let values = DMatrix::from_fn(rows, pairs.len(), |i, c| {
        let (j, k) = pairs[c];
        (v[(i, j)] / v[(i, k)]).ln()
    });
    let names = pairs
        .iter()
        .map(|&(j, k)| format!("log({}/{})", labels[j], labels[k]))
        .collect();
    Ok(build(
        m,
        values,
        TransformKind::PairwiseLr,
        None,
        None,
        names,
    ))
}

/// Additive logratios against `ref_part`, other parts in their original order.
pub fn alr(m: &CompositionMatrix, ref_part: usize) -> Result<TransformedMatrix> {
    if ref_part >= m.nparts() {
        return Err(CodaError::InvalidArgument(format!(
            "reference part {ref_part} out of range for {} parts",
            m.nparts()
        )));
    }
    let x = positive_closed(m)?;
    let labels = x.part_labels();
    let numerators: Vec<usize> = (0..x.nparts()).filter(|&j| j != ref_part).collect();
    let v = x.values();
    let values = DMatrix::from_fn(x.nrows(), numerators.len(), |i, c| {
        (v[(i, numerators[c])] / v[(i, ref_part)]).ln()
    });
    let names = numerators
        .iter()
        .map(|&j| format!("log({}/{})", labels[j], labels[ref_part]))
        .collect();
    Ok(build(
        m,
        values,
        TransformKind::Alr,
        Some(ref_part),
        None,
        names,
    ))
}

/// The part whose log has the smallest variance across samples; ties go to
/// the lowest index.
pub fn choose_alr_ref(m: &CompositionMatrix) -> Result<usize> {
    let x = positive_closed(m)?;
    let mut best = (0, f64::INFINITY);
    for (j, col) in x.values().column_iter().enumerate() {
        let logs: Vec<f64> = col.iter().map(|v| v.ln()).collect();
        let var = crate::stats::sample_variance(&logs);
        if var < best.1 {
            best = (j, var);
        }
    }
    Ok(best.0)
}

/// Centred logratios: log of each part over the geometric mean of the row.
pub fn clr(m: &CompositionMatrix) -> Result<TransformedMatrix> {
    let x = positive_closed(m)?;
    let mut values = x.values().map(f64::ln);
    for mut row in values.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let names = x
        .part_labels()
        .iter()
        .map(|l| format!("clr({l})"))
        .collect();
    Ok(build(m, values, TransformKind::Clr, None, None, names))
}

/// Box-Cox power function; `lambda = 0` is the log limit.
pub fn box_cox(x: f64, lambda: f64) -> Result<f64> {
    if !(x >= 0.0) || !(0.0..=1.0).contains(&lambda) {
        return Err(CodaError::InvalidArgument(format!(
            "box_cox needs x >= 0 and lambda in [0, 1], got x={x}, lambda={lambda}"
        )));
    }
    if lambda == 0.0 {
        if x == 0.0 {
            return Err(CodaError::InvalidArgument(
                "log limit of box_cox is undefined at x = 0".into(),
            ));
        }
        Ok(x.ln())
    } else {
        Ok((x.powf(lambda) - 1.0) / lambda)
    }
}

/// Powers every entry (`0^λ = 0`) and closes the rows.
pub(crate) fn power_and_close(m: &CompositionMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    let mut y = m.values().map(|v| v.powf(lambda));
    for (i, mut row) in y.row_iter_mut().enumerate() {
        let total = row.sum();
        if total <= 0.0 {
            return Err(CodaError::ZeroRowSum {
                row: i,
                label: m.row_labels()[i].clone(),
            });
        }
        row /= total;
    }
    Ok(y)
}

/// The chiPower transformation.
///
/// 1. power the entries, `x^λ` (zeros stay zero);
/// 2. close the rows, giving `Y`;
/// 3. take the column means `ȳ_j` of `Y`;
/// 4. return `z_ij = y_ij / (λ √ȳ_j)`.
///
/// At `λ = 1` on a closed matrix this is the chi-square standardization of
/// correspondence analysis.
pub fn chipower(m: &CompositionMatrix, lambda: f64) -> Result<TransformedMatrix> {
    check_lambda(lambda)?;
    let mut y = power_and_close(m, lambda)?;
    let n = y.nrows() as f64;
    let means: Vec<f64> = y.column_iter().map(|c| c.sum() / n).collect();
    for (j, (mut col, &mean)) in y.column_iter_mut().zip(&means).enumerate() {
        if mean <= 0.0 {
            return Err(CodaError::ZeroColumn {
                part: m.part_labels()[j].clone(),
            });
        }
        col /= lambda * mean.sqrt();
    }
    let names = m
        .part_labels()
        .iter()
        .map(|l| format!("chiPower[{lambda}]({l})"))
        .collect();
    let mut t = build(m, y, TransformKind::ChiPower, None, Some(lambda), names);
    t.column_means_used = Some(means);
    Ok(t)
}

/// `x^λ` on the closed matrix, without standardization or the `1/λ` factor.
pub fn power_only(m: &CompositionMatrix, lambda: f64) -> Result<TransformedMatrix> {
    check_lambda(lambda)?;
    let closed = m.close_rows()?;
    let values = closed.values().map(|v| v.powf(lambda));
    let names = m
        .part_labels()
        .iter()
        .map(|l| format!("{l}^{lambda}"))
        .collect();
    Ok(build(
        m,
        values,
        TransformKind::PowerOnly,
        None,
        Some(lambda),
        names,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> CompositionMatrix {
        CompositionMatrix::from_rows(rows).unwrap()
    }

    fn assert_row(actual: &DMatrix<f64>, row: usize, expected: &[f64], tol: f64) {
        for (j, e) in expected.iter().enumerate() {
            assert_abs_diff_eq!(actual[(row, j)], *e, epsilon = tol);
        }
    }

    #[test]
    fn pairwise_lr_values_and_order() {
        let x = m(&[vec![0.2, 0.3, 0.5], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]);
        let t = pairwise_lr(&x).unwrap();
        assert_eq!(t.values.ncols(), 3);
        assert_row(&t.values, 0, &[-0.4055, -0.9163, -0.5108], 5e-5);
        assert_row(&t.values, 1, &[0.0, 0.0, 0.0], 1e-15);
        assert_eq!(
            t.descriptor.column_names,
            vec!["log(P1/P2)", "log(P1/P3)", "log(P2/P3)"]
        );
    }

    #[test]
    fn pairwise_lr_count_for_48_parts() {
        let values = DMatrix::from_fn(3, 48, |i, j| 1.0 + (i * 48 + j) as f64);
        let t = pairwise_lr(&CompositionMatrix::from_values(values).unwrap()).unwrap();
        assert_eq!(t.values.ncols(), 1128);
    }

    #[test]
    fn zero_entry_rejected_with_location() {
        let x = m(&[vec![0.2, 0.8], vec![0.0, 1.0]]);
        for r in [
            pairwise_lr(&x).map(|_| ()),
            clr(&x).map(|_| ()),
            alr(&x, 0).map(|_| ()),
        ] {
            assert!(matches!(
                r,
                Err(CodaError::ZeroEntry {
                    row: 1,
                    column: 0,
                    ..
                })
            ));
        }
        assert!(choose_alr_ref(&x).is_err());
    }

    #[test]
    fn alr_values() {
        let x = m(&[vec![0.2, 0.3, 0.5], vec![0.1, 0.1, 0.8]]);
        let t = alr(&x, 2).unwrap();
        assert_eq!(t.values.ncols(), 2);
        assert_row(&t.values, 0, &[-0.9163, -0.5108], 5e-5);
        assert!(alr(&x, 3).is_err());

        let two = m(&[vec![0.2, 0.8], vec![0.6, 0.4]]);
        let a = alr(&two, 1).unwrap();
        let lr = pairwise_lr(&two).unwrap();
        assert_eq!(a.values, lr.values);
    }

    #[test]
    fn alr_reference_choice() {
        // part 2 constant
        let x = m(&[
            vec![0.1, 0.3, 0.6],
            vec![0.5, 0.3, 0.2],
            vec![0.35, 0.3, 0.35],
        ]);
        assert_eq!(choose_alr_ref(&x).unwrap(), 1);

        // parts 1 and 3 identical: tie goes to the lowest index
        let tie = m(&[
            vec![0.3, 0.4, 0.3],
            vec![0.25, 0.5, 0.25],
            vec![0.35, 0.3, 0.35],
        ]);
        assert_eq!(choose_alr_ref(&tie).unwrap(), 0);
    }

    #[test]
    fn alr_reference_matches_variance_scan() {
        let values = DMatrix::from_fn(10, 4, |i, j| {
            1.0 + ((i * 7 + j * 13) % 11) as f64 * (j as f64 + 1.0) + 0.1 * i as f64
        });
        let x = CompositionMatrix::from_values(values).unwrap();
        let closed = x.close_rows().unwrap();
        let variances: Vec<f64> = (0..4)
            .map(|j| {
                let logs: Vec<f64> = (0..10).map(|i| closed.values()[(i, j)].ln()).collect();
                let mean = logs.iter().sum::<f64>() / 10.0;
                logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / 9.0
            })
            .collect();
        let expected = (0..4)
            .min_by(|&a, &b| variances[a].partial_cmp(&variances[b]).unwrap())
            .unwrap();
        assert_eq!(choose_alr_ref(&x).unwrap(), expected);
    }

    #[test]
    fn clr_values() {
        let x = m(&[vec![0.2, 0.3, 0.5], vec![0.25, 0.25, 0.5]]);
        let t = clr(&x).unwrap();
        assert_row(&t.values, 0, &[-0.4406, -0.0351, 0.4757], 5e-5);
        let u = clr(&m(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]])).unwrap();
        assert_row(&u.values, 0, &[0.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn box_cox_cases() {
        assert_eq!(box_cox(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(box_cox(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(box_cox(4.0, 0.5).unwrap(), 2.0);
        assert_abs_diff_eq!(
            box_cox(std::f64::consts::E, 1e-6).unwrap(),
            1.0,
            epsilon = 1e-5
        );
        assert!(box_cox(0.0, 0.0).is_err());
        assert_eq!(box_cox(0.0, 0.5).unwrap(), -2.0);
        assert!(box_cox(-1.0, 0.5).is_err());
    }

    #[test]
    fn chipower_at_one_is_chi_square_standardization() {
        let x = m(&[vec![0.5, 0.5], vec![0.25, 0.75]]);
        let t = chipower(&x, 1.0).unwrap();
        assert_row(&t.values, 0, &[0.8165, 0.6325], 5e-5);
        assert_row(&t.values, 1, &[0.4082, 0.9487], 5e-5);
        let means = t.column_means_used.unwrap();
        assert_abs_diff_eq!(means[0], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(means[1], 0.625, epsilon = 1e-15);
    }

    #[test]
    fn chipower_square_root_by_hand() {
        // two identical rows so the column means equal the row itself
        let x = m(&[vec![0.25, 0.75], vec![0.25, 0.75]]);
        let t = chipower(&x, 0.5).unwrap();
        let means = t.column_means_used.as_ref().unwrap();
        assert_abs_diff_eq!(means[0], 0.3660, epsilon = 5e-5);
        assert_abs_diff_eq!(means[1], 0.6340, epsilon = 5e-5);
        assert_row(&t.values, 0, &[1.2100, 1.5924], 1e-4);
    }

    #[test]
    fn chipower_keeps_zeros_and_rejects_empty_parts() {
        let x = m(&[
            vec![0.0, 0.4, 0.6],
            vec![0.3, 0.0, 0.7],
            vec![0.2, 0.2, 0.6],
        ]);
        for lambda in [1.0, 0.5, 0.1, 1e-4] {
            let t = chipower(&x, lambda).unwrap();
            assert_eq!(t.values[(0, 0)], 0.0);
            assert_eq!(t.values[(1, 1)], 0.0);
        }
        let empty = m(&[vec![0.0, 0.4, 0.6], vec![0.0, 0.5, 0.5]]);
        match chipower(&empty, 0.5) {
            Err(CodaError::ZeroColumn { part }) => assert_eq!(part, "P1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(chipower(&x, 0.0).is_err());
        assert!(chipower(&x, 1.5).is_err());
    }

    #[test]
    fn power_only_values() {
        let x = m(&[vec![0.25, 0.75], vec![0.0, 1.0]]);
        let t = power_only(&x, 0.28).unwrap();
        // 0.25^0.28 = 0.678302..., 0.75^0.28 = 0.922608...
        assert_row(&t.values, 0, &[0.6783, 0.9226], 5e-5);
        assert_eq!(t.values[(1, 0)], 0.0);
        let same = power_only(&x, 1.0).unwrap();
        assert_eq!(&same.values, x.close_rows().unwrap().values());
    }

    fn positive_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CompositionMatrix> {
        proptest::collection::vec(0.05f64..20.0, rows * cols).prop_map(move |v| {
            CompositionMatrix::from_values(DMatrix::from_row_slice(rows, cols, &v)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn clr_rows_sum_to_zero_and_reproduce_lrs(x in positive_matrix(5, 6)) {
            let c = clr(&x).unwrap();
            for row in c.values.row_iter() {
                prop_assert!(row.sum().abs() <= 1e-10);
            }
            let lr = pairwise_lr(&x).unwrap();
            let mut col = 0;
            for j in 0..6 {
                for k in j + 1..6 {
                    for i in 0..5 {
                        let diff = c.values[(i, j)] - c.values[(i, k)];
                        prop_assert!((diff - lr.values[(i, col)]).abs() <= 1e-12);
                    }
                    col += 1;
                }
            }
        }

        #[test]
        fn alr_is_subcompositionally_coherent(x in positive_matrix(4, 6)) {
            let parts = [0, 2, 3, 5];
            let full = alr(&x, 3).unwrap();
            let sub = alr(&x.subcomposition(&parts).unwrap(), 2).unwrap();
            // sub numerators: parts 0, 2, 5 -> full columns 0, 2, 4
            for (sc, fc) in [(0, 0), (1, 2), (2, 4)] {
                for i in 0..4 {
                    prop_assert!((sub.values[(i, sc)] - full.values[(i, fc)]).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn chipower_absorbs_row_scale(
            x in positive_matrix(4, 5),
            scales in proptest::collection::vec(0.1f64..50.0, 4),
            lambda in 0.05f64..1.0,
        ) {
            let scaled = nalgebra::DMatrix::from_fn(4, 5, |i, j| x.values()[(i, j)] * scales[i]);
            let y = CompositionMatrix::from_values(scaled).unwrap();
            let a = chipower(&x, lambda).unwrap();
            let b = chipower(&y, lambda).unwrap();
            for (u, v) in a.values.iter().zip(b.values.iter()) {
                prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0));
            }
        }
    }
}
