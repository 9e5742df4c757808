//! SVD kernel and the spectral analyses built on it: PCA of transformed data,
//! correspondence analysis with optional powering, and logratio analysis.
//!
//! Every analysis goes through [`svd`], which sorts singular values in
//! decreasing order and fixes the sign of each singular vector pair so that the
//! largest-magnitude entry of each right singular vector is positive. Results
//! are therefore reproducible run to run.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::composition::CompositionMatrix;
use crate::error::{CodaError, Result};
use crate::transforms::{self, check_lambda, TransformedMatrix};

/// Singular values at or below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }
}

fn numerical_rank(sv: &[f64]) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().take_while(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Thin SVD `A = U diag(d) Vᵀ` with `min(I, J)` components.
///
/// Computed by one-sided Jacobi rotations, which keeps small singular values
/// accurate to working precision even when `A` is rank deficient. Singular
/// values are sorted in decreasing order and each column of `V` is signed so
/// that its largest-magnitude entry is positive.
pub fn svd(a: &DMatrix<f64>) -> Result<SvdResult> {
    for (k, v) in a.iter().enumerate() {
        if !v.is_finite() {
            return Err(CodaError::NonFinite {
                row: k % a.nrows(),
                column: k / a.nrows(),
            });
        }
    }
    let (rows, cols) = a.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(SvdResult {
            u: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        });
    }
    // Work on the tall orientation and swap the factors back at the end.
    let wide = rows < cols;
    let (left, sv, right) = if wide {
        jacobi_tall(&a.transpose())?
    } else {
        jacobi_tall(a)?
    };
    let (u, v) = if wide { (right, left) } else { (left, right) };

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]).then(x.cmp(&y)));

    let mut out_u = DMatrix::zeros(rows, r);
    let mut out_v = DMatrix::zeros(cols, r);
    let mut values = Vec::with_capacity(r);
    for (k, &src) in order.iter().enumerate() {
        let v_col = v.column(src);
        let mut pivot = 0;
        for j in 1..cols {
            if v_col[j].abs() > v_col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if v_col[pivot] < 0.0 { -1.0 } else { 1.0 };
        out_v.set_column(k, &(v_col * sign));
        out_u.set_column(k, &(u.column(src) * sign));
        values.push(sv[src]);
    }
    Ok(SvdResult {
        u: out_u,
        singular_values: values,
        v: out_v,
    })
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi for `m >= n`: returns unsorted `(U, d, V)`.
fn jacobi_tall(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let scale = a.amax();
    if scale == 0.0 {
        let u = complete_basis(DMatrix::zeros(m, n), &vec![false; n]);
        return Ok((u, vec![0.0; n], DMatrix::identity(n, n)));
    }
    // Scaling guards the squared norms against overflow and underflow.
    let mut w = a / scale;
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    // Pairs count as orthogonal at the rounding level of an m-term dot
    // product; columns below the rounding level of the whole matrix are
    // treated as null and never rotated.
    let tol = eps * m as f64;
    let negligible = (eps * w.norm()).powi(2);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let data = w.as_slice();
                    let (cp, cq) = (&data[p * m..(p + 1) * m], &data[q * m..(q + 1) * m]);
                    cp.iter()
                        .zip(cq)
                        .fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| {
                            (a + x * x, b + y * y, g + x * y)
                        })
                };
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CodaError::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }
    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let cutoff = max * eps * m.max(n) as f64;
    let mut keep = vec![false; n];
    for j in 0..n {
        if norms[j] > cutoff {
            let unit = w.column(j) / norms[j];
            w.set_column(j, &unit);
            keep[j] = true;
        }
    }
    let u = complete_basis(w, &keep);
    Ok((u, norms.iter().map(|d| d * scale).collect(), v))
}

fn rotate(x: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let m = x.nrows();
    // storage is column-major and p < q
    let (head, tail) = x.as_mut_slice().split_at_mut(q * m);
    let xp = &mut head[p * m..(p + 1) * m];
    let xq = &mut tail[..m];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (u, v) = (*a, *b);
        *a = c * u - s * v;
        *b = s * u + c * v;
    }
}

/// Replaces the columns not marked `keep` with unit vectors orthogonal to all
/// others, built by Gram-Schmidt from the standard basis.
fn complete_basis(mut u: DMatrix<f64>, keep: &[bool]) -> DMatrix<f64> {
    let m = u.nrows();
    let mut filled: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    let mut candidate = 0;
    for (j, &kept) in keep.iter().enumerate() {
        if kept {
            continue;
        }
        loop {
            assert!(
                candidate < m,
                "orthonormal completion ran out of basis vectors"
            );
            let mut e = nalgebra::DVector::<f64>::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = u.column(k).dot(&e);
                    e -= u.column(k) * proj;
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                u.set_column(j, &(e / norm));
                filled.push(j);
                break;
            }
        }
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Method {
    Pca,
    Ca,
    CaPower { lambda: f64 },
    Lra,
}

/// Principal coordinates of rows and columns plus the decomposition of the
/// total variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub row_principal: DMatrix<f64>,
    pub col_principal: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub total_variance: f64,
    pub method: Method,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
}

/// JSON-friendly summary of a [`SpectralResult`].
#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub method: Method,
    pub lambda: Option<f64>,
    pub singular_values: Vec<f64>,
    pub principal_variances: Vec<f64>,
    pub total_variance: f64,
    pub rank: usize,
}

impl SpectralResult {
    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    fn dims(&self, dims: Option<usize>) -> usize {
        dims.map_or(self.rank(), |d| d.min(self.rank()))
    }

    /// Row principal coordinates on the first `dims` dimensions, or on all
    /// positive dimensions when `dims` is `None`.
    pub fn row_coordinates(&self, dims: Option<usize>) -> DMatrix<f64> {
        self.row_principal.columns(0, self.dims(dims)).into_owned()
    }

    pub fn col_coordinates(&self, dims: Option<usize>) -> DMatrix<f64> {
        self.col_principal.columns(0, self.dims(dims)).into_owned()
    }

    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            method: self.method,
            lambda: match self.method {
                Method::CaPower { lambda } => Some(lambda),
                Method::Ca => Some(1.0),
                _ => None,
            },
            singular_values: self.singular_values.clone(),
            principal_variances: self.singular_values.iter().map(|s| s * s).collect(),
            total_variance: self.total_variance,
            rank: self.rank(),
        }
    }
}

fn center_columns(values: &DMatrix<f64>) -> DMatrix<f64> {
    let mut centered = values.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    centered
}

/// PCA of an arbitrary samples × variables matrix.
///
/// Decomposes `I^{-1/2} Z_c = U D Vᵀ` of the column-centred matrix and returns
/// `F = √I U D`, `G = V D`; squared singular values are variances (denominator I).
pub fn pca_values(
    values: &DMatrix<f64>,
    method: Method,
    row_labels: Vec<String>,
    column_labels: Vec<String>,
) -> Result<SpectralResult> {
    let n = values.nrows();
    if n < 2 {
        return Err(CodaError::TooSmall {
            rows: n,
            cols: values.ncols(),
            min_rows: 2,
            min_cols: 1,
        });
    }
    let scaled = center_columns(values) / (n as f64).sqrt();
    let dec = svd(&scaled)?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dec.singular_values.clone()));
    let row_principal = &dec.u * &d * (n as f64).sqrt();
    let col_principal = &dec.v * &d;
    let total_variance = dec.singular_values.iter().map(|s| s * s).sum();
    Ok(SpectralResult {
        row_principal,
        col_principal,
        singular_values: dec.singular_values,
        total_variance,
        method,
        row_labels,
        column_labels,
    })
}

pub fn pca(z: &TransformedMatrix) -> Result<SpectralResult> {
    pca_values(
        &z.values,
        Method::Pca,
        z.row_labels.clone(),
        z.descriptor.column_names.clone(),
    )
}

/// Unweighted logratio analysis: PCA of the CLRs with equal part weights `1/J`,
/// i.e. of `clr(M) / √J`.
///
/// With this weighting the coordinates coincide with the `λ → 0` limit of
/// [`ca`] and [`pca`] of [`transforms::chipower`], and the total variance is
/// [`total_logratio_variance`].
pub fn lra(m: &CompositionMatrix) -> Result<SpectralResult> {
    let c = transforms::clr(m)?;
    let scaled = c.values / (m.nparts() as f64).sqrt();
    pca_values(
        &scaled,
        Method::Lra,
        m.row_labels().to_vec(),
        m.part_labels().to_vec(),
    )
}

/// Correspondence analysis of the row-closed, `λ`-powered matrix.
///
/// Decomposes `D_r^{-1/2}(P - r cᵀ)D_c^{-1/2}`, multiplies the singular values
/// by `1/λ`, and returns `F = D_r^{-1/2} U D`, `G = D_c^{-1/2} V D`.
pub fn ca(n: &CompositionMatrix, lambda: f64) -> Result<SpectralResult> {
    check_lambda(lambda)?;
    let y = transforms::power_and_close(n, lambda)?;
    let (rows, cols) = y.shape();
    let grand: f64 = y.sum();
    let p = &y / grand;
    let r: Vec<f64> = p.row_iter().map(|row| row.sum()).collect();
    let c: Vec<f64> = p.column_iter().map(|col| col.sum()).collect();
    for (j, &cj) in c.iter().enumerate() {
        if cj <= 0.0 {
            return Err(CodaError::ZeroColumn {
                part: n.part_labels()[j].clone(),
            });
        }
    }
    let s = DMatrix::from_fn(rows, cols, |i, j| {
        (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt()
    });
    let dec = svd(&s)?;
    let k = dec.singular_values.len();
    let singular_values: Vec<f64> = dec.singular_values.iter().map(|s| s / lambda).collect();
    let row_principal = DMatrix::from_fn(rows, k, |i, d| {
        dec.u[(i, d)] * singular_values[d] / r[i].sqrt()
    });
    let col_principal = DMatrix::from_fn(cols, k, |j, d| {
        dec.v[(j, d)] * singular_values[d] / c[j].sqrt()
    });
    let total_variance = singular_values.iter().map(|s| s * s).sum();
    Ok(SpectralResult {
        row_principal,
        col_principal,
        singular_values,
        total_variance,
        method: if lambda == 1.0 {
            Method::Ca
        } else {
            Method::CaPower { lambda }
        },
        row_labels: n.row_labels().to_vec(),
        column_labels: n.part_labels().to_vec(),
    })
}

/// Sum of squared (reported) singular values of a CA result.
pub fn total_inertia(s: &SpectralResult) -> Result<f64> {
    match s.method {
        Method::Ca | Method::CaPower { .. } => Ok(s.total_variance),
        other => Err(CodaError::InvalidArgument(format!(
            "total inertia is defined for CA results, got {other:?}"
        ))),
    }
}

/// Total variance of the CLRs with equal part weights:
/// `(1/(I J)) Σ_i Σ_j (clr_ij - mean_j)²`. Equals `lra(M).total_variance`.
pub fn total_logratio_variance(m: &CompositionMatrix) -> Result<f64> {
    let c = transforms::clr(m)?;
    let centered = center_columns(&c.values);
    Ok(centered.iter().map(|v| v * v).sum::<f64>() / (m.nrows() * m.nparts()) as f64)
}

/// Symmetric matrix of Euclidean distances between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl DistanceMatrix {
    /// Euclidean distances between the rows of `points`.
    pub fn from_rows(points: &DMatrix<f64>, labels: Vec<String>) -> Self {
        let n = points.nrows();
        let mut values = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in i + 1..n {
                let d = (points.row(i) - points.row(k)).norm();
                values[(i, k)] = d;
                values[(k, i)] = d;
            }
        }
        DistanceMatrix { values, labels }
    }

    /// Wraps a precomputed matrix, checking symmetry, sign and zero diagonal.
    pub fn from_matrix(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n || labels.len() != n {
            return Err(CodaError::DimensionMismatch {
                expected: "square distance matrix with one label per row".into(),
                found: format!("{}x{} with {} labels", n, values.ncols(), labels.len()),
            });
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(CodaError::InvalidArgument(format!(
                    "distance matrix has nonzero diagonal at {i}"
                )));
            }
            for k in 0..n {
                let v = values[(i, k)];
                if v < 0.0 || v != values[(k, i)] {
                    return Err(CodaError::InvalidArgument(format!(
                        "distance matrix is negative or asymmetric at ({i}, {k})"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { values, labels })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[(i, k)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Upper-triangle entries `(i, k, d)` with `i < k`, row by row.
    pub fn upper_triangle(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |k| (i, k)))
            .map(|(i, k)| (i, k, self.values[(i, k)]))
            .collect()
    }
}

/// Euclidean distances between CLR rows.
pub fn logratio_distances(m: &CompositionMatrix) -> Result<DistanceMatrix> {
    let c = transforms::clr(m)?;
    Ok(DistanceMatrix::from_rows(&c.values, c.row_labels))
}

/// Euclidean distances between rows of the chiPower transform.
pub fn chipower_distances(m: &CompositionMatrix, lambda: f64) -> Result<DistanceMatrix> {
    let z = transforms::chipower(m, lambda)?;
    Ok(DistanceMatrix::from_rows(&z.values, z.row_labels))
}

/// Flips columns of `target` so each has nonnegative inner product with the
/// matching column of `reference`. Both must have the same shape.
pub fn align_column_signs(reference: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = target.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        if k < reference.ncols() && reference.column(k).dot(&col) < 0.0 {
            col.neg_mut();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> CompositionMatrix {
        CompositionMatrix::from_rows(rows).unwrap()
    }

    fn lcg_matrix(rows: usize, cols: usize, seed: u64, lo: f64) -> DMatrix<f64> {
        let mut state = seed;
        DMatrix::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            lo + (state >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    fn max_abs(a: &DMatrix<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn svd_diagonal_and_rank_one() {
        let d = svd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0])).unwrap();
        assert_abs_diff_eq!(d.singular_values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.singular_values[1], 1.0, epsilon = 1e-14);

        let r1 = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let d = svd(&r1).unwrap();
        assert!(d.singular_values[1] <= 1e-12);
        assert_eq!(d.rank(), 1);
    }

    #[test]
    fn svd_reconstructs_and_is_orthonormal() {
        for (rows, cols) in [(7, 5), (5, 7), (6, 6)] {
            let a = lcg_matrix(rows, cols, 17 + rows as u64, -0.5);
            let d = svd(&a).unwrap();
            let diag =
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.singular_values.clone()));
            let rec = &d.u * diag * d.v.transpose();
            assert!((&a - rec).norm() <= 1e-9 * a.norm());
            let k = rows.min(cols);
            assert!(max_abs(&(d.u.transpose() * &d.u - DMatrix::identity(k, k))) < 1e-10);
            assert!(max_abs(&(d.v.transpose() * &d.v - DMatrix::identity(k, k))) < 1e-10);
            assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
            for col in d.v.column_iter() {
                let big = col
                    .iter()
                    .fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
                assert!(big > 0.0);
            }
        }
    }

    #[test]
    fn svd_is_accurate_on_centred_rank_deficient_input() {
        let mut seed = 91;
        for rows in 2..9 {
            for cols in 2..11 {
                seed += 1;
                let mut a = lcg_matrix(rows, cols, seed, 0.0);
                a.iter_mut()
                    .for_each(|v| *v = if *v < 0.3 { 0.05 } else { *v * 10.0 });
                let a = center_columns(&a);
                let d = svd(&a).unwrap();
                let ss: f64 = d.singular_values.iter().map(|s| s * s).sum();
                assert!((ss - a.norm_squared()).abs() <= 1e-13 * a.norm_squared());
                let diag =
                    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.singular_values.clone()));
                assert!((&a - &d.u * diag * d.v.transpose()).norm() <= 1e-13 * a.norm());
                let k = rows.min(cols);
                assert!(max_abs(&(d.u.transpose() * &d.u - DMatrix::identity(k, k))) < 1e-12);
                assert!(d.rank() < rows);
            }
        }
        let zero = svd(&DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(zero.singular_values, vec![0.0, 0.0]);
        assert!(max_abs(&(zero.u.transpose() * &zero.u - DMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn svd_rejects_nan() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(
            svd(&a),
            Err(CodaError::NonFinite { row: 0, column: 1 })
        ));
    }

    #[test]
    fn pca_hand_example() {
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let r = pca_values(
            &z,
            Method::Pca,
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert_abs_diff_eq!(r.singular_values[0], 1.0, epsilon = 1e-14);
        assert!(r.singular_values[1].abs() < 1e-14);
        assert_abs_diff_eq!(r.total_variance, 1.0, epsilon = 1e-14);
        assert_eq!(r.rank(), 1);
        // rows sit at -1 and +1 on the first axis
        assert_abs_diff_eq!(r.row_principal[(0, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pca_identical_rows_has_no_variance() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let r = pca_values(
            &z,
            Method::Pca,
            vec![String::new(); 3],
            vec![String::new(); 2],
        )
        .unwrap();
        assert_eq!(r.total_variance, 0.0);
        assert_eq!(r.rank(), 0);
    }

    #[test]
    fn pca_total_is_sum_of_column_variances() {
        let z = lcg_matrix(9, 4, 3, 0.0);
        let r = pca_values(
            &z,
            Method::Pca,
            vec![String::new(); 9],
            vec![String::new(); 4],
        )
        .unwrap();
        let mut total = 0.0;
        for col in z.column_iter() {
            let mean = col.mean();
            total += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        }
        assert_abs_diff_eq!(r.total_variance, total, epsilon = 1e-10);
    }

    #[test]
    fn lra_basic_cases() {
        let uniform = m(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.5, 1.0, 1.5],
        ]);
        assert!(lra(&uniform).unwrap().total_variance < 1e-28);
        let two = m(&[vec![1.0, 2.0], vec![3.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(lra(&two).unwrap().rank(), 1);
        let x = CompositionMatrix::from_values(lcg_matrix(8, 5, 11, 0.1)).unwrap();
        assert_abs_diff_eq!(
            lra(&x).unwrap().total_variance,
            total_logratio_variance(&x).unwrap(),
            epsilon = 1e-12
        );
        assert!(lra(&x).unwrap().rank() <= 4);
    }

    #[test]
    fn ca_independence_table_has_zero_inertia() {
        let t = m(&[vec![1.0, 3.0], vec![2.0, 6.0]]);
        let r = ca(&t, 1.0).unwrap();
        assert!(total_inertia(&r).unwrap() < 1e-28);
        assert_eq!(r.method, Method::Ca);
        assert!(total_inertia(&lra(&t).unwrap()).is_err());
    }

    #[test]
    fn ca_zero_column_is_an_error() {
        let t = m(&[vec![0.0, 3.0, 1.0], vec![0.0, 6.0, 2.0]]);
        assert!(matches!(ca(&t, 0.5), Err(CodaError::ZeroColumn { .. })));
    }

    #[test]
    fn ca_power_rescales_singular_values() {
        let x = CompositionMatrix::from_values(lcg_matrix(10, 6, 5, 0.05)).unwrap();
        let lambda = 0.5;
        let powered = CompositionMatrix::from_values(x.values().map(|v| v.powf(lambda))).unwrap();
        let a = ca(&x, lambda).unwrap();
        let b = ca(&powered.close_rows().unwrap(), 1.0).unwrap();
        for (s, t) in a.singular_values.iter().zip(&b.singular_values) {
            assert_abs_diff_eq!(*s, t / lambda, epsilon = 1e-12);
        }
    }

    #[test]
    fn ca_equals_pca_of_chipower() {
        let x = CompositionMatrix::from_values(lcg_matrix(12, 5, 21, 0.02)).unwrap();
        for lambda in [1.0, 0.5, 0.25] {
            let a = ca(&x, lambda).unwrap();
            let b = pca(&transforms::chipower(&x, lambda).unwrap()).unwrap();
            let k = a.rank();
            assert_eq!(k, b.rank());
            let fa = a.row_coordinates(None);
            let fb = align_column_signs(&fa, &b.row_coordinates(None));
            assert!(max_abs(&(fa - fb)) < 1e-9);
            for d in 0..k {
                assert_abs_diff_eq!(a.singular_values[d], b.singular_values[d], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn logratio_distance_cases() {
        let x = m(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![3.0, 1.0, 1.0],
        ]);
        let d = logratio_distances(&x).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(2, 0), d.get(0, 2));

        let perm = m(&[
            vec![3.0, 1.0, 2.0],
            vec![6.0, 2.0, 4.0],
            vec![1.0, 3.0, 1.0],
        ]);
        let dp = logratio_distances(&perm).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(d.get(i, k), dp.get(i, k), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn all_pairs_lr_distance_is_sqrt_j_times_clr_distance() {
        let values = lcg_matrix(6, 5, 8, 0.01);
        let x = CompositionMatrix::from_values(values).unwrap();
        let d = logratio_distances(&x).unwrap();
        let lr = transforms::pairwise_lr(&x).unwrap();
        let brute = DistanceMatrix::from_rows(&lr.values, lr.row_labels.clone());
        for (i, k, v) in d.upper_triangle() {
            assert_abs_diff_eq!(brute.get(i, k), 5f64.sqrt() * v, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicated_rows_are_at_zero_chipower_distance() {
        let x = m(&[
            vec![1.0, 0.0, 3.0],
            vec![1.0, 0.0, 3.0],
            vec![0.5, 2.0, 1.0],
        ]);
        for lambda in [1.0, 0.3, 1e-3] {
            assert_eq!(chipower_distances(&x, lambda).unwrap().get(0, 1), 0.0);
        }
    }

    #[test]
    fn distance_matrix_validation() {
        let good = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(DistanceMatrix::from_matrix(good, vec!["a".into(), "b".into()]).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(DistanceMatrix::from_matrix(bad, vec!["a".into(), "b".into()]).is_err());
    }

    proptest! {
        #[test]
        fn distances_satisfy_triangle_inequality(
            data in proptest::collection::vec(0.05f64..10.0, 24),
            lambda in 0.05f64..1.0,
        ) {
            let x = CompositionMatrix::from_values(DMatrix::from_row_slice(6, 4, &data)).unwrap();
            for d in [logratio_distances(&x).unwrap(), chipower_distances(&x, lambda).unwrap()] {
                for i in 0..6 {
                    prop_assert_eq!(d.get(i, i), 0.0);
                    for j in 0..6 {
                        prop_assert_eq!(d.get(i, j), d.get(j, i));
                        for k in 0..6 {
                            prop_assert!(d.get(i, k) <= d.get(i, j) + d.get(j, k) + 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn ca_inertia_ignores_row_scale(
            data in proptest::collection::vec(0.05f64..10.0, 20),
            scales in proptest::collection::vec(0.1f64..100.0, 5),
        ) {
            let x = CompositionMatrix::from_values(DMatrix::from_row_slice(5, 4, &data)).unwrap();
            let y = CompositionMatrix::from_values(DMatrix::from_fn(5, 4, |i, j| data[i * 4 + j] * scales[i])).unwrap();
            let a = ca(&x, 1.0).unwrap().total_variance;
            let b = ca(&y, 1.0).unwrap().total_variance;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-15, "{} vs {}", a, b);
        }
    }
}
