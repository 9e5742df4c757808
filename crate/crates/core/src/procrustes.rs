//! Procrustes matching of two point configurations.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CodaError, Result};
use crate::spectral::svd;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcrustesFit {
    /// Orthogonal matrix taking the normalized second configuration onto the first.
    #[serde(skip)]
    pub rotation: DMatrix<f64>,
    /// Least-squares scale applied after rotation (the trace of the singular values).
    pub scale: f64,
    /// Residual sum of squares between the normalized configurations.
    pub error: f64,
    pub correlation: f64,
    /// (points, dimensions) after zero padding.
    pub dims_used: (usize, usize),
}

fn centered_padded(f: &DMatrix<f64>, width: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(f.nrows(), width);
    for (j, col) in f.column_iter().enumerate() {
        let mean = col.mean();
        out.set_column(j, &col.add_scalar(-mean));
    }
    out
}

/// Fits `F2` to `F1` by translation, rotation (reflections allowed) and scaling.
///
/// Both configurations are column-centred, the narrower one is padded with
/// zero columns, and each is normalized to unit sum of squares giving `F1*`,
/// `F2*`. With `F1*ᵀF2* = U D Vᵀ` the rotation is `Q = V Uᵀ`, the scale is
/// `c = trace(D)`, the error is `E = ‖F1* - c F2* Q‖²` and the Procrustes
/// correlation `r = √(1 - E)`, which equals the Pearson correlation between
/// the vectorized `F1*` and `F2* Q`.
pub fn procrustes_fit(f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> Result<ProcrustesFit> {
    let points = f1.nrows();
    if f2.nrows() != points {
        return Err(CodaError::DimensionMismatch {
            expected: format!("{points} points"),
            found: format!("{} points", f2.nrows()),
        });
    }
    if points < 2 || f1.ncols() == 0 || f2.ncols() == 0 {
        return Err(CodaError::InvalidArgument(
            "Procrustes needs at least 2 points and 1 dimension in each configuration".into(),
        ));
    }
    let width = f1.ncols().max(f2.ncols());
    let a = centered_padded(f1, width);
    let b = centered_padded(f2, width);
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(CodaError::ZeroConfiguration);
    }
    let a = a / na;
    let b = b / nb;

    let cross = a.transpose() * &b;
    let dec = svd(&cross)?;
    let rotation = &dec.v * dec.u.transpose();
    let scale: f64 = dec.singular_values.iter().sum();
    let residual = &a - (&b * &rotation) * scale;
    let error = residual.norm_squared().clamp(0.0, 1.0);
    Ok(ProcrustesFit {
        rotation,
        scale,
        error,
        correlation: (1.0 - error).sqrt(),
        dims_used: (points, width),
    })
}

pub fn procrustes_correlation(f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> Result<f64> {
    procrustes_fit(f1, f2).map(|fit| fit.correlation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn config(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed | 1;
        DMatrix::from_fn(rows, cols, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    fn rotation_2d(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn identical_configurations() {
        let f = config(10, 3, 7);
        let fit = procrustes_fit(&f, &f).unwrap();
        assert_abs_diff_eq!(fit.correlation, 1.0, epsilon = 1e-12);
        assert!(fit.error < 1e-12);
        let q = &fit.rotation;
        assert!((q.transpose() * q - DMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn similarity_transform_is_matched() {
        let f = config(12, 2, 3);
        let g = (&f * rotation_2d(0.7)) * 3.5 + DMatrix::from_element(12, 2, 4.0);
        assert_abs_diff_eq!(
            procrustes_correlation(&f, &g).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        // reflection also allowed
        let mut h = f.clone();
        h.column_mut(0).neg_mut();
        assert_abs_diff_eq!(
            procrustes_correlation(&f, &h).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn narrower_configuration_is_padded() {
        let f = config(8, 3, 5);
        let g = f.columns(0, 2).into_owned();
        let fit = procrustes_fit(&f, &g).unwrap();
        assert_eq!(fit.dims_used, (8, 3));
        assert!(fit.correlation < 1.0 && fit.correlation > 0.0);
    }

    #[test]
    fn errors() {
        let f = config(5, 2, 1);
        assert!(matches!(
            procrustes_fit(&f, &config(6, 2, 1)),
            Err(CodaError::DimensionMismatch { .. })
        ));
        let flat = DMatrix::from_element(5, 2, 3.0);
        assert!(matches!(
            procrustes_fit(&f, &flat),
            Err(CodaError::ZeroConfiguration)
        ));
    }

    #[test]
    fn matches_pearson_of_fitted_configurations() {
        for seed in 0..20u64 {
            let f1 = config(30, 4, 100 + seed);
            let f2 = config(30, 4, 200 + seed);
            let fit = procrustes_fit(&f1, &f2).unwrap();
            let a = centered_padded(&f1, 4);
            let b = centered_padded(&f2, 4);
            let a = &a / a.norm();
            let b = (&b / b.norm()) * &fit.rotation;
            let pearson = crate::stats::pearson(a.as_slice(), b.as_slice());
            assert_abs_diff_eq!(fit.correlation, pearson, epsilon = 1e-10);
            assert!(fit.correlation < 0.9);
            assert_abs_diff_eq!(fit.correlation, (1.0 - fit.error).sqrt(), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_invariant(
            seed in 1u64..10_000,
            theta in 0.0f64..std::f64::consts::TAU,
            scale in 0.01f64..100.0,
            shift in -10.0f64..10.0,
        ) {
            let f1 = config(15, 2, seed);
            let f2 = config(15, 2, seed.wrapping_mul(31) + 7);
            let r = procrustes_correlation(&f1, &f2).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((r - procrustes_correlation(&f2, &f1).unwrap()).abs() <= 1e-10);
            let moved = (&f2 * rotation_2d(theta)) * scale + DMatrix::from_element(15, 2, shift);
            prop_assert!((r - procrustes_correlation(&f1, &moved).unwrap()).abs() <= 1e-10);
        }
    }
}
