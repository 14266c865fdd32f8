//! Search directions: plain, trust-region normalized, and second-order
//! scalings with safeguarded curvature.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::minnorm::{min_norm_point, scaled_tolerance, GradientBundle, QpError};
use crate::model::{DirectionMode, ScalingMode};
use crate::vecops::{dot, norm};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DirectionError {
    #[error("trust-region direction is undefined for g = 0")]
    ZeroTrustRegion,
    #[error("matrix is not symmetric (entry ({0}, {1}))")]
    NotSymmetric(usize, usize),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("invalid eigenvalue interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("scaling matrix lost positive definiteness")]
    NotPositiveDefinite,
}

/// Current curvature model `H_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum Scaling {
    Identity,
    /// `H_k = alpha I`
    Scalar(f64),
    Matrix(DMatrix<f64>),
}

impl Scaling {
    pub fn initial(mode: &ScalingMode, n: usize) -> Self {
        match mode {
            ScalingMode::Identity => Scaling::Identity,
            ScalingMode::Bb {
                alpha_min,
                alpha_max,
            } => Scaling::Scalar(1.0f64.clamp(*alpha_min, *alpha_max)),
            ScalingMode::Matrix {
                lambda_min,
                lambda_max,
            } => {
                let d = 1.0f64.clamp(*lambda_min, *lambda_max);
                Scaling::Matrix(DMatrix::identity(n, n) * d)
            }
        }
    }

    /// `H^{-1} v`
    fn solve(&self, v: &[f64]) -> Result<Vec<f64>, DirectionError> {
        match self {
            Scaling::Identity => Ok(v.to_vec()),
            Scaling::Scalar(a) => Ok(v.iter().map(|x| x / a).collect()),
            Scaling::Matrix(h) => {
                let chol = h
                    .clone()
                    .cholesky()
                    .ok_or(DirectionError::NotPositiveDefinite)?;
                Ok(chol
                    .solve(&DVector::from_column_slice(v))
                    .iter()
                    .copied()
                    .collect())
            }
        }
    }
}

/// Direction `d` from the min-norm element `g`.
///
/// `-H^{-1} g` in nonnormalized mode; rescaled to length `epsilon_k` in
/// trust-region mode.
pub fn compute_direction(
    g: &[f64],
    epsilon_k: f64,
    scaling: &Scaling,
    mode: DirectionMode,
) -> Result<Vec<f64>, DirectionError> {
    let s = scaling.solve(g)?;
    match mode {
        DirectionMode::Nonnormalized => Ok(s.iter().map(|v| -v).collect()),
        DirectionMode::TrustRegion => {
            let len = norm(&s);
            if len == 0.0 {
                return Err(DirectionError::ZeroTrustRegion);
            }
            Ok(s.iter().map(|v| -epsilon_k * v / len).collect())
        }
    }
}

/// Scalar `c` with `d = -c·g` for the isotropic scalings; `None` for a
/// full matrix.
pub fn step_multiplier(
    g_norm: f64,
    epsilon_k: f64,
    scaling: &Scaling,
    mode: DirectionMode,
) -> Result<Option<f64>, DirectionError> {
    let c = match (mode, scaling) {
        (_, Scaling::Matrix(_)) => return Ok(None),
        (DirectionMode::TrustRegion, _) => {
            if g_norm == 0.0 {
                return Err(DirectionError::ZeroTrustRegion);
            }
            epsilon_k / g_norm
        }
        (DirectionMode::Nonnormalized, Scaling::Identity) => 1.0,
        (DirectionMode::Nonnormalized, Scaling::Scalar(a)) => 1.0 / a,
    };
    Ok(Some(c))
}

/// `s'y / s's` clamped into `[alpha_min, alpha_max]`, or 1 when the pair
/// carries no usable curvature.
pub fn bb_alpha(s: &[f64], y: &[f64], alpha_min: f64, alpha_max: f64) -> f64 {
    let ss = dot(s, s);
    let sy = dot(s, y);
    if ss == 0.0 || sy <= 0.0 || !sy.is_finite() {
        return 1.0;
    }
    (sy / ss).clamp(alpha_min, alpha_max)
}

/// Clamps the eigenvalues of a symmetric `h` into `[lambda_min, lambda_max]`.
pub fn safeguard_matrix(
    h: &DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
) -> Result<DMatrix<f64>, DirectionError> {
    if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
        return Err(DirectionError::BadInterval(lambda_min, lambda_max));
    }
    let (r, c) = h.shape();
    if r != c {
        return Err(DirectionError::NotSquare(r, c));
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let a = h[(i, j)];
            let b = h[(j, i)];
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(DirectionError::NotSymmetric(i, j));
            }
        }
    }
    let eig = SymmetricEigen::new(h.clone());
    let clamped = eig.eigenvalues.map(|v| v.clamp(lambda_min, lambda_max));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    // Symmetrize away rounding.
    Ok((&out + out.transpose()) * 0.5)
}

/// BFGS update of a Hessian model; skipped when `s'y` is not safely positive.
pub fn bfgs_update(h: &DMatrix<f64>, s: &[f64], y: &[f64]) -> DMatrix<f64> {
    let sv = DVector::from_column_slice(s);
    let yv = DVector::from_column_slice(y);
    let sy = sv.dot(&yv);
    let hs = h * &sv;
    let shs = sv.dot(&hs);
    if sy <= 1e-12 * sv.norm() * yv.norm() || shs <= 0.0 || !sy.is_finite() {
        return h.clone();
    }
    h - (&hs * hs.transpose()) / shs + (&yv * yv.transpose()) / sy
}

/// Min-norm element of the bundle in the `H^{-1}` metric: the `g = Gλ`
/// minimizing `g' H^{-1} g`. For this `g`, `d = -H^{-1} g` minimizes the
/// model `max_v v'd + ½ d'Hd`.
pub fn metric_min_norm(
    bundle: &GradientBundle,
    h: &DMatrix<f64>,
    base_tol: f64,
) -> Result<Vec<f64>, MetricError> {
    let chol = h
        .clone()
        .cholesky()
        .ok_or(MetricError::Direction(DirectionError::NotPositiveDefinite))?;
    let l = chol.l();
    let cols: Vec<Vec<f64>> = bundle
        .columns()
        .iter()
        .map(|v| {
            let u = l
                .solve_lower_triangular(&DVector::from_column_slice(v))
                .expect("cholesky factor is nonsingular");
            u.iter().copied().collect()
        })
        .collect();
    let transformed = GradientBundle::from_columns(cols);
    let tol = scaled_tolerance(&transformed, base_tol);
    let sol = min_norm_point(&transformed, tol, None)?;
    Ok(bundle.combine(&sol.lambda))
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn plain_direction_flips_sign() {
        let d = compute_direction(&[3.0, 4.0], 0.5, &Scaling::Identity, DirectionMode::Nonnormalized)
            .unwrap();
        assert_eq!(d, vec![-3.0, -4.0]);
    }

    #[test]
    fn trust_region_has_radius_length() {
        let d = compute_direction(&[3.0, 4.0], 0.5, &Scaling::Identity, DirectionMode::TrustRegion)
            .unwrap();
        assert!(close(&d, &[-0.3, -0.4]));
        assert_eq!(
            compute_direction(&[0.0, 0.0], 0.5, &Scaling::Identity, DirectionMode::TrustRegion),
            Err(DirectionError::ZeroTrustRegion)
        );
    }

    #[test]
    fn bb_direction_divides_by_alpha() {
        let mode = ScalingMode::Bb {
            alpha_min: 1e-3,
            alpha_max: 1e3,
        };
        let ScalingMode::Bb { alpha_min, alpha_max } = mode else {
            unreachable!()
        };
        let alpha = 4.0f64.clamp(alpha_min, alpha_max);
        let d = compute_direction(&[2.0, 0.0], 1.0, &Scaling::Scalar(alpha), DirectionMode::Nonnormalized)
            .unwrap();
        assert_eq!(d, vec![-0.5, 0.0]);
    }

    #[test]
    fn multiplier_matches_direction() {
        let g = [3.0, 4.0];
        for (mode, sc) in [
            (DirectionMode::Nonnormalized, Scaling::Identity),
            (DirectionMode::Nonnormalized, Scaling::Scalar(4.0)),
            (DirectionMode::TrustRegion, Scaling::Identity),
            (DirectionMode::TrustRegion, Scaling::Scalar(4.0)),
        ] {
            let c = step_multiplier(5.0, 0.5, &sc, mode).unwrap().unwrap();
            let d = compute_direction(&g, 0.5, &sc, mode).unwrap();
            assert!(close(&d, &[-c * 3.0, -c * 4.0]));
        }
    }

    #[test]
    fn bb_alpha_examples() {
        assert_eq!(bb_alpha(&[1.0, 0.0], &[2.0, 0.0], 1e-3, 1e3), 2.0);
        assert_eq!(bb_alpha(&[0.0, 0.0], &[5.0, 1.0], 1e-3, 1e3), 1.0);
        assert_eq!(bb_alpha(&[1.0, 0.0], &[-1.0, 0.0], 1e-3, 1e3), 1.0);
        assert_eq!(bb_alpha(&[1.0, 0.0], &[1e6, 0.0], 1e-3, 1e3), 1e3);
    }

    #[test]
    fn safeguard_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((safeguard_matrix(&i2, 0.1, 10.0).unwrap() - &i2).abs().max() < 1e-15);

        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![0.01, 5.0]));
        let out = safeguard_matrix(&h, 0.1, 10.0).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 5.0]));
        assert!((out - want).abs().max() < 1e-14);

        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        let out = safeguard_matrix(&h, 0.1, 10.0).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 1.0]));
        assert!((out - want).abs().max() < 1e-14);
    }

    #[test]
    fn safeguard_rejects_asymmetric() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(
            safeguard_matrix(&h, 0.1, 10.0),
            Err(DirectionError::NotSymmetric(0, 1))
        );
    }

    #[test]
    fn metric_min_norm_is_descent_for_every_column() {
        let bundle = GradientBundle::from_columns(vec![
            vec![1.0, 0.3],
            vec![-0.2, 1.0],
            vec![0.5, 0.5],
        ]);
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 0.5]);
        let g = metric_min_norm(&bundle, &h, 1e-12).unwrap();
        let d = compute_direction(&g, 1.0, &Scaling::Matrix(h), DirectionMode::Nonnormalized).unwrap();
        let model_decrease = -dot(&g, &d);
        for v in bundle.columns() {
            assert!(dot(v, &d) <= -model_decrease + 1e-10);
        }
    }

    #[test]
    fn bfgs_keeps_secant_condition() {
        let h = DMatrix::<f64>::identity(2, 2);
        let s = [1.0, 0.5];
        let y = [2.0, 0.3];
        let h1 = bfgs_update(&h, &s, &y);
        let hs = &h1 * DVector::from_column_slice(&s);
        assert!(close(hs.as_slice(), &y));
        // Negative curvature pair leaves the model untouched.
        assert_eq!(bfgs_update(&h, &s, &[-1.0, 0.0]), h);
    }

    proptest::proptest! {
        #[test]
        fn safeguard_spectrum_in_interval(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let h = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            let out = safeguard_matrix(&h, 0.1, 3.0).unwrap();
            let ev = SymmetricEigen::new(out.clone()).eigenvalues;
            for v in ev.iter() {
                proptest::prop_assert!(*v >= 0.1 - 1e-12 && *v <= 3.0 + 1e-12);
            }
            proptest::prop_assert!((out[(0, 1)] - out[(1, 0)]).abs() < 1e-15);
        }
    }
}
