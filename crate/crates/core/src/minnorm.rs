//! Minimum-norm element of the convex hull of a gradient bundle.
//!
//! Equivalently, the dual QP `min ½|Gλ|² s.t. 1'λ = 1, λ ≥ 0`, whose
//! solution `g = Gλ` gives the primal direction `d = -g`. Solved with
//! Wolfe's min-norm-point iteration: a corral of affinely independent
//! columns whose affine minimizer is kept inside the simplex by minor
//! cycles, grown by the most violating column in major cycles.

use nalgebra::{DMatrix, DVector};

use crate::vecops::{dot, norm, norm_sq};

/// Where a bundle column came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnOrigin {
    /// Gradient at the current iterate.
    Center,
    /// Fresh sample drawn this iteration.
    Sample,
    /// Gradient re-used from an earlier iteration.
    Cached,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientBundle {
    columns: Vec<Vec<f64>>,
    origins: Vec<ColumnOrigin>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("gradient bundle is empty")]
    Empty,
    #[error("column {column} has length {got}, expected {expected}")]
    DimensionMismatch {
        column: usize,
        expected: usize,
        got: usize,
    },
    #[error("column {0} has a non-finite entry")]
    NonFinite(usize),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("warm start: {0}")]
    InvalidWarmStart(String),
    #[error("min-norm iteration stalled after {iterations} steps with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
}

impl GradientBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bundle whose columns are all tagged as fresh samples.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let origins = vec![ColumnOrigin::Sample; columns.len()];
        Self { columns, origins }
    }

    pub fn push(&mut self, column: Vec<f64>, origin: ColumnOrigin) {
        self.columns.push(column);
        self.origins.push(origin);
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn origins(&self) -> &[ColumnOrigin] {
        &self.origins
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn max_norm(&self) -> f64 {
        self.columns.iter().map(|c| norm(c)).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.columns.first().ok_or(QpError::Empty)?.len();
        for (i, c) in self.columns.iter().enumerate() {
            if c.len() != n {
                return Err(QpError::DimensionMismatch {
                    column: i,
                    expected: n,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(QpError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// `Gλ`
    pub fn combine(&self, lambda: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (c, &w) in self.columns.iter().zip(lambda) {
            if w != 0.0 {
                for (gi, ci) in g.iter_mut().zip(c) {
                    *gi += w * ci;
                }
            }
        }
        g
    }

    /// `½|Gλ|²`
    pub fn objective(&self, lambda: &[f64]) -> f64 {
        0.5 * norm_sq(&self.combine(lambda))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinNormSolution {
    pub g: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `max_v (|g|² - v'g)`, clamped at zero.
    pub residual: f64,
    pub iterations: usize,
}

/// Default certificate tolerance for a bundle: `base * max|v|²`, so that
/// the test is invariant under rescaling of the gradients.
pub fn scaled_tolerance(bundle: &GradientBundle, base: f64) -> f64 {
    let s = bundle.max_norm();
    (base * s * s).max(f64::MIN_POSITIVE)
}

/// Checks the projection certificate `v'g ≥ |g|² - tol` for every column.
///
/// Returns whether it holds and the column with the smallest `v'g`
/// (lowest index on ties).
pub fn check_optimality(bundle: &GradientBundle, g: &[f64], tol: f64) -> (bool, usize) {
    let gg = norm_sq(g);
    let (worst, gap) = bundle
        .columns
        .iter()
        .enumerate()
        .map(|(i, v)| (i, dot(v, g) - gg))
        .fold((0, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        });
    (gap >= -tol, worst)
}

/// Appends `p` zero weights; the result is feasible for a bundle grown by
/// `p` columns and has the same objective.
pub fn warm_start_augment(lambda: &[f64], p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(lambda.len() + p);
    out.extend_from_slice(lambda);
    out.resize(lambda.len() + p, 0.0);
    out
}

fn residual_of(bundle: &GradientBundle, x: &[f64]) -> (f64, usize, f64) {
    let xx = norm_sq(x);
    let mut worst = 0;
    let mut worst_val = f64::INFINITY;
    for (i, v) in bundle.columns.iter().enumerate() {
        let d = dot(v, x);
        if d < worst_val {
            worst_val = d;
            worst = i;
        }
    }
    ((xx - worst_val).max(0.0), worst, worst_val)
}

/// Affine combination weights of the point of minimum norm in the affine
/// hull of `cols`.
fn affine_minimizer(cols: &[&[f64]]) -> Vec<f64> {
    let s = cols.len();
    if s == 1 {
        return vec![1.0];
    }
    let n = cols[0].len();
    let base = cols[0];
    let d = DMatrix::from_fn(n, s - 1, |r, c| cols[c + 1][r] - base[r]);
    let rhs = DVector::from_iterator(n, base.iter().map(|v| -v));
    let svd = d.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = (smax * 1e-12).max(f64::MIN_POSITIVE);
    let beta = svd
        .solve(&rhs, cutoff)
        .unwrap_or_else(|_| DVector::zeros(s - 1));
    let mut alpha = Vec::with_capacity(s);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter());
    alpha
}

/// Minimum-norm point of `conv(columns)`.
///
/// `warm`, when given, must be simplex weights over the bundle columns; its
/// support seeds the corral. The returned `g` does not depend on the warm
/// start beyond `tol`.
pub fn min_norm_point(
    bundle: &GradientBundle,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<MinNormSolution, QpError> {
    bundle.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(QpError::InvalidTolerance(tol));
    }
    let cols = &bundle.columns;
    let ncols = cols.len();

    let (mut support, mut weights): (Vec<usize>, Vec<f64>) = match warm {
        Some(w) => {
            if w.len() != ncols {
                return Err(QpError::InvalidWarmStart(format!(
                    "length {} does not match {} columns",
                    w.len(),
                    ncols
                )));
            }
            let sum: f64 = w.iter().sum();
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(QpError::InvalidWarmStart(
                    "weights must lie on the simplex".into(),
                ));
            }
            w.iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .map(|(i, v)| (i, v / sum))
                .unzip()
        }
        None => {
            let start = cols
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, c)| {
                    let nn = norm_sq(c);
                    if nn < best.1 {
                        (i, nn)
                    } else {
                        best
                    }
                })
                .0;
            (vec![start], vec![1.0])
        }
    };

    let cap = 100 * ncols.max(1);
    let mut iterations = 0;
    let mut polished = false;

    loop {
        let lambda = expand(&support, &weights, ncols);
        let x = bundle.combine(&lambda);
        let (residual, _, _) = residual_of(bundle, &x);
        if residual <= tol {
            break;
        }

        // Most violating column outside the corral.
        let xx = norm_sq(&x);
        let entering = cols
            .iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(i, v)| (i, dot(v, &x)))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 <= cur.1 => Some(b),
                _ => Some(cur),
            });
        match entering {
            Some((j, vx)) if xx - vx > tol => {
                support.push(j);
                weights.push(0.0);
                polished = false;
            }
            _ => {
                // Only corral members violate: the corral weights drifted
                // from the affine minimizer. Re-solve once before giving up.
                if polished {
                    return Err(QpError::NotConverged {
                        iterations,
                        residual,
                    });
                }
                polished = true;
            }
        }

        // Minor cycles: move toward the affine minimizer of the corral,
        // dropping columns whose weight reaches zero.
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(QpError::NotConverged {
                    iterations,
                    residual,
                });
            }
            let members: Vec<&[f64]> = support.iter().map(|&i| cols[i].as_slice()).collect();
            let alpha = affine_minimizer(&members);
            if alpha.iter().all(|&a| a > 0.0) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0;
            let mut blocking = 0;
            for (i, (&w, &a)) in weights.iter().zip(&alpha).enumerate() {
                if a <= 0.0 {
                    let ratio = if w - a > 0.0 { w / (w - a) } else { 0.0 };
                    if ratio < theta {
                        theta = ratio;
                        blocking = i;
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * a;
            }
            weights[blocking] = 0.0;
            let mut k = 0;
            while k < support.len() {
                if weights[k] <= 0.0 {
                    support.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            if support.is_empty() {
                return Err(QpError::NotConverged {
                    iterations,
                    residual,
                });
            }
        }
    }

    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let lambda = expand(&support, &weights, ncols);
    let g = bundle.combine(&lambda);
    let (residual, _, _) = residual_of(bundle, &g);
    Ok(MinNormSolution {
        g,
        lambda,
        residual,
        iterations,
    })
}

fn expand(support: &[usize], weights: &[f64], ncols: usize) -> Vec<f64> {
    let mut lambda = vec![0.0; ncols];
    for (&i, &w) in support.iter().zip(weights) {
        lambda[i] = w;
    }
    lambda
}
