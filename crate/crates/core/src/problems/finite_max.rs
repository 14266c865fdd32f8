//! Pointwise maxima of quadratic pieces with tie-based kink detection.

use serde::{Deserialize, Serialize};

use crate::model::{Objective, OracleEval};
use crate::vecops::dot;

/// `½ x'Qx + b'x + c`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    /// Symmetric `Q`; absent for affine pieces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<Vec<Vec<f64>>>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

impl Piece {
    pub fn affine(linear: Vec<f64>, constant: f64) -> Self {
        Self {
            quadratic: None,
            linear,
            constant,
        }
    }

    pub fn diagonal(diag: &[f64], linear: Vec<f64>, constant: f64) -> Self {
        let n = diag.len();
        let q = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self {
            quadratic: Some(q),
            linear,
            constant,
        }
    }

    /// Value, gradient, and the sum of absolute term magnitudes (the scale
    /// of the rounding error in the value).
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>, f64) {
        let mut grad = self.linear.clone();
        let mut value = dot(&self.linear, x) + self.constant;
        let mut scale: f64 =
            self.linear.iter().zip(x).map(|(b, xi)| (b * xi).abs()).sum::<f64>() + self.constant.abs();
        if let Some(q) = &self.quadratic {
            for (row, gi) in q.iter().zip(grad.iter_mut()) {
                let qx = dot(row, x);
                *gi += qx;
            }
            let quad: f64 = q.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
            value += 0.5 * quad;
            scale += 0.5 * quad.abs();
        }
        (value, grad, scale)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FiniteMaxError {
    #[error("a finite-max function needs at least one piece")]
    NoPieces,
    #[error("piece {piece}: {what}")]
    BadPiece { piece: usize, what: String },
    #[error("tie tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// `max_i piece_i(x)`, flagged nondifferentiable when two or more pieces are
/// within `tie_tol·(|value| + s)` of the max, `s` being the larger of the two
/// pieces' sums of absolute term magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMaxSpec {
    dim: usize,
    pieces: Vec<Piece>,
    tie_tol: f64,
}

pub const DEFAULT_TIE_TOL: f64 = 1e-12;

impl FiniteMaxSpec {
    pub fn new(dim: usize, pieces: Vec<Piece>, tie_tol: f64) -> Result<Self, FiniteMaxError> {
        if pieces.is_empty() {
            return Err(FiniteMaxError::NoPieces);
        }
        if !(tie_tol.is_finite() && tie_tol > 0.0) {
            return Err(FiniteMaxError::BadTolerance(tie_tol));
        }
        for (i, p) in pieces.iter().enumerate() {
            let bad = |what: String| FiniteMaxError::BadPiece { piece: i, what };
            if p.linear.len() != dim {
                return Err(bad(format!(
                    "linear part has length {}, expected {dim}",
                    p.linear.len()
                )));
            }
            if !p.constant.is_finite() || p.linear.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite coefficient".into()));
            }
            if let Some(q) = &p.quadratic {
                if q.len() != dim || q.iter().any(|row| row.len() != dim) {
                    return Err(bad(format!("quadratic part must be {dim}x{dim}")));
                }
                for r in 0..dim {
                    for c in 0..dim {
                        if !q[r][c].is_finite() {
                            return Err(bad("non-finite coefficient".into()));
                        }
                        if q[r][c] != q[c][r] {
                            return Err(bad("quadratic part must be symmetric".into()));
                        }
                    }
                }
            }
        }
        Ok(Self {
            dim,
            pieces,
            tie_tol,
        })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }
}

pub fn eval_finite_max(spec: &FiniteMaxSpec, x: &[f64]) -> OracleEval {
    let evals: Vec<(f64, Vec<f64>, f64)> = spec
        .pieces
        .iter()
        .map(|p| p.value_and_gradient(x))
        .collect();
    let (best, value) = evals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, (v, _, _))| {
            if *v > acc.1 {
                (i, *v)
            } else {
                acc
            }
        });
    // Each comparison uses the rounding scale of the two pieces involved, so
    // a large but inactive piece does not widen the band.
    let top = evals[best].2;
    let near = evals
        .iter()
        .filter(|(v, _, s)| value - v <= spec.tie_tol * (value.abs() + top.max(*s)))
        .count();
    if near >= 2 {
        OracleEval::kink(value)
    } else {
        OracleEval::smooth(value, evals[best].1.clone())
    }
}

impl Objective for FiniteMaxSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        eval_finite_max(self, x)
    }
}

/// On-disk description of a custom finite-max problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMaxFile {
    pub name: String,
    pub dim: usize,
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub tie_tol: Option<f64>,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub f_star: Option<f64>,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
}
