//! Keeping iterates at points of differentiability.

use crate::model::{Objective, OracleEval};
use crate::sampler::{BallSampler, SamplerError};
use crate::vecops::{dist, dot, norm};

pub const MAX_PERTURB_ATTEMPTS: usize = 50;
const SHRINK: f64 = 0.1;
const DIRECTION_RETRIES: usize = 5;
const BACKTRACK_STEPS: usize = 60;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NondiffError {
    #[error("no differentiable point with sufficient decrease found near {tentative:?} after {attempts} attempts")]
    Exhausted { tentative: Vec<f64>, attempts: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub x: Vec<f64>,
    pub eval: OracleEval,
    /// Oracle calls spent.
    pub attempts: usize,
}

/// Replaces a nondifferentiable tentative iterate by a nearby differentiable
/// point `y` with `f(y) < threshold` and `|y - tentative| ≤ bound`.
///
/// `bound` is `min{t, ε}·|g|` and `threshold` is the Armijo right-hand side.
/// Tries perturbations of radius `bound`, `0.1·bound`, … up to 50 times.
/// When those fail and `origin` (the current iterate) is given, walks back
/// along the segment from the tentative point toward `origin`, halving the
/// step each time. Near a kink in floating point the admissible set can be a
/// sliver that random draws almost never hit, while a shorter step along the
/// same direction usually lands in it.
pub fn handle_nondifferentiable<O: Objective + ?Sized>(
    objective: &O,
    sampler: &mut BallSampler,
    tentative: &[f64],
    origin: Option<&[f64]>,
    bound: f64,
    threshold: f64,
) -> Result<Perturbation, NondiffError> {
    let accept = |e: &OracleEval| e.differentiable() && e.value.is_finite() && e.value < threshold;
    let mut calls = 0;
    let mut radius = bound;
    for _ in 0..MAX_PERTURB_ATTEMPTS {
        if !(radius > 0.0) {
            break;
        }
        let y = sampler.perturb_within(tentative, radius)?;
        debug_assert!(dist(&y, tentative) <= bound);
        let e = objective.eval(&y);
        calls += 1;
        if accept(&e) {
            return Ok(Perturbation {
                x: y,
                eval: e,
                attempts: calls,
            });
        }
        radius *= SHRINK;
    }
    if let Some(x) = origin {
        let mut frac = 1.0;
        for _ in 0..BACKTRACK_STEPS {
            frac *= 0.5;
            let y: Vec<f64> = x
                .iter()
                .zip(tentative)
                .map(|(xi, ti)| xi + frac * (ti - xi))
                .collect();
            if y == x {
                break;
            }
            if dist(&y, tentative) > bound {
                continue;
            }
            let e = objective.eval(&y);
            calls += 1;
            if accept(&e) {
                return Ok(Perturbation {
                    x: y,
                    eval: e,
                    attempts: calls,
                });
            }
        }
    }
    Err(NondiffError::Exhausted {
        tentative: tentative.to_vec(),
        attempts: calls,
    })
}

/// Random perturbation of the min-norm vector of size at most
/// `min(1e-8, 0.1|g|)·|g|`, kept only if `center'g̃ ≥ ½|g|²`.
///
/// Falls back to `g` itself after a few shrinking retries.
pub fn perturb_gradient(
    g: &[f64],
    center: Option<&[f64]>,
    sampler: &mut BallSampler,
) -> Result<Vec<f64>, SamplerError> {
    let gn = norm(g);
    let mut radius = 1e-8f64.min(0.1 * gn) * gn;
    let margin = 0.5 * gn * gn;
    for _ in 0..DIRECTION_RETRIES {
        if !(radius > 0.0) {
            break;
        }
        let cand = sampler.perturb_within(g, radius)?;
        let ok = match center {
            Some(c) => dot(c, &cand) >= margin,
            None => dot(g, &cand) >= margin,
        };
        if ok {
            return Ok(cand);
        }
        radius *= SHRINK;
    }
    Ok(g.to_vec())
}
