//! Backtracking Armijo search over `t ∈ {1, γ, γ², …}` with an optional
//! summable relaxation and an optional evaluation budget.

use crate::vecops::step;

#[derive(Clone, Debug, PartialEq)]
pub struct LineSearchOutcome {
    pub t: f64,
    pub accepted: bool,
    pub n_evals: usize,
    pub null_step: bool,
    /// Value at the accepted trial point.
    pub f_trial: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LineSearchError {
    #[error("objective is not finite at trial point {point:?} (t = {t:e})")]
    NonFinite { point: Vec<f64>, t: f64 },
}

/// Settings shared by every call within one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoRule {
    pub beta: f64,
    /// First trial step; the search runs over `{t_init, t_init·γ, …}`.
    pub t_init: f64,
    pub gamma: f64,
    pub t_min: f64,
    /// Maximum number of trial evaluations before a null step.
    pub budget: Option<usize>,
}

/// Largest `t` in `{t_init, t_init·γ, …}` with
/// `value_at(x - t·dir) < f_x - β·t·decrease_rate + delta_k`.
///
/// `decrease_rate` is `|g|²` for the plain direction `dir = g`; scaled
/// directions pass their own model decrease. With a budget, exhausting it
/// yields a null step (`t = 0`); without one, dropping below
/// `t_min·t_init` yields `accepted = false`.
pub fn armijo_backtrack<F>(
    mut value_at: F,
    x: &[f64],
    f_x: f64,
    dir: &[f64],
    decrease_rate: f64,
    delta_k: f64,
    rule: &ArmijoRule,
) -> Result<LineSearchOutcome, LineSearchError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut t = rule.t_init;
    let floor = rule.t_min * rule.t_init;
    let mut n_evals = 0;
    loop {
        if let Some(b) = rule.budget {
            if n_evals >= b {
                return Ok(LineSearchOutcome {
                    t: 0.0,
                    accepted: false,
                    n_evals,
                    null_step: true,
                    f_trial: None,
                });
            }
        } else if t < floor {
            return Ok(LineSearchOutcome {
                t: 0.0,
                accepted: false,
                n_evals,
                null_step: false,
                f_trial: None,
            });
        }
        let trial = step(x, t, dir);
        let value = value_at(&trial);
        n_evals += 1;
        if !value.is_finite() {
            return Err(LineSearchError::NonFinite { point: trial, t });
        }
        if value < f_x - rule.beta * t * decrease_rate + delta_k {
            return Ok(LineSearchOutcome {
                t,
                accepted: true,
                n_evals,
                null_step: false,
                f_trial: Some(value),
            });
        }
        t *= rule.gamma;
    }
}

/// `delta0 / (k+1)²`; the series sums to `delta0·π²/6`.
pub fn delta_sequence(k: usize, delta0: f64) -> f64 {
    let d = (k as f64) + 1.0;
    delta0 / (d * d)
}
