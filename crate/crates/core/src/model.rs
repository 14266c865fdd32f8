//! Shared domain types: oracle evaluations, solver parameters, variant
//! switches, iteration records and the termination taxonomy.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::vecops::norm_inf;

/// Result of evaluating a problem oracle at a point.
///
/// A gradient is carried exactly when the objective is differentiable at the
/// point; use [`OracleEval::smooth`] and [`OracleEval::kink`] to build one.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleEval {
    pub value: f64,
    gradient: Option<Vec<f64>>,
}

impl OracleEval {
    /// Evaluation at a point of differentiability.
    pub fn smooth(value: f64, gradient: Vec<f64>) -> Self {
        Self {
            value,
            gradient: Some(gradient),
        }
    }

    /// Evaluation at a point where the objective is not differentiable.
    pub fn kink(value: f64) -> Self {
        Self {
            value,
            gradient: None,
        }
    }

    pub fn differentiable(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self) -> Option<&[f64]> {
        self.gradient.as_deref()
    }

    pub fn into_gradient(self) -> Option<Vec<f64>> {
        self.gradient
    }
}

/// A problem oracle: objective value, gradient when it exists, and a
/// differentiability flag.
///
/// Implementations must be pure functions of the point.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> OracleEval;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        (**self).eval(x)
    }
}

impl<T: Objective + ?Sized + Send> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        (**self).eval(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Step along `-g`.
    Nonnormalized,
    /// Step along `-eps_k * g / |g|`, keeping every trial inside the sampling ball.
    TrustRegion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchMode {
    Monotone,
    /// Armijo test relaxed by a summable sequence `delta0 / (k+1)^2`.
    /// `delta0 = None` resolves to `1e-4 * (1 + |f(x0)|)` at solve start.
    Nonmonotone { delta0: Option<f64> },
    /// At most `max_evals` trial evaluations, then a null step.
    Limited { max_evals: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    FixedM,
    Adaptive { m_min: usize, m_max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    Identity,
    /// Barzilai-Borwein scalar `H_k = alpha_k I`.
    Bb { alpha_min: f64, alpha_max: f64 },
    /// Quasi-Newton matrix with eigenvalues clamped into `[lambda_min, lambda_max]`.
    Matrix { lambda_min: f64, lambda_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NondiffStrategy {
    PerturbIterate,
    PerturbDirection,
    DropCenterGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub direction_mode: DirectionMode,
    pub line_search_mode: LineSearchMode,
    pub sampling_mode: SamplingMode,
    pub reuse_gradients: bool,
    pub scaling_mode: ScalingMode,
    pub nondiff_strategy: NondiffStrategy,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            direction_mode: DirectionMode::Nonnormalized,
            line_search_mode: LineSearchMode::Monotone,
            sampling_mode: SamplingMode::FixedM,
            reuse_gradients: false,
            scaling_mode: ScalingMode::Identity,
            nondiff_strategy: NondiffStrategy::PerturbIterate,
        }
    }
}

/// All inputs of the gradient sampling loop plus variant switches and
/// numerical safeguards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsParams {
    pub epsilon0: f64,
    pub nu0: f64,
    pub sample_size: usize,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon_opt: f64,
    pub nu_opt: f64,
    pub theta_eps: f64,
    pub theta_nu: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub t_min: f64,
    /// Objective values at or below this floor end the run as `Unbounded`.
    #[serde(default = "default_f_floor")]
    pub f_floor: f64,
    /// Base tolerance of the min-norm certificate, scaled per bundle by
    /// `(1 + max column norm)^2`.
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
    /// Test hook: restrict the very first bundle to the center gradient.
    #[serde(default)]
    pub center_only_first_bundle: bool,
    /// Never sample: every bundle is just the center gradient (plain steepest descent).
    #[serde(default)]
    pub center_only_always: bool,
    pub variant: VariantConfig,
}

fn default_f_floor() -> f64 {
    -1e12
}

fn default_qp_tol() -> f64 {
    1e-10
}

/// Budget of a limited line search when none is configured.
pub const DEFAULT_LIMITED_BUDGET: usize = 50;

impl GsParams {
    /// Defaults for a run started at `x0`.
    pub fn for_start(x0: &[f64]) -> Self {
        let n = x0.len();
        Self {
            epsilon0: 0.1 * (1.0 + norm_inf(x0)),
            nu0: 1e-6,
            sample_size: (2 * n).max(n + 1),
            beta: 1e-4,
            gamma: 0.5,
            epsilon_opt: 1e-6,
            nu_opt: 1e-6,
            theta_eps: 0.1,
            theta_nu: 0.1,
            max_iter: 10_000,
            seed: 0,
            t_min: 1e-16,
            f_floor: default_f_floor(),
            qp_tol: default_qp_tol(),
            center_only_first_bundle: false,
            center_only_always: false,
            variant: VariantConfig::default(),
        }
    }

    /// Returns a copy with JSON keys from `overrides` applied on top.
    ///
    /// `variant` may be given partially; keys missing from it keep their
    /// current value.
    pub fn merged_with(&self, overrides: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let mut base = serde_json::to_value(self)?;
        merge_json(&mut base, overrides);
        serde_json::from_value(base)
    }
}

fn merge_json(base: &mut serde_json::Value, patch: &serde_json::Value) {
    use serde_json::Value;
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (key, value) in p {
                let is_variant_key = key == "variant";
                match b.get_mut(key) {
                    Some(slot) if is_variant_key => merge_json(slot, value),
                    _ => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// One violated parameter constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid parameters: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ParamErrors(pub Vec<ParamViolation>);

/// Checks every parameter constraint for a problem of dimension `n`.
///
/// Returns the parameters unchanged when valid, otherwise the full list of
/// violations.
pub fn validate_params(p: &GsParams, n: usize) -> Result<GsParams, ParamErrors> {
    let mut errs = Vec::new();
    let mut bad = |field: &'static str, message: &str| {
        errs.push(ParamViolation {
            field,
            message: message.to_string(),
        })
    };
    let open_unit = |v: f64| v > 0.0 && v < 1.0;
    let half_open_unit = |v: f64| v > 0.0 && v <= 1.0;
    let nonneg = |v: f64| v.is_finite() && v >= 0.0;

    if !(p.epsilon0.is_finite() && p.epsilon0 > 0.0) {
        bad("epsilon0", "epsilon0 must be positive and finite");
    }
    if !nonneg(p.nu0) {
        bad("nu0", "nu0 must be nonnegative");
    }
    if p.variant.sampling_mode == SamplingMode::FixedM && p.sample_size < n + 1 {
        bad("sample_size", "m ≥ n+1 required");
    }
    if p.max_iter == 0 {
        bad("max_iter", "max_iter must be at least 1");
    }
    if !open_unit(p.beta) {
        bad("beta", "beta must lie in (0,1)");
    }
    if !open_unit(p.gamma) {
        bad("gamma", "gamma must lie in (0,1)");
    }
    if !nonneg(p.epsilon_opt) {
        bad("epsilon_opt", "epsilon_opt must be nonnegative");
    }
    if !nonneg(p.nu_opt) {
        bad("nu_opt", "nu_opt must be nonnegative");
    }
    if !half_open_unit(p.theta_eps) {
        bad("theta_eps", "theta_eps must lie in (0,1]");
    }
    if !half_open_unit(p.theta_nu) {
        bad("theta_nu", "theta_nu must lie in (0,1]");
    }
    if !(p.t_min.is_finite() && p.t_min > 0.0) {
        bad("t_min", "t_min must be positive");
    }
    if p.f_floor.is_nan() {
        bad("f_floor", "f_floor must not be NaN");
    }
    if !(p.qp_tol.is_finite() && p.qp_tol > 0.0) {
        bad("qp_tol", "qp_tol must be positive");
    }

    let v = &p.variant;
    match v.line_search_mode {
        LineSearchMode::Monotone => {}
        LineSearchMode::Nonmonotone { delta0 } => {
            if let Some(d) = delta0 {
                if !(d.is_finite() && d > 0.0) {
                    bad("variant.line_search_mode", "delta0 must be positive");
                }
            }
        }
        LineSearchMode::Limited { max_evals } => {
            if max_evals == 0 {
                bad("variant.line_search_mode", "max_evals must be at least 1");
            }
        }
    }
    if let SamplingMode::Adaptive { m_min, m_max } = v.sampling_mode {
        if m_min < 1 {
            bad("variant.sampling_mode", "m_min must be at least 1");
        }
        if m_max < m_min {
            bad("variant.sampling_mode", "m_max must be at least m_min");
        }
    }
    match v.scaling_mode {
        ScalingMode::Identity => {}
        ScalingMode::Bb {
            alpha_min,
            alpha_max,
        } => {
            if !(alpha_min > 0.0 && alpha_max >= alpha_min && alpha_max.is_finite()) {
                bad(
                    "variant.scaling_mode",
                    "bb bounds must satisfy 0 < alpha_min ≤ alpha_max < ∞",
                );
            }
        }
        ScalingMode::Matrix {
            lambda_min,
            lambda_max,
        } => {
            if !(lambda_min > 0.0 && lambda_max >= lambda_min && lambda_max.is_finite()) {
                bad(
                    "variant.scaling_mode",
                    "matrix bounds must satisfy 0 < lambda_min ≤ lambda_max < ∞",
                );
            }
        }
    }
    if v.nondiff_strategy == NondiffStrategy::DropCenterGradient
        && !matches!(v.line_search_mode, LineSearchMode::Nonmonotone { .. })
    {
        bad(
            "variant.nondiff_strategy",
            "drop_center_gradient requires a nonmonotone line search",
        );
    }

    if errs.is_empty() {
        Ok(p.clone())
    } else {
        Err(ParamErrors(errs))
    }
}

/// One iteration of the loop: the iterate, its min-norm certificate and the
/// step that was taken from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_x: f64,
    /// `None` only when the center gradient is dropped and `x` is a kink.
    pub grad_x: Option<Vec<f64>>,
    pub epsilon_k: f64,
    pub nu_k: f64,
    pub g_k: Vec<f64>,
    pub g_norm: f64,
    /// Simplex weights of `g_k` over the bundle columns.
    pub lambda: Vec<f64>,
    pub bundle_size: usize,
    /// `min_v (v'g - |g|^2)` over the bundle; nonnegative up to the QP tolerance.
    pub qp_gap: f64,
    /// Largest column norm of the bundle; scales the QP tolerance.
    pub bundle_scale: f64,
    /// Whether `grad_x` is one of the bundle columns.
    pub center_in_bundle: bool,
    /// Accepted step. With isotropic scaling the tentative point is
    /// `x - t_k·g_k`, so trust-region and spectral steps show up as a
    /// rescaled `t_k`.
    pub t_k: f64,
    /// `σ` in `f_next < f_x - β·t_k·σ + delta_k`; `|g_k|^2` unless a full
    /// scaling matrix is active.
    pub decrease_rate: f64,
    pub delta_k: f64,
    pub x_next: Vec<f64>,
    pub f_next: f64,
    /// Point returned by the line search, kept when it had to be perturbed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_tentative: Option<Vec<f64>>,
    pub step_norm: f64,
    /// Radius bound of the differentiability perturbation, zero when none was applied.
    pub perturb_bound: f64,
    pub n_fevals: usize,
    pub n_gevals: usize,
    pub perturbed: bool,
    pub null_step: bool,
    pub line_search_failed: bool,
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    ToleranceMet,
    GradientZero,
    MaxIterations,
    Unbounded,
    LineSearchFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::ToleranceMet => "ToleranceMet",
            SolveStatus::GradientZero => "GradientZero",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::LineSearchFailure => "LineSearchFailure",
        };
        f.write_str(s)
    }
}

/// `(|g|, eps)` at exit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub g_norm: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub certificate: Certificate,
    pub trace: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn total_fevals(&self) -> usize {
        self.trace.iter().map(|r| r.n_fevals).sum()
    }

    pub fn total_gevals(&self) -> usize {
        self.trace.iter().map(|r| r.n_gevals).sum()
    }
}

/// Maps the last record of a run onto the termination taxonomy.
///
/// With a zero stationarity target an exact zero `g` is the only way out
/// and reads as `GradientZero`. Otherwise the tolerance test comes first,
/// then an exact zero `g`, a crossed objective floor and a failed line
/// search; anything else ran out of iterations.
pub fn classify_termination(last: &IterationRecord, p: &GsParams) -> SolveStatus {
    if last.g_norm == 0.0 && p.nu_opt == 0.0 {
        SolveStatus::GradientZero
    } else if last.g_norm <= p.nu_opt && last.epsilon_k <= p.epsilon_opt {
        SolveStatus::ToleranceMet
    } else if last.g_norm == 0.0 {
        SolveStatus::GradientZero
    } else if last.f_next <= p.f_floor {
        SolveStatus::Unbounded
    } else if last.line_search_failed {
        SolveStatus::LineSearchFailure
    } else {
        SolveStatus::MaxIterations
    }
}
