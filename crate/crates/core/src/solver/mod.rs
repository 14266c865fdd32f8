//! The gradient sampling loop and its variant hooks.

mod bundle;
mod direction;
mod nondiff;

pub use bundle::{adaptive_sample_count, reuse_cached_gradients, CachedGradient, GradientCache, StepOutcome};
pub use direction::{
    bb_alpha, bfgs_update, compute_direction, metric_min_norm, safeguard_matrix, step_multiplier,
    DirectionError, MetricError, Scaling,
};
pub use nondiff::{handle_nondifferentiable, perturb_gradient, NondiffError, Perturbation, MAX_PERTURB_ATTEMPTS};

use rayon::prelude::*;

use crate::linesearch::{armijo_backtrack, delta_sequence, ArmijoRule, LineSearchError};
use crate::minnorm::{
    min_norm_point, scaled_tolerance, warm_start_augment, ColumnOrigin, GradientBundle, QpError,
};
use crate::model::{
    classify_termination, validate_params, Certificate, DirectionMode, GsParams, IterationRecord,
    LineSearchMode, NondiffStrategy, Objective, OracleEval, ParamErrors, SamplingMode, ScalingMode,
    SolveReport, DEFAULT_LIMITED_BUDGET,
};
use crate::sampler::{BallSampler, SamplerError};
use crate::vecops::{all_finite, dist, dot, norm, sub};

/// Redraws allowed for one sample point that lands on a kink.
pub const SAMPLE_RETRIES: usize = 10;
const START_ATTEMPTS: usize = 50;
/// Cached gradients kept per dimension.
const CACHE_PER_DIM: usize = 5;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamErrors),
    #[error("start has dimension {got}, problem has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("objective is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("no differentiable point found near the start {0:?}")]
    StartNotDifferentiable(Vec<f64>),
    #[error("sample point {0:?} is nondifferentiable after {SAMPLE_RETRIES} redraws")]
    SampleNondifferentiable(Vec<f64>),
    #[error("supplied sample {0:?} is unusable (outside the ball or nondifferentiable)")]
    BadScriptedSample(Vec<f64>),
    #[error("gradient bundle is empty")]
    EmptyBundle,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Direction(#[from] DirectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    LineSearch(#[from] LineSearchError),
    #[error(transparent)]
    Nondiff(#[from] NondiffError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Everything carried from one iteration to the next.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub k: usize,
    pub x: Vec<f64>,
    /// Oracle output at `x`.
    pub eval: OracleEval,
    pub epsilon: f64,
    pub nu: f64,
    pub sampler: BallSampler,
    pub cache: GradientCache,
    pub scaling: Scaling,
    /// Relaxation scale of the nonmonotone test, zero otherwise.
    pub delta0: f64,
    /// Fresh samples requested by the adaptive controller.
    pub sample_count: usize,
    previous: StepOutcome,
    /// Bundle and weights kept across a null step.
    retained: Option<(GradientBundle, Vec<f64>)>,
    last_bundle: Option<GradientBundle>,
    pending_fevals: usize,
    pending_gevals: usize,
}

impl SolverState {
    /// Evaluates the start, moving it by at most `1e-8·(1+|x0|)` when it
    /// sits on a kink.
    pub fn new<O: Objective + ?Sized>(
        objective: &O,
        x0: &[f64],
        p: &GsParams,
    ) -> Result<Self, SolveError> {
        let n = objective.dim();
        if x0.len() != n {
            return Err(SolveError::Dimension {
                expected: n,
                got: x0.len(),
            });
        }
        if !all_finite(x0) {
            return Err(SolveError::NonFinite(x0.to_vec()));
        }
        let mut sampler = BallSampler::new(p.seed);
        let mut x = x0.to_vec();
        let mut eval = objective.eval(x0);
        let mut fevals = 1;
        if !eval.value.is_finite() {
            return Err(SolveError::NonFinite(x0.to_vec()));
        }
        if !eval.differentiable() {
            let bound = 1e-8 * (1.0 + norm(x0));
            let mut found = false;
            for _ in 0..START_ATTEMPTS {
                let y = sampler.perturb_within(x0, bound)?;
                let e = objective.eval(&y);
                fevals += 1;
                if e.differentiable() && e.value.is_finite() {
                    x = y;
                    eval = e;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(SolveError::StartNotDifferentiable(x0.to_vec()));
            }
        }
        let delta0 = match p.variant.line_search_mode {
            LineSearchMode::Nonmonotone { delta0: Some(d) } => d,
            LineSearchMode::Nonmonotone { delta0: None } => 1e-4 * (1.0 + eval.value.abs()),
            _ => 0.0,
        };
        let sample_count = match p.variant.sampling_mode {
            SamplingMode::Adaptive { m_min, .. } => m_min,
            SamplingMode::FixedM => p.sample_size,
        };
        let cache_cap = if p.variant.reuse_gradients {
            CACHE_PER_DIM * n
        } else {
            0
        };
        Ok(Self {
            k: 0,
            x,
            eval,
            epsilon: p.epsilon0,
            nu: p.nu0,
            sampler,
            cache: GradientCache::with_capacity(cache_cap),
            scaling: Scaling::initial(&p.variant.scaling_mode, n),
            delta0,
            sample_count,
            previous: StepOutcome::Accepted,
            retained: None,
            last_bundle: None,
            pending_fevals: fevals,
            pending_gevals: 1,
        })
    }

    fn dim(&self) -> usize {
        self.x.len()
    }

    /// How the last iteration ended.
    pub fn previous_outcome(&self) -> StepOutcome {
        self.previous
    }

    /// Bundle of the most recent iteration.
    pub fn last_bundle(&self) -> Option<&GradientBundle> {
        self.last_bundle.as_ref()
    }

    /// Whether a bundle is being carried over from a null step.
    pub fn has_retained_bundle(&self) -> bool {
        self.retained.is_some()
    }
}

/// One iteration with freshly drawn samples.
pub fn gs_step<O: Objective + ?Sized>(
    state: &mut SolverState,
    p: &GsParams,
    objective: &O,
) -> Result<IterationRecord, SolveError> {
    iterate(state, p, objective, None)
}

/// One iteration with the given sample points in place of random draws.
/// Every point must lie in `B(x, ε)` and be a point of differentiability.
pub fn gs_step_with_samples<O: Objective + ?Sized>(
    state: &mut SolverState,
    p: &GsParams,
    objective: &O,
    samples: &[Vec<f64>],
) -> Result<IterationRecord, SolveError> {
    iterate(state, p, objective, Some(samples))
}

/// Runs the loop from `x0` until a terminal record or `max_iter`.
pub fn solve<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    p: &GsParams,
) -> Result<SolveReport, SolveError> {
    let p = validate_params(p, objective.dim())?;
    let mut state = SolverState::new(objective, x0, &p)?;
    let mut trace = Vec::new();
    for _ in 0..p.max_iter {
        let rec = gs_step(&mut state, &p, objective)?;
        let done = rec.terminal;
        trace.push(rec);
        if done {
            break;
        }
    }
    let last = trace.last().expect("max_iter is at least 1");
    Ok(SolveReport {
        status: classify_termination(last, &p),
        x_final: state.x.clone(),
        f_final: state.eval.value,
        certificate: Certificate {
            g_norm: last.g_norm,
            epsilon: last.epsilon_k,
        },
        trace,
    })
}

type Sample = (Vec<f64>, Vec<f64>);

fn fresh_count(state: &SolverState, p: &GsParams, retained: Option<usize>) -> usize {
    if p.center_only_always || (state.k == 0 && p.center_only_first_bundle) {
        return 0;
    }
    let n = state.dim();
    match p.variant.sampling_mode {
        SamplingMode::FixedM => p.sample_size,
        SamplingMode::Adaptive { .. } => match retained {
            // Top the bundle up to n+1 columns, no further.
            Some(r) if r < n + 1 => state.sample_count.min(n + 1 - r).max(1),
            _ => state.sample_count,
        },
    }
}

fn max_bundle(state: &SolverState, p: &GsParams) -> usize {
    let m = match p.variant.sampling_mode {
        SamplingMode::FixedM => p.sample_size,
        SamplingMode::Adaptive { m_max, .. } => m_max,
    };
    state.dim() + 1 + m + state.cache.capacity()
}

fn draw_samples<O: Objective + ?Sized>(
    state: &mut SolverState,
    objective: &O,
    count: usize,
    gevals: &mut usize,
) -> Result<Vec<Sample>, SolveError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let points = state.sampler.sample_ball(&state.x, state.epsilon, count)?;
    let evals: Vec<OracleEval> = points
        .par_iter()
        .with_min_len(8)
        .map(|y| objective.eval(y))
        .collect();
    *gevals += count;
    let mut out = Vec::with_capacity(count);
    for (mut pt, mut e) in points.into_iter().zip(evals) {
        let mut redraws = 0;
        loop {
            if !e.value.is_finite() {
                return Err(SolveError::NonFinite(pt));
            }
            if let Some(grad) = e.into_gradient() {
                if !all_finite(&grad) {
                    return Err(SolveError::NonFinite(pt));
                }
                out.push((pt, grad));
                break;
            }
            if redraws == SAMPLE_RETRIES {
                return Err(SolveError::SampleNondifferentiable(pt));
            }
            redraws += 1;
            pt = state
                .sampler
                .sample_ball(&state.x, state.epsilon, 1)?
                .pop()
                .expect("one sample requested");
            e = objective.eval(&pt);
            *gevals += 1;
        }
    }
    Ok(out)
}

fn scripted_samples<O: Objective + ?Sized>(
    state: &SolverState,
    objective: &O,
    points: &[Vec<f64>],
    gevals: &mut usize,
) -> Result<Vec<Sample>, SolveError> {
    let mut out = Vec::with_capacity(points.len());
    for pt in points {
        if pt.len() != state.dim() || dist(pt, &state.x) > state.epsilon {
            return Err(SolveError::BadScriptedSample(pt.clone()));
        }
        let e = objective.eval(pt);
        *gevals += 1;
        match e.into_gradient() {
            Some(g) => out.push((pt.clone(), g)),
            None => return Err(SolveError::BadScriptedSample(pt.clone())),
        }
    }
    Ok(out)
}

fn iterate<O: Objective + ?Sized>(
    state: &mut SolverState,
    p: &GsParams,
    objective: &O,
    scripted: Option<&[Vec<f64>]>,
) -> Result<IterationRecord, SolveError> {
    let n = state.dim();
    let k = state.k;
    let eps = state.epsilon;
    let nu = state.nu;
    let variant = &p.variant;
    let strategy = variant.nondiff_strategy;
    let mut fevals = std::mem::take(&mut state.pending_fevals);
    let mut gevals = std::mem::take(&mut state.pending_gevals);

    // (a) samples
    let mut retained = state.retained.take();
    let requested = fresh_count(state, p, retained.as_ref().map(|r| r.0.len()));
    if let Some((b, _)) = &retained {
        if b.len() + requested > max_bundle(state, p) {
            retained = None;
        }
    }
    let fresh = match scripted {
        Some(points) => scripted_samples(state, objective, points, &mut gevals)?,
        None => {
            let count = fresh_count(state, p, retained.as_ref().map(|r| r.0.len()));
            draw_samples(state, objective, count, &mut gevals)?
        }
    };

    // (b) bundle
    let (bundle, warm) = match retained {
        Some((mut b, lambda)) => {
            for (_, grad) in &fresh {
                b.push(grad.clone(), ColumnOrigin::Sample);
            }
            let warm = warm_start_augment(&lambda, fresh.len());
            (b, Some(warm))
        }
        None => {
            let mut b = GradientBundle::new();
            if strategy != NondiffStrategy::DropCenterGradient {
                if let Some(grad) = state.eval.gradient() {
                    b.push(grad.to_vec(), ColumnOrigin::Center);
                }
            }
            if variant.reuse_gradients {
                for c in reuse_cached_gradients(state.cache.iter(), &state.x, eps) {
                    b.push(c.gradient.clone(), ColumnOrigin::Cached);
                }
            }
            for (_, grad) in &fresh {
                b.push(grad.clone(), ColumnOrigin::Sample);
            }
            (b, None)
        }
    };
    if bundle.is_empty() {
        return Err(SolveError::EmptyBundle);
    }
    let center_in_bundle = bundle.origins().contains(&ColumnOrigin::Center);
    state.last_bundle = Some(bundle.clone());

    // (c) min-norm element
    let tol = scaled_tolerance(&bundle, p.qp_tol);
    let sol = min_norm_point(&bundle, tol, warm.as_deref())?;
    let g = sol.g;
    let g_norm = norm(&g);
    let g_sq = g_norm * g_norm;
    let qp_gap = bundle
        .columns()
        .iter()
        .map(|v| dot(v, &g))
        .fold(f64::INFINITY, f64::min)
        - g_sq;

    let f_x = state.eval.value;
    let mut rec = IterationRecord {
        k,
        x: state.x.clone(),
        f_x,
        grad_x: state.eval.gradient().map(|s| s.to_vec()),
        epsilon_k: eps,
        nu_k: nu,
        g_k: g.clone(),
        g_norm,
        lambda: sol.lambda.clone(),
        bundle_size: bundle.len(),
        qp_gap,
        bundle_scale: bundle.max_norm(),
        center_in_bundle,
        t_k: 0.0,
        decrease_rate: g_sq,
        delta_k: 0.0,
        x_next: state.x.clone(),
        f_next: f_x,
        x_tentative: None,
        step_norm: 0.0,
        perturb_bound: 0.0,
        n_fevals: 0,
        n_gevals: 0,
        perturbed: false,
        null_step: false,
        line_search_failed: false,
        terminal: false,
    };

    // (d) termination
    let tolerance_met = g_norm <= p.nu_opt && eps <= p.epsilon_opt;
    if tolerance_met || (g_norm == 0.0 && nu == 0.0) {
        rec.terminal = true;
        rec.n_fevals = fevals;
        rec.n_gevals = gevals;
        state.k += 1;
        return Ok(rec);
    }

    let outcome;
    if g_norm <= nu {
        // (e) radius and target reduction
        state.nu = nu * p.theta_nu;
        state.epsilon = eps * p.theta_eps;
        outcome = StepOutcome::Reduced;
        remember_samples(state, &fresh);
    } else {
        // (f) line search and iterate update
        let delta_k = match variant.line_search_mode {
            LineSearchMode::Nonmonotone { .. } => delta_sequence(k, state.delta0),
            _ => 0.0,
        };
        let adaptive = matches!(variant.sampling_mode, SamplingMode::Adaptive { .. });
        let budget = match variant.line_search_mode {
            LineSearchMode::Limited { max_evals } => Some(max_evals),
            _ if adaptive && bundle.len() < n + 1 => Some(DEFAULT_LIMITED_BUDGET),
            _ => None,
        };
        let (v, t_init, sigma) = search_vector(state, p, &bundle, &g)?;
        rec.decrease_rate = sigma;
        rec.delta_k = delta_k;

        let rule = ArmijoRule {
            beta: p.beta,
            t_init,
            gamma: p.gamma,
            t_min: p.t_min,
            budget,
        };
        let mut last: Option<OracleEval> = None;
        let ls = armijo_backtrack(
            |y| {
                let e = objective.eval(y);
                let val = e.value;
                last = Some(e);
                val
            },
            &state.x,
            f_x,
            &v,
            sigma,
            delta_k,
            &rule,
        )?;
        fevals += ls.n_evals;

        if ls.accepted {
            let t = ls.t;
            let tentative = crate::vecops::step(&state.x, t, &v);
            let e = last.expect("accepted search evaluated a trial point");
            let (x_next, e_next) =
                if strategy == NondiffStrategy::DropCenterGradient || e.differentiable() {
                    (tentative, e)
                } else {
                    let bound = t.min(eps) * norm(&v);
                    let threshold = f_x - p.beta * t * sigma + delta_k;
                    let fix = handle_nondifferentiable(
                        objective,
                        &mut state.sampler,
                        &tentative,
                        Some(&state.x),
                        bound,
                        threshold,
                    )?;
                    fevals += fix.attempts;
                    rec.perturbed = true;
                    rec.perturb_bound = bound;
                    rec.x_tentative = Some(tentative);
                    (fix.x, fix.eval)
                };
            if e_next.differentiable() {
                gevals += 1;
            }
            rec.t_k = t;
            rec.step_norm = dist(&x_next, &state.x);
            rec.x_next = x_next.clone();
            rec.f_next = e_next.value;
            if rec.f_next <= p.f_floor {
                rec.terminal = true;
            }

            update_scaling(state, p, &x_next, &e_next)?;
            remember_samples(state, &fresh);
            if let Some(grad) = state.eval.gradient() {
                let grad = grad.to_vec();
                let x_old = state.x.clone();
                state.cache.push(x_old, grad);
            }
            state.x = x_next;
            state.eval = e_next;
            outcome = StepOutcome::Accepted;
        } else if ls.null_step {
            rec.null_step = true;
            remember_samples(state, &fresh);
            state.retained = Some((bundle, sol.lambda));
            outcome = StepOutcome::Null;
        } else {
            rec.line_search_failed = true;
            rec.terminal = true;
            outcome = StepOutcome::Accepted;
        }
    }

    if let SamplingMode::Adaptive { m_min, m_max } = variant.sampling_mode {
        state.sample_count = adaptive_sample_count(k + 1, outcome, state.sample_count, m_min, m_max);
    }
    state.previous = outcome;
    state.k += 1;
    rec.n_fevals = fevals;
    rec.n_gevals = gevals;
    Ok(rec)
}

/// `(v, t_init, σ)` with trial points `x - t·v`, `t ∈ {t_init, t_init·γ, …}`
/// and Armijo rate `σ`.
fn search_vector(
    state: &mut SolverState,
    p: &GsParams,
    bundle: &GradientBundle,
    g: &[f64],
) -> Result<(Vec<f64>, f64, f64), SolveError> {
    let mode: DirectionMode = p.variant.direction_mode;
    let perturb = p.variant.nondiff_strategy == NondiffStrategy::PerturbDirection;
    let eps = state.epsilon;
    match &state.scaling {
        Scaling::Matrix(h) => {
            let gm = metric_min_norm(bundle, h, p.qp_tol)?;
            let d_clean = compute_direction(&gm, eps, &state.scaling, mode)?;
            let sigma = -dot(&gm, &d_clean);
            let d = if perturb {
                let gp = perturb_gradient(&gm, None, &mut state.sampler)?;
                compute_direction(&gp, eps, &state.scaling, mode)?
            } else {
                d_clean
            };
            Ok((d.iter().map(|v| -v).collect(), 1.0, sigma))
        }
        _ => {
            let gd = if perturb {
                let center = state.eval.gradient().map(|s| s.to_vec());
                perturb_gradient(g, center.as_deref(), &mut state.sampler)?
            } else {
                g.to_vec()
            };
            let c = step_multiplier(norm(&gd), eps, &state.scaling, mode)?
                .expect("isotropic scaling");
            Ok((gd, c, dot(g, g)))
        }
    }
}

fn update_scaling(
    state: &mut SolverState,
    p: &GsParams,
    x_next: &[f64],
    e_next: &OracleEval,
) -> Result<(), SolveError> {
    let (Some(g0), Some(g1)) = (state.eval.gradient(), e_next.gradient()) else {
        return Ok(());
    };
    let s = sub(x_next, &state.x);
    let y = sub(g1, g0);
    match (&mut state.scaling, p.variant.scaling_mode) {
        (Scaling::Scalar(a), ScalingMode::Bb { alpha_min, alpha_max }) => {
            *a = bb_alpha(&s, &y, alpha_min, alpha_max);
        }
        (Scaling::Matrix(h), ScalingMode::Matrix { lambda_min, lambda_max }) => {
            *h = safeguard_matrix(&bfgs_update(h, &s, &y), lambda_min, lambda_max)?;
        }
        _ => {}
    }
    Ok(())
}

fn remember_samples(state: &mut SolverState, fresh: &[Sample]) {
    if state.cache.capacity() == 0 {
        return;
    }
    for (pt, grad) in fresh {
        state.cache.push(pt.clone(), grad.clone());
    }
}
