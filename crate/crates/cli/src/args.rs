use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gradsamp::model::{
    DirectionMode, GsParams, LineSearchMode, NondiffStrategy, SamplingMode, ScalingMode,
    DEFAULT_LIMITED_BUDGET,
};

#[derive(Parser, Debug)]
#[command(name = "gradsamp", version, about = "Gradient sampling for nonsmooth minimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one problem and print a summary.
    Solve(SolveArgs),
    /// Run several variants over several seeds and tabulate the results.
    Compare(CompareArgs),
    /// List built-in problems and variant presets.
    List,
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    /// Built-in problem name (see `list`). Not needed with --problem-file.
    pub problem: Option<String>,
    /// Finite-max problem description in JSON.
    #[arg(long)]
    pub problem_file: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma separated start point, `default`, or `random` (uniform in [-1,1]^n).
    #[arg(long, default_value = "default", allow_hyphen_values = true)]
    pub x0: String,
    /// JSON file with parameter overrides, applied before any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the iteration trace as line-delimited JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Variant preset applied before the flags below.
    #[arg(long)]
    pub variant: Option<String>,
    /// Restrict the first bundle to the center gradient.
    #[arg(long)]
    pub force_center_only_bundle: bool,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma separated preset names.
    #[arg(long, default_value = "")]
    pub variants: String,
    /// `a..b` (inclusive) or a comma separated list.
    #[arg(long, default_value = "1..5")]
    pub seeds: String,
    /// Iteration budget per run.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// One CSV row per variant holding medians over seeds (the default).
    #[arg(long, conflicts_with = "per_seed")]
    pub median: bool,
    /// One CSV row per (variant, seed).
    #[arg(long)]
    pub per_seed: bool,
    /// Directory receiving one trace file per run.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DirectionArg {
    Nonnormalized,
    #[value(name = "trust_region", alias = "trust-region")]
    TrustRegion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LineSearchArg {
    Monotone,
    Nonmonotone,
    Limited,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplingArg {
    #[value(name = "fixed_m", alias = "fixed-m")]
    FixedM,
    Adaptive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScalingArg {
    Identity,
    Bb,
    Matrix,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NondiffArg {
    #[value(name = "perturb_iterate", alias = "perturb-iterate")]
    PerturbIterate,
    #[value(name = "perturb_direction", alias = "perturb-direction")]
    PerturbDirection,
    #[value(name = "drop_center_gradient", alias = "drop-center-gradient")]
    DropCenterGradient,
}

/// Parameter overrides, one flag per parameter field.
#[derive(Args, Debug, Default)]
pub struct ParamFlags {
    #[arg(long)]
    pub epsilon0: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon_opt: Option<f64>,
    #[arg(long)]
    pub nu_opt: Option<f64>,
    #[arg(long)]
    pub theta_eps: Option<f64>,
    #[arg(long)]
    pub theta_nu: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub f_floor: Option<f64>,
    #[arg(long)]
    pub qp_tol: Option<f64>,
    /// Plain steepest descent: never sample.
    #[arg(long)]
    pub center_only_always: bool,
    #[arg(long, value_enum)]
    pub direction_mode: Option<DirectionArg>,
    #[arg(long, value_enum)]
    pub line_search_mode: Option<LineSearchArg>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long, value_enum)]
    pub sampling_mode: Option<SamplingArg>,
    #[arg(long)]
    pub m_min: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub reuse_gradients: bool,
    #[arg(long, value_enum)]
    pub scaling_mode: Option<ScalingArg>,
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long, value_enum)]
    pub nondiff_strategy: Option<NondiffArg>,
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl ParamFlags {
    /// Applies the given flags to `p`. Sub-parameters such as `--delta0`
    /// need their mode to be active, either from a flag or from `p`.
    pub fn apply(&self, p: &mut GsParams) -> Result<(), String> {
        set(&mut p.epsilon0, self.epsilon0);
        set(&mut p.nu0, self.nu0);
        set(&mut p.sample_size, self.sample_size);
        set(&mut p.beta, self.beta);
        set(&mut p.gamma, self.gamma);
        set(&mut p.epsilon_opt, self.epsilon_opt);
        set(&mut p.nu_opt, self.nu_opt);
        set(&mut p.theta_eps, self.theta_eps);
        set(&mut p.theta_nu, self.theta_nu);
        set(&mut p.max_iter, self.max_iter);
        set(&mut p.t_min, self.t_min);
        set(&mut p.f_floor, self.f_floor);
        set(&mut p.qp_tol, self.qp_tol);
        p.center_only_always |= self.center_only_always;

        let v = &mut p.variant;
        if let Some(d) = self.direction_mode {
            v.direction_mode = match d {
                DirectionArg::Nonnormalized => DirectionMode::Nonnormalized,
                DirectionArg::TrustRegion => DirectionMode::TrustRegion,
            };
        }
        v.reuse_gradients |= self.reuse_gradients;
        if let Some(s) = self.nondiff_strategy {
            v.nondiff_strategy = match s {
                NondiffArg::PerturbIterate => NondiffStrategy::PerturbIterate,
                NondiffArg::PerturbDirection => NondiffStrategy::PerturbDirection,
                NondiffArg::DropCenterGradient => NondiffStrategy::DropCenterGradient,
            };
        }

        match self.line_search_mode {
            Some(LineSearchArg::Monotone) => v.line_search_mode = LineSearchMode::Monotone,
            Some(LineSearchArg::Nonmonotone) => {
                v.line_search_mode = LineSearchMode::Nonmonotone { delta0: None }
            }
            Some(LineSearchArg::Limited) => {
                v.line_search_mode = LineSearchMode::Limited {
                    max_evals: DEFAULT_LIMITED_BUDGET,
                }
            }
            None => {}
        }
        if let Some(d) = self.delta0 {
            match &mut v.line_search_mode {
                LineSearchMode::Nonmonotone { delta0 } => *delta0 = Some(d),
                _ => return Err("--delta0 needs --line-search-mode nonmonotone".into()),
            }
        }
        if let Some(m) = self.max_evals {
            match &mut v.line_search_mode {
                LineSearchMode::Limited { max_evals } => *max_evals = m,
                _ => return Err("--max-evals needs --line-search-mode limited".into()),
            }
        }

        match self.sampling_mode {
            Some(SamplingArg::FixedM) => v.sampling_mode = SamplingMode::FixedM,
            Some(SamplingArg::Adaptive) if !matches!(v.sampling_mode, SamplingMode::Adaptive { .. }) => {
                v.sampling_mode = SamplingMode::Adaptive { m_min: 2, m_max: 32 }
            }
            _ => {}
        }
        if self.m_min.is_some() || self.m_max.is_some() {
            match &mut v.sampling_mode {
                SamplingMode::Adaptive { m_min, m_max } => {
                    set(m_min, self.m_min);
                    set(m_max, self.m_max);
                }
                SamplingMode::FixedM => {
                    return Err("--m-min/--m-max need --sampling-mode adaptive".into())
                }
            }
        }

        match self.scaling_mode {
            Some(ScalingArg::Identity) => v.scaling_mode = ScalingMode::Identity,
            Some(ScalingArg::Bb) if !matches!(v.scaling_mode, ScalingMode::Bb { .. }) => {
                v.scaling_mode = ScalingMode::Bb {
                    alpha_min: 1e-3,
                    alpha_max: 1e3,
                }
            }
            Some(ScalingArg::Matrix) if !matches!(v.scaling_mode, ScalingMode::Matrix { .. }) => {
                v.scaling_mode = ScalingMode::Matrix {
                    lambda_min: 1e-3,
                    lambda_max: 1e3,
                }
            }
            _ => {}
        }
        if self.alpha_min.is_some() || self.alpha_max.is_some() {
            match &mut v.scaling_mode {
                ScalingMode::Bb { alpha_min, alpha_max } => {
                    set(alpha_min, self.alpha_min);
                    set(alpha_max, self.alpha_max);
                }
                _ => return Err("--alpha-min/--alpha-max need --scaling-mode bb".into()),
            }
        }
        if self.lambda_min.is_some() || self.lambda_max.is_some() {
            match &mut v.scaling_mode {
                ScalingMode::Matrix {
                    lambda_min,
                    lambda_max,
                } => {
                    set(lambda_min, self.lambda_min);
                    set(lambda_max, self.lambda_max);
                }
                _ => return Err("--lambda-min/--lambda-max need --scaling-mode matrix".into()),
            }
        }
        Ok(())
    }
}

/// Parses `a..b` (inclusive), `a,b,c` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let bad = || format!("bad seed list {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Result<Vec<u64>, _> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse())
        .collect();
    let seeds = seeds.map_err(|_| bad())?;
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(seeds)
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad coordinate {t:?} in --x0"))
        })
        .collect()
}
