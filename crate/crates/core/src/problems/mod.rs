//! Built-in objective oracles with exact gradients and known reference values.

mod finite_max;

pub use finite_max::{
    eval_finite_max, FiniteMaxError, FiniteMaxFile, FiniteMaxSpec, Piece, DEFAULT_TIE_TOL,
};

use std::fmt;
use std::path::Path;

use crate::model::{Objective, OracleEval};

/// Lipschitz constant valid on the box `[-half_width, half_width]^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzBound {
    pub half_width: f64,
    pub constant: f64,
}

pub struct Problem {
    pub name: String,
    pub dim: usize,
    oracle: Box<dyn Objective + Send>,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub lipschitz: Option<LipschitzBound>,
    pub start: Vec<f64>,
    /// Outside the locally Lipschitz setting; no convergence claims.
    pub experimental: bool,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("f_star", &self.f_star)
            .finish_non_exhaustive()
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        self.oracle.eval(x)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("unknown problem {0:?}; available: {names}", names = NAMES.join(", "))]
    Unknown(String),
    #[error("problem {name} has fixed dimension {fixed}, got {requested}")]
    FixedDimension {
        name: &'static str,
        fixed: usize,
        requested: usize,
    },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing problem file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    FiniteMax(#[from] FiniteMaxError),
    #[error("{0}")]
    Invalid(String),
}

pub const NAMES: [&str; 6] = ["helou2d", "l1", "maxq", "smooth_quad", "dirlip1d", "sd_stall"];

struct L1 {
    dim: usize,
}

impl Objective for L1 {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        let value: f64 = x.iter().map(|v| v.abs()).sum();
        // As a max over sign patterns, flipping coordinate i changes the
        // piece value by 2|x_i|.
        let band = DEFAULT_TIE_TOL * 2.0 * value;
        if x.iter().any(|v| 2.0 * v.abs() <= band) {
            OracleEval::kink(value)
        } else {
            OracleEval::smooth(value, x.iter().map(|v| v.signum()).collect())
        }
    }
}

struct SmoothQuad {
    dim: usize,
}

impl Objective for SmoothQuad {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        OracleEval::smooth(0.5 * crate::vecops::norm_sq(x), x.to_vec())
    }
}

/// `sqrt(max(0, x)) + 0.05 x²`
struct DirLip;

impl Objective for DirLip {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> OracleEval {
        let v = x[0];
        let value = v.max(0.0).sqrt() + 0.05 * v * v;
        if v > 0.0 {
            OracleEval::smooth(value, vec![0.5 / v.sqrt() + 0.1 * v])
        } else if v < 0.0 {
            OracleEval::smooth(value, vec![0.1 * v])
        } else {
            OracleEval::kink(value)
        }
    }
}

/// `max{0.5w² + 0.1z, w + 0.1z + 1, -w + 0.1z + 1, -0.05z - 50}`.
///
/// Started anywhere in the unit ball about (10, 10) with the bundle reduced
/// to the center gradient, the full Armijo step lands on `w = 0`, where the
/// two middle pieces tie.
pub fn helou() -> Problem {
    let pieces = vec![
        Piece::diagonal(&[1.0, 0.0], vec![0.0, 0.1], 0.0),
        Piece::affine(vec![1.0, 0.1], 1.0),
        Piece::affine(vec![-1.0, 0.1], 1.0),
        Piece::affine(vec![0.0, -0.05], -50.0),
    ];
    let spec = FiniteMaxSpec::new(2, pieces, DEFAULT_TIE_TOL).expect("valid pieces");
    // Minimizer where 0.1z + 1 = -0.05z - 50 at w = 0: z = -340, f = -33.
    Problem {
        name: "helou2d".into(),
        dim: 2,
        oracle: Box::new(spec),
        f_star: Some(-33.0),
        x_star: Some(vec![0.0, -340.0]),
        lipschitz: Some(LipschitzBound {
            half_width: 20.0,
            constant: (20.0f64 * 20.0 + 0.01).sqrt(),
        }),
        start: vec![10.0, 10.0],
        experimental: false,
    }
}

pub fn l1(n: usize) -> Problem {
    Problem {
        name: "l1".into(),
        dim: n,
        oracle: Box::new(L1 { dim: n }),
        f_star: Some(0.0),
        x_star: Some(vec![0.0; n]),
        lipschitz: Some(LipschitzBound {
            half_width: f64::INFINITY,
            constant: (n as f64).sqrt(),
        }),
        start: (0..n).map(|i| if i % 2 == 0 { 0.9 } else { -0.4 }).collect(),
        experimental: false,
    }
}

/// `max_i x_i²`
pub fn maxq(n: usize) -> Problem {
    let pieces = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 2.0;
            Piece::diagonal(&d, vec![0.0; n], 0.0)
        })
        .collect();
    let spec = FiniteMaxSpec::new(n, pieces, DEFAULT_TIE_TOL).expect("valid pieces");
    Problem {
        name: "maxq".into(),
        dim: n,
        oracle: Box::new(spec),
        f_star: Some(0.0),
        x_star: Some(vec![0.0; n]),
        lipschitz: Some(LipschitzBound {
            half_width: 2.0,
            constant: 4.0,
        }),
        start: (0..n)
            .map(|i| {
                let m = (i + 1) as f64 / n as f64;
                if i % 2 == 0 {
                    m
                } else {
                    -m
                }
            })
            .collect(),
        experimental: false,
    }
}

pub fn smooth_quad(n: usize) -> Problem {
    Problem {
        name: "smooth_quad".into(),
        dim: n,
        oracle: Box::new(SmoothQuad { dim: n }),
        f_star: Some(0.0),
        x_star: Some(vec![0.0; n]),
        lipschitz: Some(LipschitzBound {
            half_width: 5.0,
            constant: 5.0 * (n as f64).sqrt(),
        }),
        start: (0..n).map(|i| if i % 2 == 0 { 3.0 } else { 4.0 }).collect(),
        experimental: false,
    }
}

pub fn dirlip1d() -> Problem {
    Problem {
        name: "dirlip1d".into(),
        dim: 1,
        oracle: Box::new(DirLip),
        f_star: Some(0.0),
        x_star: Some(vec![0.0]),
        lipschitz: None,
        start: vec![1.0],
        experimental: true,
    }
}

/// `|x| + 10|y| = max{±x ± 10y}`, started at (2, 0.7123).
///
/// Steepest descent with the Armijo search zigzags across `y = 0` with
/// geometrically shrinking steps and stalls near `x ≈ 1.79`; the sampled
/// bundle sees both sides of the valley.
pub fn sd_stall() -> Problem {
    let pieces = [(1.0, 10.0), (1.0, -10.0), (-1.0, 10.0), (-1.0, -10.0)]
        .iter()
        .map(|&(a, b)| Piece::affine(vec![a, b], 0.0))
        .collect();
    let spec = FiniteMaxSpec::new(2, pieces, DEFAULT_TIE_TOL).expect("valid pieces");
    Problem {
        name: "sd_stall".into(),
        dim: 2,
        oracle: Box::new(spec),
        f_star: Some(0.0),
        x_star: Some(vec![0.0, 0.0]),
        lipschitz: Some(LipschitzBound {
            half_width: f64::INFINITY,
            constant: 101.0f64.sqrt(),
        }),
        start: vec![2.0, 0.7123],
        experimental: false,
    }
}

/// Looks up a built-in problem; `dim` applies to the dimension-generic ones.
pub fn by_name(name: &str, dim: Option<usize>) -> Result<Problem, ProblemError> {
    let fixed = |p: Problem, name: &'static str| match dim {
        Some(d) if d != p.dim => Err(ProblemError::FixedDimension {
            name,
            fixed: p.dim,
            requested: d,
        }),
        _ => Ok(p),
    };
    let n = dim.unwrap_or(2);
    if n == 0 {
        return Err(ProblemError::ZeroDimension);
    }
    match name {
        "helou2d" => fixed(helou(), "helou2d"),
        "l1" => Ok(l1(n)),
        "maxq" => Ok(maxq(n)),
        "smooth_quad" => Ok(smooth_quad(n)),
        "dirlip1d" => fixed(dirlip1d(), "dirlip1d"),
        "sd_stall" => fixed(sd_stall(), "sd_stall"),
        other => Err(ProblemError::Unknown(other.to_string())),
    }
}

/// Every built-in problem, dimension-generic ones at `n`.
pub fn corpus(n: usize) -> Vec<Problem> {
    vec![helou(), l1(n), maxq(n), smooth_quad(n), dirlip1d(), sd_stall()]
}

/// Builds a problem from a parsed finite-max description.
pub fn from_finite_max_file(file: FiniteMaxFile) -> Result<Problem, ProblemError> {
    let tie = file.tie_tol.unwrap_or(DEFAULT_TIE_TOL);
    let spec = FiniteMaxSpec::new(file.dim, file.pieces, tie)?;
    let start = file.start.unwrap_or_else(|| vec![0.0; file.dim]);
    if start.len() != file.dim {
        return Err(ProblemError::Invalid(format!(
            "start has length {}, expected {}",
            start.len(),
            file.dim
        )));
    }
    if let Some(xs) = &file.x_star {
        if xs.len() != file.dim {
            return Err(ProblemError::Invalid("x_star has the wrong length".into()));
        }
    }
    Ok(Problem {
        name: file.name,
        dim: file.dim,
        oracle: Box::new(spec),
        f_star: file.f_star,
        x_star: file.x_star,
        lipschitz: None,
        start,
        experimental: false,
    })
}

pub fn load_finite_max(path: &Path) -> Result<Problem, ProblemError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_finite_max_file(serde_json::from_str(&text)?)
}
