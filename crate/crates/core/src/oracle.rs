//! Brute-force reference computations, independent of the solver path.

use rayon::prelude::*;

use crate::minnorm::GradientBundle;
use crate::model::Objective;
use crate::vecops::norm_sq;

pub const MAX_GRID_COLUMNS: usize = 6;
pub const DEFAULT_RESOLUTION: usize = 200;
const REFINE_FACTOR: usize = 10;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("grid search supports at most {MAX_GRID_COLUMNS} columns, got {0}")]
    TooManyColumns(usize),
    #[error("bundle is empty")]
    Empty,
    #[error("resolution must be at least 1")]
    ZeroResolution,
    #[error("stencil around {x:?} hits a nondifferentiable point at every step size down to {h:e}")]
    Stencil { x: Vec<f64>, h: f64 },
}

/// Best point of `½|Gλ|²` over the integer grid `λ = counts / denom` restricted
/// to `lo[i] ≤ counts[i] ≤ hi[i]` for all but the last column, whose count is
/// whatever remains.
fn grid_search(cols: &[Vec<f64>], denom: usize, lo: &[usize], hi: &[usize]) -> (f64, Vec<usize>) {
    let c = cols.len();
    let n = cols[0].len();
    let scaled: Vec<Vec<f64>> = cols
        .iter()
        .map(|v| v.iter().map(|x| x / denom as f64).collect())
        .collect();

    fn recurse(
        scaled: &[Vec<f64>],
        i: usize,
        remaining: usize,
        partial: &mut Vec<f64>,
        counts: &mut Vec<usize>,
        lo: &[usize],
        hi: &[usize],
        best: &mut (f64, Vec<usize>),
    ) {
        let c = scaled.len();
        if i == c - 1 {
            let r = remaining as f64;
            let obj: f64 = partial
                .iter()
                .zip(&scaled[i])
                .map(|(p, v)| {
                    let g = p + r * v;
                    g * g
                })
                .sum::<f64>()
                * 0.5;
            if obj < best.0 {
                counts[i] = remaining;
                *best = (obj, counts.clone());
            }
            return;
        }
        let from = lo[i];
        let to = hi[i].min(remaining);
        if from > to {
            return;
        }
        if i == c - 2 {
            // The last two counts are (k, remaining - k), and the objective
            // is a convex quadratic in k; its grid minimizer is one of the
            // two integers around the vertex.
            let r = remaining as f64;
            let q: Vec<f64> = partial.iter().zip(&scaled[c - 1]).map(|(p, b)| p + r * b).collect();
            let d: Vec<f64> = scaled[i].iter().zip(&scaled[c - 1]).map(|(a, b)| a - b).collect();
            let dd: f64 = d.iter().map(|v| v * v).sum();
            let vertex = if dd > 0.0 {
                -q.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / dd
            } else {
                from as f64
            };
            let clamp = |v: f64| (v.max(from as f64).min(to as f64)) as usize;
            let lo_k = clamp(vertex.floor());
            let hi_k = clamp(vertex.ceil());
            for k in [lo_k, hi_k] {
                let kf = k as f64;
                let obj: f64 = q
                    .iter()
                    .zip(&d)
                    .map(|(a, b)| {
                        let g = a + kf * b;
                        g * g
                    })
                    .sum::<f64>()
                    * 0.5;
                if obj < best.0 {
                    counts[i] = k;
                    counts[c - 1] = remaining - k;
                    *best = (obj, counts.clone());
                }
            }
            return;
        }
        for k in from..=to {
            counts[i] = k;
            let kf = k as f64;
            for (p, v) in partial.iter_mut().zip(&scaled[i]) {
                *p += kf * v;
            }
            recurse(scaled, i + 1, remaining - k, partial, counts, lo, hi, best);
            for (p, v) in partial.iter_mut().zip(&scaled[i]) {
                *p -= kf * v;
            }
        }
    }

    if c == 1 {
        return (0.5 * norm_sq(&cols[0]), vec![denom]);
    }
    let first_to = hi[0].min(denom);
    (lo[0]..=first_to)
        .into_par_iter()
        .map(|k0| {
            let mut partial: Vec<f64> = scaled[0].iter().map(|v| k0 as f64 * v).collect();
            let mut counts = vec![0; c];
            counts[0] = k0;
            let mut best = (f64::INFINITY, vec![0; c]);
            recurse(
                &scaled,
                1,
                denom - k0,
                &mut partial,
                &mut counts,
                lo,
                hi,
                &mut best,
            );
            debug_assert_eq!(partial.len(), n);
            best
        })
        .reduce(
            || (f64::INFINITY, vec![0; c]),
            |a, b| {
                // Deterministic tie-break: lexicographically smaller counts.
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        )
}

/// Minimum-norm point of the hull by exhaustive search over the simplex grid
/// with denominator `resolution`, then one pass on a 10× finer grid within
/// one coarse cell of the winner.
pub fn brute_force_min_norm(
    bundle: &GradientBundle,
    resolution: usize,
) -> Result<Vec<f64>, OracleError> {
    let cols = bundle.columns();
    if cols.is_empty() {
        return Err(OracleError::Empty);
    }
    if cols.len() > MAX_GRID_COLUMNS {
        return Err(OracleError::TooManyColumns(cols.len()));
    }
    if resolution == 0 {
        return Err(OracleError::ZeroResolution);
    }
    let c = cols.len();
    let (_, coarse) = grid_search(cols, resolution, &vec![0; c], &vec![resolution; c]);

    let fine = resolution * REFINE_FACTOR;
    let lo: Vec<usize> = coarse
        .iter()
        .map(|&k| (k * REFINE_FACTOR).saturating_sub(REFINE_FACTOR))
        .collect();
    let hi: Vec<usize> = coarse
        .iter()
        .map(|&k| (k * REFINE_FACTOR + REFINE_FACTOR).min(fine))
        .collect();
    let (_, counts) = grid_search(cols, fine, &lo, &hi);
    let lambda: Vec<f64> = counts.iter().map(|&k| k as f64 / fine as f64).collect();
    Ok(bundle.combine(&lambda))
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
///
/// When a stencil point is nondifferentiable the step is divided by 10, at
/// most three times.
pub fn fd_gradient<O: Objective + ?Sized>(
    oracle: &O,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, OracleError> {
    let mut h = h;
    for _ in 0..=3 {
        if let Some(g) = try_stencil(oracle, x, h) {
            return Ok(g);
        }
        h /= 10.0;
    }
    Err(OracleError::Stencil {
        x: x.to_vec(),
        h: h * 10.0,
    })
}

fn try_stencil<O: Objective + ?Sized>(oracle: &O, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = oracle.eval(&probe);
        probe[i] = x[i] - h;
        let down = oracle.eval(&probe);
        probe[i] = x[i];
        if !(up.differentiable() && down.differentiable()) {
            return None;
        }
        g.push((up.value - down.value) / (2.0 * h));
    }
    Some(g)
}
