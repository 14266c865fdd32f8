//! Seedable uniform sampling from closed Euclidean balls.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a seed and a word position fully determine every
//! emitted point. A point is drawn as `center + radius * U^(1/n) * z/|z|`
//! with `z` standard Gaussian and `U` uniform on `(0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("radius must be finite and nonnegative, got {0}")]
    InvalidRadius(f64),
    #[error("perturbation bound must be finite and positive, got {0}")]
    InvalidBound(f64),
    #[error("center has a non-finite coordinate")]
    NonFiniteCenter,
}

#[derive(Clone, Debug)]
pub struct BallSampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl BallSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Sampler for `seed` resumed at a stream position previously read with
    /// [`BallSampler::position`].
    pub fn at_position(seed: u64, position: u128) -> Self {
        let mut s = Self::new(seed);
        s.rng.set_word_pos(position);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Unit direction from a normalized Gaussian vector.
    fn direction(&mut self, n: usize) -> Vec<f64> {
        loop {
            let z: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
            let len = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 0.0 && len.is_finite() {
                return z.into_iter().map(|v| v / len).collect();
            }
        }
    }

    /// `U^(1/n)` with `U` uniform on `(0, 1]`.
    fn radial_factor(&mut self, n: usize) -> f64 {
        let u = 1.0 - self.rng.gen::<f64>();
        u.powf(1.0 / n as f64)
    }

    fn draw(&mut self, center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        let n = center.len();
        let dir = self.direction(n);
        let r = radius * self.radial_factor(n);
        let y = center.iter().zip(&dir).map(|(c, d)| c + r * d).collect();
        (y, dir)
    }

    /// `count` i.i.d. points uniform on the closed ball `B(center, radius)`.
    pub fn sample_ball(
        &mut self,
        center: &[f64],
        radius: f64,
        count: usize,
    ) -> Result<Vec<Vec<f64>>, SamplerError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(SamplerError::InvalidRadius(radius));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(SamplerError::NonFiniteCenter);
        }
        if radius == 0.0 || center.is_empty() {
            return Ok(vec![center.to_vec(); count]);
        }
        Ok((0..count)
            .map(|_| {
                let (mut y, _) = self.draw(center, radius);
                pull_inside(&mut y, center, radius);
                y
            })
            .collect())
    }

    /// A point `y != center` with `|y - center| <= bound`, uniform on the
    /// punctured ball.
    ///
    /// When `bound` is below the floating-point spacing at `center`, the
    /// result is the nearest representable neighbour of `center` along the
    /// dominant direction coordinate.
    pub fn perturb_within(
        &mut self,
        center: &[f64],
        bound: f64,
    ) -> Result<Vec<f64>, SamplerError> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(SamplerError::InvalidBound(bound));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(SamplerError::NonFiniteCenter);
        }
        let (mut y, dir) = self.draw(center, bound);
        pull_inside(&mut y, center, bound);
        if y == center {
            let i = dir
                .iter()
                .enumerate()
                .fold(0, |best, (i, d)| if d.abs() > dir[best].abs() { i } else { best });
            y[i] = if dir[i] >= 0.0 {
                y[i].next_up()
            } else {
                y[i].next_down()
            };
        }
        Ok(y)
    }
}

/// A point uniform on the box `[-half_width, half_width]^n`, drawn from
/// ChaCha8 seeded with `seed`. Used for reproducible random starts.
pub fn uniform_box(n: usize, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.gen_range(-half_width..=half_width))
        .collect()
}

/// Rounding can leave a point just outside the ball; shrink it toward the
/// center until contained.
fn pull_inside(y: &mut [f64], center: &[f64], radius: f64) {
    for _ in 0..8 {
        let d = crate::vecops::dist(y, center);
        if d <= radius {
            return;
        }
        let s = radius / d * (1.0 - 4.0 * f64::EPSILON);
        for (yi, ci) in y.iter_mut().zip(center) {
            *yi = ci + (*yi - ci) * s;
        }
    }
}
