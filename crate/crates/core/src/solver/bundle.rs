//! Gradient cache for re-use across iterations and the adaptive sample-size
//! controller.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::vecops::dist;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedGradient {
    pub point: Vec<f64>,
    pub gradient: Vec<f64>,
}

/// Bounded FIFO of gradients at previously visited points.
#[derive(Clone, Debug, Default)]
pub struct GradientCache {
    entries: VecDeque<CachedGradient>,
    cap: usize,
}

impl GradientCache {
    pub fn with_capacity(cap: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(cap),
            cap,
        }
    }

    pub fn push(&mut self, point: Vec<f64>, gradient: Vec<f64>) {
        if self.cap == 0 {
            return;
        }
        while self.entries.len() >= self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(CachedGradient { point, gradient });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn iter(&self) -> impl Iterator<Item = &CachedGradient> {
        self.entries.iter()
    }
}

/// Cached pairs whose point lies in the closed ball `B(x, epsilon_k)`.
pub fn reuse_cached_gradients<'a, I>(cache: I, x: &[f64], epsilon_k: f64) -> Vec<&'a CachedGradient>
where
    I: IntoIterator<Item = &'a CachedGradient>,
{
    cache
        .into_iter()
        .filter(|c| dist(&c.point, x) <= epsilon_k)
        .collect()
}

/// How the previous iteration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Null,
    /// Radius and target reduction, no move.
    Reduced,
}

/// Fresh-sample count for the next iteration.
pub fn adaptive_sample_count(
    k: usize,
    previous: StepOutcome,
    previous_count: usize,
    m_min: usize,
    m_max: usize,
) -> usize {
    if k == 0 {
        return m_min;
    }
    match previous {
        StepOutcome::Null => (2 * previous_count.max(1)).min(m_max).max(m_min),
        StepOutcome::Accepted | StepOutcome::Reduced => m_min,
    }
}
