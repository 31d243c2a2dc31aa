//! Evaluation-point rules and per-epoch visiting orders.
//!
//! An evaluation point is a convex combination of the epoch's iterates
//! `z_{K,0}, .., z_{K,i-1}`. Weights are returned sparse as `(j, lambda_j)`.
//! Random draws come from a counter-based stream keyed by `(K, i)`, so a run
//! replays without storing them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Weights = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvalPointPolicy {
    /// Every direction of the epoch at `x_K`.
    FullGradient,
    /// Each direction at the latest iterate.
    Incremental,
    /// Directions of a batch of `b` consecutive steps share the batch's first iterate.
    MiniBatch { b: usize },
    /// Latest iterate delayed by a seeded draw in `0..=max_delay`, clamped at the epoch start.
    DelayedAsync { max_delay: usize, seed: u64 },
    /// Seeded positive weights over all available iterates.
    ConvexMix { seed: u64 },
}

fn stream_rng(seed: u64, k: usize, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | i as u64);
    rng
}

impl EvalPointPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            EvalPointPolicy::MiniBatch { b: 0 } => Err(Error::invalid("mini-batch size must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EvalPointPolicy::FullGradient => "full_gradient".into(),
            EvalPointPolicy::Incremental => "incremental".into(),
            EvalPointPolicy::MiniBatch { b } => format!("mini_batch({b})"),
            EvalPointPolicy::DelayedAsync { max_delay, .. } => format!("delayed_async({max_delay})"),
            EvalPointPolicy::ConvexMix { .. } => "convex_mix".into(),
        }
    }

    /// Sparse weights over `z_{K,0..i-1}` for inner step `i` (1-based) of epoch `k`.
    pub fn weights(&self, k: usize, i: usize) -> Result<Weights> {
        if i == 0 {
            return Err(Error::invalid("inner index is 1-based"));
        }
        Ok(match self {
            EvalPointPolicy::FullGradient => vec![(0, 1.0)],
            EvalPointPolicy::Incremental => vec![(i - 1, 1.0)],
            EvalPointPolicy::MiniBatch { b } => {
                if *b == 0 {
                    return Err(Error::invalid("mini-batch size must be at least 1"));
                }
                vec![(b * ((i - 1) / b), 1.0)]
            }
            EvalPointPolicy::DelayedAsync { max_delay, seed } => {
                let delay = stream_rng(*seed, k, i).random_range(0..=*max_delay);
                vec![((i - 1).saturating_sub(delay), 1.0)]
            }
            EvalPointPolicy::ConvexMix { seed } => {
                let mut rng = stream_rng(*seed, k, i);
                let raw: Vec<f64> = (0..i).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().enumerate().map(|(j, w)| (j, w / total)).collect()
            }
        })
    }

    /// Dense weight vector of length `i`.
    pub fn weights_dense(&self, k: usize, i: usize) -> Result<Vec<f64>> {
        let mut dense = vec![0.0; i];
        for (j, w) in self.weights(k, i)? {
            dense[j] = w;
        }
        Ok(dense)
    }
}

/// `sum_j lambda_j z_j`. A single unit weight returns that iterate unchanged.
pub fn combine(weights: &[(usize, f64)], points: &[Vec<f64>]) -> Vec<f64> {
    if let [(j, w)] = weights {
        if *w == 1.0 {
            return points[*j].clone();
        }
    }
    let mut out = vec![0.0; points[0].len()];
    for &(j, w) in weights {
        for (o, z) in out.iter_mut().zip(&points[j]) {
            *o += w * z;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PermutationPolicy {
    Identity,
    /// Same order every epoch; 0-based component indices.
    Fixed { order: Vec<usize> },
    /// Fresh seeded shuffle each epoch.
    Shuffled { seed: u64 },
    /// Descending order of `|d_i(x_K)|`, ties kept in index order.
    AdversarialMaxNorm,
}

impl PermutationPolicy {
    pub fn needs_probe(&self) -> bool {
        matches!(self, PermutationPolicy::AdversarialMaxNorm)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PermutationPolicy::Identity => "identity",
            PermutationPolicy::Fixed { .. } => "fixed",
            PermutationPolicy::Shuffled { .. } => "shuffled",
            PermutationPolicy::AdversarialMaxNorm => "adversarial_max_norm",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let PermutationPolicy::Fixed { order } = self {
            let mut seen = vec![false; n];
            if order.len() != n {
                return Err(Error::invalid(format!("fixed order has length {}, expected {n}", order.len())));
            }
            for &j in order {
                if j >= n || seen[j] {
                    return Err(Error::invalid("fixed order is not a permutation of 0..n"));
                }
                seen[j] = true;
            }
        }
        Ok(())
    }

    /// Visiting order `pi_K` for epoch `k` as 0-based component indices.
    pub fn permutation(&self, k: usize, n: usize, probe: Option<&[f64]>) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        Ok(match self {
            PermutationPolicy::Identity => (0..n).collect(),
            PermutationPolicy::Fixed { order } => {
                self.validate(n)?;
                order.clone()
            }
            PermutationPolicy::Shuffled { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k as u64);
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                order
            }
            PermutationPolicy::AdversarialMaxNorm => {
                let probe = probe.ok_or_else(|| Error::invalid("adversarial ordering needs a probe"))?;
                if probe.len() != n {
                    return Err(Error::Dimension { expected: n, got: probe.len() });
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| probe[b].total_cmp(&probe[a]));
                order
            }
        })
    }
}
