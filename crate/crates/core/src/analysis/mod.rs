//! Certificates evaluated on recorded runs.

pub mod bounds;
pub mod claims;
pub mod continuous;
pub mod minnorm;

pub use bounds::{bound_corollary, certify_run, route_corollary, BoundParams, BoundReport, BoundRow, Corollary};
pub use claims::{
    check_adaptive_ratio, check_claim1, check_claim2, check_descent_decomposition, check_summability_ada,
    claim1_trace, AdaptiveRatioReport, DecompositionReport, EpochDescentReport, StepLengthReport, SummabilityReport,
};
pub use continuous::{apt_deviation, gamma_trace, lambdas, AptReport, GammaInterval, GammaTrace, Interpolant};
pub use minnorm::{criticality, min_norm_point, min_norm_point_detailed, CriticalityReport, MinNormResult};

use serde::{Deserialize, Serialize};

use crate::linalg::{dist_sq, norm_sq};
use crate::oracles::FiniteSumProblem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub slack: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        InequalityCheck { lhs, rhs, slack, holds: slack >= -1e-12 * rhs.abs().max(1.0) }
    }
}

/// `|sum_i a_i|^2 <= m sum_i |a_i|^2`
pub fn lemma_norm_sum_check(vectors: &[Vec<f64>]) -> Result<InequalityCheck> {
    let first = vectors.first().ok_or_else(|| Error::invalid("need at least one vector"))?;
    let mut total = vec![0.0; first.len()];
    let mut sq = 0.0;
    for v in vectors {
        if v.len() != first.len() {
            return Err(Error::Dimension { expected: first.len(), got: v.len() });
        }
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
        sq += norm_sq(v);
    }
    Ok(InequalityCheck::new(norm_sq(&total), vectors.len() as f64 * sq))
}

/// `sum_i a_i / (b + c sum_{k <= i} a_k) <= (1/c) log(1 + c sum_i a_i / b)`
pub fn lemma_log_sum_check(a: &[f64], b: f64, c: f64) -> Result<InequalityCheck> {
    if a.is_empty() || a.iter().any(|&x| !(x > 0.0)) || !(b > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("need a nonempty positive sequence and b, c > 0"));
    }
    let mut partial = 0.0;
    let mut lhs = 0.0;
    for &x in a {
        partial += x;
        lhs += x / (b + c * partial);
    }
    Ok(InequalityCheck::new(lhs, (c * partial / b).ln_1p() / c))
}

/// `max |grad F(x) - grad F(y)| / |x - y|` over the pairs; coincident pairs
/// are skipped.
pub fn lipschitz_gradient_check(problem: &FiniteSumProblem, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if !problem.is_smooth() {
        return Err(Error::Unsupported(format!("{} is not smooth", problem.kind().name())));
    }
    let mut worst = 0.0f64;
    for (x, y) in pairs {
        let dx = dist_sq(x, y);
        if dx == 0.0 {
            continue;
        }
        let gx = problem.full_direction(x)?;
        let gy = problem.full_direction(y)?;
        worst = worst.max((dist_sq(&gx, &gy) / dx).sqrt());
    }
    Ok(worst)
}

/// `min_{K <= N} |grad F(x_K)|^2` at each requested horizon.
pub fn min_grad_at(grad_norm_sq: &[f64], horizons: &[usize]) -> Result<Vec<f64>> {
    let mut prefix = Vec::with_capacity(grad_norm_sq.len());
    let mut best = f64::INFINITY;
    for &g in grad_norm_sq {
        best = best.min(g);
        prefix.push(best);
    }
    horizons
        .iter()
        .map(|&h| prefix.get(h).copied().ok_or(Error::EpochIncomplete(h)))
        .collect()
}

/// `count` integers spread geometrically over `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 || hi <= lo {
        return vec![hi];
    }
    let (a, b) = ((lo.max(1)) as f64, hi as f64);
    let mut out: Vec<usize> = (0..count)
        .map(|j| (a * (b / a).powf(j as f64 / (count - 1) as f64)).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("slope needs at least two matching points"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("log-log slope needs positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}
