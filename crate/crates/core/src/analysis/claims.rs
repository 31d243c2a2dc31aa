//! Per-epoch inequalities evaluated on recorded runs.

use serde::{Deserialize, Serialize};

use crate::engine::{EpochRecord, RunTrace};
use crate::linalg::{dist_sq, dot, norm_sq, sub};
use crate::steps::StepRule;
use crate::{Error, Result};

/// Relative tolerance for the step-length bound.
pub const CLAIM1_TOL: f64 = 1e-12;
/// Relative tolerance for inequalities involving objective values.
pub const OBJECTIVE_TOL: f64 = 1e-9;

fn rel_to_max(slack: f64, lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        slack / scale
    }
}

fn rel_to_one(slack: f64, rhs: f64) -> f64 {
    slack / (1.0 + rhs.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLengthReport {
    pub k: usize,
    /// `n sum_j alpha_{K,j}^2 |d_j|^2`
    pub rhs: f64,
    /// Largest left-hand side over the inner steps.
    pub lhs_max: f64,
    pub min_slack: f64,
    pub min_rel_slack: f64,
    /// 1-based step achieving `min_rel_slack`.
    pub worst_step: usize,
    pub pass: bool,
}

/// `max{|z_{K,i} - x_K|^2, |x_{K+1} - x_K|^2, |zhat_{K,i-1} - x_K|^2} <= n sum_j alpha_j^2 |d_j|^2`
/// at every inner step of one epoch.
pub fn check_claim1(record: &EpochRecord, x_k: &[f64]) -> StepLengthReport {
    let n = record.inner.len() as f64;
    let rhs = n * record.weighted_step_energy();
    let x_next = &record.inner.last().expect("epoch has steps").z;
    let end = dist_sq(x_next, x_k);
    let mut report = StepLengthReport {
        k: record.k,
        rhs,
        lhs_max: 0.0,
        min_slack: f64::INFINITY,
        min_rel_slack: f64::INFINITY,
        worst_step: 1,
        pass: true,
    };
    for (i, r) in record.inner.iter().enumerate() {
        let lhs = dist_sq(&r.z, x_k).max(end).max(dist_sq(&r.z_hat, x_k));
        let slack = rhs - lhs;
        let rel = rel_to_max(slack, lhs, rhs);
        report.lhs_max = report.lhs_max.max(lhs);
        report.min_slack = report.min_slack.min(slack);
        if rel < report.min_rel_slack {
            report.min_rel_slack = rel;
            report.worst_step = i + 1;
        }
    }
    report.pass = report.min_rel_slack >= -CLAIM1_TOL;
    report
}

/// Step-length bound over every recorded epoch.
pub fn claim1_trace(trace: &RunTrace) -> Result<Vec<StepLengthReport>> {
    trace.require_full()?;
    Ok(trace.epochs.iter().map(|e| check_claim1(e, &trace.points[e.k])).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochDescentReport {
    pub k: usize,
    /// `alpha_K`
    pub anchor: f64,
    /// `F(x_{K+1}) - F(x_K) + (n alpha_K / 2) |grad F(x_K)|^2`
    pub lhs: f64,
    /// Right-hand side as stated, with `|x_{K+1} - x_K|^2` replaced by its upper bound.
    pub rhs_printed: f64,
    /// Right-hand side keeping the `(L/2 - 1/(2 n alpha_K)) |x_{K+1} - x_K|^2` term.
    pub rhs_valid: f64,
    pub rel_slack_printed: f64,
    pub rel_slack_valid: f64,
    pub pass_printed: bool,
    pub pass_valid: bool,
}

fn smooth_constants(trace: &RunTrace) -> Result<(f64, f64)> {
    let l = trace.problem.lipschitz_gradient().ok_or_else(|| {
        Error::Unsupported(format!("{} is not smooth", trace.problem.kind().name()))
    })?;
    Ok((l, trace.problem.lipschitz_value()))
}

fn anchor(trace: &RunTrace, k: usize) -> f64 {
    if k == 0 {
        trace.config.strategy.initial_anchor()
    } else {
        trace.summaries[k - 1].alpha_last
    }
}

fn epoch_in_range(trace: &RunTrace, k: usize) -> Result<&EpochRecord> {
    trace.require_full()?;
    trace.epochs.get(k).ok_or(Error::EpochIncomplete(k))
}

/// Per-epoch objective decrease inequality, evaluated in its stated form and
/// in the form before the step-length bound is substituted.
pub fn check_claim2(trace: &RunTrace, k: usize) -> Result<EpochDescentReport> {
    let (l, m) = smooth_constants(trace)?;
    let record = epoch_in_range(trace, k)?;
    let n = trace.problem.n() as f64;
    let a = anchor(trace, k);
    let s = record.weighted_step_energy();
    let delta_sq = dist_sq(&trace.points[k + 1], &trace.points[k]);
    let lhs = trace.f_values[k + 1] - trace.f_values[k] + 0.5 * n * a * trace.grad_norm_sq[k];
    let cube_term: f64 = record.inner.iter().map(|r| 1.0 - (r.alpha / a).powi(3)).sum();
    let square_term: f64 = record.inner.iter().map(|r| (r.alpha / a - 1.0).powi(2)).sum();
    let rhs_printed = (a * l * l * n * n + 0.5 * l * n - 0.5 / a) * s + a * m * m * cube_term;
    let rhs_valid = a * l * l * n * n * s + a * m * m * square_term + (0.5 * l - 0.5 / (n * a)) * delta_sq;
    let rel_slack_printed = rel_to_one(rhs_printed - lhs, rhs_printed);
    let rel_slack_valid = rel_to_one(rhs_valid - lhs, rhs_valid);
    Ok(EpochDescentReport {
        k,
        anchor: a,
        lhs,
        rhs_printed,
        rhs_valid,
        rel_slack_printed,
        rel_slack_valid,
        pass_printed: rel_slack_printed >= -OBJECTIVE_TOL,
        pass_valid: rel_slack_valid >= -OBJECTIVE_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub k: usize,
    pub anchor: f64,
    /// `<grad F(x_K), x_{K+1} - x_K> + |x_{K+1} - x_K|^2 / (2 n alpha_K)`
    pub lhs: f64,
    /// `-(n alpha_K/2)|grad F|^2 + alpha_K L^2 n^2 S + alpha_K M^2 sum_i (alpha_{K,i}/alpha_K - 1)^2`
    pub rhs: f64,
    pub rel_slack: f64,
    pub pass: bool,
}

/// Inner-product decomposition bounding the first-order change over an epoch.
pub fn check_descent_decomposition(trace: &RunTrace, k: usize) -> Result<DecompositionReport> {
    let (l, m) = smooth_constants(trace)?;
    let record = epoch_in_range(trace, k)?;
    let n = trace.problem.n() as f64;
    let a = anchor(trace, k);
    let g = trace.problem.full_direction(&trace.points[k])?;
    let step = sub(&trace.points[k + 1], &trace.points[k]);
    let lhs = dot(&g, &step) + norm_sq(&step) / (2.0 * n * a);
    let square_term: f64 = record.inner.iter().map(|r| (r.alpha / a - 1.0).powi(2)).sum();
    let rhs = -0.5 * n * a * norm_sq(&g) + a * l * l * n * n * record.weighted_step_energy() + a * m * m * square_term;
    let rel_slack = rel_to_one(rhs - lhs, rhs);
    Ok(DecompositionReport { k, anchor: a, lhs, rhs, rel_slack, pass: rel_slack >= -OBJECTIVE_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// Last epoch included.
    pub n_last: usize,
    /// `sum_{K <= N} sum_i alpha_{K,i}^3 |d_i|^2`
    pub lhs: f64,
    /// `(1/beta) log(1 + beta sum |d|^2 / delta)`
    pub rhs_observed: f64,
    /// `(1/beta) log(1 + beta n M^2 (N + 1) / delta)`
    pub rhs_bound: f64,
    pub slack: f64,
    pub pass: bool,
}

fn adaptive_params(trace: &RunTrace) -> Result<(f64, f64)> {
    match trace.config.strategy.rule {
        StepRule::Adaptive { delta, beta } => Ok((delta, beta)),
        _ => Err(Error::Precondition("this check needs an adaptive-step trace".into())),
    }
}

/// Summability of `alpha^3 |d|^2` under the adaptive rule through epoch `n_last`.
pub fn check_summability_ada(trace: &RunTrace, n_last: usize) -> Result<SummabilityReport> {
    let (delta, beta) = adaptive_params(trace)?;
    trace.require_full()?;
    if n_last >= trace.epochs.len() {
        return Err(Error::EpochIncomplete(n_last));
    }
    let mut lhs = 0.0;
    let mut total = 0.0;
    for e in &trace.epochs[..=n_last] {
        for r in &e.inner {
            lhs += r.alpha.powi(3) * r.dnorm2;
            total += r.dnorm2;
        }
    }
    let n = trace.problem.n() as f64;
    let m = trace.problem.lipschitz_value();
    let rhs_observed = (beta * total / delta).ln_1p() / beta;
    let rhs_bound = (beta * n * m * m * (n_last as f64 + 1.0) / delta).ln_1p() / beta;
    let slack = rhs_bound - lhs;
    Ok(SummabilityReport { n_last, lhs, rhs_observed, rhs_bound, slack, pass: slack >= -OBJECTIVE_TOL })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRatioReport {
    /// `max_{K,j} v_{K,j} / v_K = max alpha_K^3 / alpha_{K,j}^3`
    pub max_ratio: f64,
    pub worst: (usize, usize),
    /// `1 + beta n M^2 / delta`
    pub bound_m_squared: f64,
    /// `1 + beta n M / delta`
    pub bound_m: f64,
    pub violates_m_squared: bool,
    pub violates_m: bool,
}

/// Within-epoch growth of the adaptive accumulator against both candidate
/// bounds, `M^2` and `M` in the numerator.
pub fn check_adaptive_ratio(trace: &RunTrace) -> Result<AdaptiveRatioReport> {
    let (delta, beta) = adaptive_params(trace)?;
    trace.require_full()?;
    let n = trace.problem.n() as f64;
    let m = trace.problem.lipschitz_value();
    let mut v_k = delta;
    let mut max_ratio = 1.0f64;
    let mut worst = (0, 1);
    for e in &trace.epochs {
        for (j, r) in e.inner.iter().enumerate() {
            let v = r.v.expect("adaptive records carry v");
            let ratio = v / v_k;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = (e.k, j + 1);
            }
        }
        v_k = e.inner.last().and_then(|r| r.v).unwrap_or(v_k);
    }
    let bound_m_squared = 1.0 + beta * n * m * m / delta;
    let bound_m = 1.0 + beta * n * m / delta;
    let slack = |b: f64| max_ratio > b * (1.0 + CLAIM1_TOL);
    Ok(AdaptiveRatioReport {
        max_ratio,
        worst,
        bound_m_squared,
        bound_m,
        violates_m_squared: slack(bound_m_squared),
        violates_m: slack(bound_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, RecordLevel, RunConfig};
    use crate::oracles::{make_problem, FiniteSumProblem, ProblemKind};
    use crate::schedules::{EvalPointPolicy, PermutationPolicy};
    use crate::steps::StepStrategy;

    fn trace(problem: &FiniteSumProblem, rule: StepRule, eval: EvalPointPolicy, epochs: usize) -> RunTrace {
        let config = RunConfig {
            strategy: StepStrategy::new(rule, problem.n()).unwrap(),
            eval_policy: eval,
            permutation: PermutationPolicy::Identity,
            x0: vec![0.5; problem.p()],
            epochs,
            record_level: RecordLevel::Full,
            monitor_radius: None,
        };
        run(problem, &config).unwrap()
    }

    #[test]
    fn claim1_zero_epoch() {
        let p = FiniteSumProblem::zero(3, 2).unwrap();
        let t = trace(&p, StepRule::DecreasingSqrt, EvalPointPolicy::Incremental, 2);
        let r = check_claim1(&t.epochs[0], &t.points[0]);
        assert_eq!((r.lhs_max, r.rhs, r.min_slack, r.min_rel_slack), (0.0, 0.0, 0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn claim1_single_component_is_tight() {
        let p = make_problem(ProblemKind::Logistic, 1, 2, 3).unwrap();
        let t = trace(&p, StepRule::Constant { alpha: 0.3 }, EvalPointPolicy::Incremental, 3);
        for r in claim1_trace(&t).unwrap() {
            assert!(r.min_rel_slack.abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn claim1_convex_mix() {
        let p = make_problem(ProblemKind::Logistic, 12, 4, 6).unwrap();
        let t = trace(&p, StepRule::DecreasingSqrt, EvalPointPolicy::ConvexMix { seed: 2 }, 10);
        assert!(claim1_trace(&t).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn claim2_constant_steps_have_no_cube_term() {
        let p = make_problem(ProblemKind::Logistic, 5, 2, 1).unwrap();
        let t = trace(&p, StepRule::Constant { alpha: 0.2 }, EvalPointPolicy::Incremental, 3);
        let r = check_claim2(&t, 1).unwrap();
        let n = 5.0;
        let a = 0.2 / n;
        let l = p.lipschitz_gradient().unwrap();
        let s = t.epochs[1].weighted_step_energy();
        assert_eq!(r.rhs_printed, (a * l * l * n * n + 0.5 * l * n - 0.5 / a) * s);
    }

    #[test]
    fn claim2_zero_problem() {
        let p = FiniteSumProblem::zero(2, 2).unwrap();
        let t = trace(&p, StepRule::Constant { alpha: 1.0 }, EvalPointPolicy::Incremental, 2);
        let r = check_claim2(&t, 1).unwrap();
        assert_eq!((r.lhs, r.rhs_printed, r.rhs_valid), (0.0, 0.0, 0.0));
    }

    #[test]
    fn claim2_rejects_nonsmooth() {
        let p = make_problem(ProblemKind::Median, 3, 1, 0).unwrap();
        let t = trace(&p, StepRule::DecreasingSqrt, EvalPointPolicy::Incremental, 2);
        assert!(matches!(check_claim2(&t, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn decomposition_full_gradient_constant_steps() {
        // all directions at x_K: lhs = -(n a / 2)|g|^2 exactly, rhs adds only the L^2 term
        let p = make_problem(ProblemKind::Logistic, 4, 3, 2).unwrap();
        let t = trace(&p, StepRule::Constant { alpha: 0.4 }, EvalPointPolicy::FullGradient, 3);
        for k in 0..3 {
            let r = check_descent_decomposition(&t, k).unwrap();
            let a = 0.1;
            let g2 = t.grad_norm_sq[k];
            assert!((r.lhs + 0.5 * 4.0 * a * g2).abs() < 1e-14);
            assert!(r.pass);
        }
    }

    #[test]
    fn summability_zero_run() {
        let p = FiniteSumProblem::zero(3, 1).unwrap();
        let t = trace(&p, StepRule::Adaptive { delta: 2.0, beta: 3.0 }, EvalPointPolicy::Incremental, 2);
        let r = check_summability_ada(&t, 1).unwrap();
        assert_eq!((r.lhs, r.rhs_bound, r.rhs_observed), (0.0, 0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn summability_single_step_matches_log_bound() {
        // n = 1, one step: alpha^3 a = a / (delta + beta a) <= (1/beta) log(1 + beta a / delta)
        let p = FiniteSumProblem::logistic(vec![vec![2.0]], vec![1.0]).unwrap();
        let t = trace(&p, StepRule::Adaptive { delta: 1.5, beta: 0.7 }, EvalPointPolicy::Incremental, 1);
        let r = check_summability_ada(&t, 0).unwrap();
        let a = t.epochs[0].inner[0].dnorm2;
        assert!((r.lhs - a / (1.5 + 0.7 * a)).abs() < 1e-15);
        assert!(r.lhs <= r.rhs_observed && r.rhs_observed <= r.rhs_bound);
    }

    #[test]
    fn summability_requires_adaptive() {
        let p = FiniteSumProblem::zero(3, 1).unwrap();
        let t = trace(&p, StepRule::DecreasingSqrt, EvalPointPolicy::Incremental, 2);
        assert!(matches!(check_summability_ada(&t, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn adaptive_ratio_bounded() {
        let p = make_problem(ProblemKind::Logistic, 8, 3, 4).unwrap();
        let t = trace(&p, StepRule::Adaptive { delta: 512.0, beta: 64.0 }, EvalPointPolicy::Incremental, 20);
        let r = check_adaptive_ratio(&t).unwrap();
        assert!(!r.violates_m_squared);
        assert!(r.max_ratio >= 1.0);
    }
}
