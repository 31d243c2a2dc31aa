//! Continuous-time view of a run: the piecewise-affine interpolant through the
//! epoch iterates, the perturbation size `gamma` that it witnesses, and its
//! distance to an integrated subgradient flow.
//!
//! Breakpoints are `t_K = sum_{k < K} sum_i alpha_{k,i}` so that the piece on
//! `[t_K, t_{K+1}]` has length `sum_i alpha_{K,i}` and joins `x_K` to `x_{K+1}`.

use serde::{Deserialize, Serialize};

use crate::analysis::minnorm::min_norm_point;
use crate::engine::RunTrace;
use crate::linalg::{dist_sq, norm};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interpolant {
    /// `t_0 = 0 < t_1 < .. < t_E`
    pub breakpoints: Vec<f64>,
    /// `x_0, .., x_E`
    pub nodes: Vec<Vec<f64>>,
}

impl Interpolant {
    pub fn from_trace(trace: &RunTrace) -> Result<Self> {
        let mut breakpoints = Vec::with_capacity(trace.summaries.len() + 1);
        let mut t = 0.0;
        breakpoints.push(t);
        for s in &trace.summaries {
            if !(s.alpha_sum > 0.0) {
                return Err(Error::Trace(format!("epoch {} has nonpositive step mass", s.k)));
            }
            t += s.alpha_sum;
            breakpoints.push(t);
        }
        let nodes = trace.points[..breakpoints.len()].to_vec();
        Ok(Interpolant { breakpoints, nodes })
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty")
    }

    /// `sum_{k <= K} sum_i alpha_{k,i}`, the step mass through epoch `K`.
    pub fn cumulative_step_mass(&self, k: usize) -> f64 {
        self.breakpoints[k + 1]
    }

    /// `w(t)` for `t` in `[0, t_E]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [0, {}]", self.horizon())));
        }
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        let k = idx - 1;
        if self.breakpoints[k] == t || k + 1 == self.breakpoints.len() {
            return Ok(self.nodes[k].clone());
        }
        let (t0, t1) = (self.breakpoints[k], self.breakpoints[k + 1]);
        let s = (t - t0) / (t1 - t0);
        Ok(self.nodes[k].iter().zip(&self.nodes[k + 1]).map(|(a, b)| (1.0 - s) * a + s * b).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub k: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `max{n alpha_{K,1} M, |1 - alpha_{K,1} / alpha_{K,n}|}`
    pub gamma: f64,
    /// `alpha_{K,1} / alpha_{K,n}`
    pub ratio: f64,
    /// `max_i n alpha_{K,i} / (t_{K+1} - t_K)`
    pub lambda_max: f64,
    pub lambda_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTrace {
    pub m: f64,
    pub intervals: Vec<GammaInterval>,
}

impl GammaTrace {
    pub fn gammas(&self) -> Vec<f64> {
        self.intervals.iter().map(|g| g.gamma).collect()
    }

    pub fn lambdas_ok(&self) -> bool {
        self.intervals.iter().all(|g| g.lambda_ok)
    }

    /// True when `gamma` never increases from one epoch to the next.
    pub fn is_nonincreasing(&self) -> bool {
        self.intervals.windows(2).all(|w| w[1].gamma <= w[0].gamma)
    }
}

/// `lambda_i = n alpha_{K,i} / (t_{K+1} - t_K)` for one recorded epoch.
pub fn lambdas(trace: &RunTrace, k: usize) -> Result<Vec<f64>> {
    trace.require_full()?;
    let e = trace.epochs.get(k).ok_or(Error::EpochIncomplete(k))?;
    let n = e.inner.len() as f64;
    let mass = trace.summaries[k].alpha_sum;
    Ok(e.inner.iter().map(|r| n * r.alpha / mass).collect())
}

/// Piecewise-constant perturbation size along the interpolant. Uses exact
/// `lambda_i` when inner records are present, otherwise `alpha_{K,1}`.
pub fn gamma_trace(trace: &RunTrace, m: f64) -> Result<GammaTrace> {
    let interp = Interpolant::from_trace(trace)?;
    let n = trace.problem.n() as f64;
    let full = trace.is_full();
    let mut intervals = Vec::with_capacity(trace.summaries.len());
    for (k, s) in trace.summaries.iter().enumerate() {
        let ratio = s.alpha_first / s.alpha_last;
        let gamma = (n * s.alpha_first * m).max((1.0 - ratio).abs());
        let lambda_max = if full {
            lambdas(trace, k)?.into_iter().fold(0.0, f64::max)
        } else {
            n * s.alpha_first / s.alpha_sum
        };
        intervals.push(GammaInterval {
            k,
            t_start: interp.breakpoints[k],
            t_end: interp.breakpoints[k + 1],
            gamma,
            ratio,
            lambda_max,
            lambda_ok: lambda_max <= ratio * (1.0 + 1e-12),
        });
    }
    Ok(GammaTrace { m, intervals })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AptReport {
    pub t: f64,
    pub horizon: f64,
    pub h: f64,
    /// `sup_s |w(t + s) - y(s)|` with step `h`.
    pub deviation: f64,
    /// Same with step `h / 2`.
    pub deviation_half: f64,
    /// Step-halving disagreement beyond `max(1e-6, 5%)`.
    pub step_too_large: bool,
    /// Largest increase of `F` between consecutive flow points (step `h/2`).
    pub lyapunov_max_increase: f64,
}

struct FlowResult {
    deviation: f64,
    lyapunov_max_increase: f64,
}

fn integrate(trace: &RunTrace, interp: &Interpolant, t: f64, horizon: f64, h: f64) -> Result<FlowResult> {
    let problem = &trace.problem;
    let mut y = interp.eval(t)?;
    let mut f_prev = problem.full_value(&y)?;
    let mut s = 0.0;
    let mut deviation = 0.0f64;
    let mut lyapunov_max_increase = 0.0f64;
    while s < horizon {
        let step = h.min(horizon - s);
        let v = min_norm_point(&problem.generator_set(&y)?)?;
        for (yj, vj) in y.iter_mut().zip(&v) {
            *yj -= step * vj;
        }
        s += step;
        if horizon - s < 1e-12 * horizon {
            s = horizon;
        }
        let w = interp.eval((t + s).min(interp.horizon()))?;
        deviation = deviation.max(dist_sq(&w, &y).sqrt());
        let f = problem.full_value(&y)?;
        lyapunov_max_increase = lyapunov_max_increase.max(f - f_prev);
        f_prev = f;
    }
    Ok(FlowResult { deviation, lyapunov_max_increase })
}

/// Distance over `[t, t + horizon]` between the interpolant and one explicit
/// Euler solution of `y' = -(min-norm element of the generator hull)` started
/// at `w(t)`. The flow is one member of the solution set, so the value is an
/// upper surrogate of the infimum over solutions.
pub fn apt_deviation(trace: &RunTrace, t: f64, horizon: f64, h: f64) -> Result<AptReport> {
    if !(h > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("step and horizon must be positive"));
    }
    let interp = Interpolant::from_trace(trace)?;
    if t < 0.0 || t + horizon > interp.horizon() {
        return Err(Error::invalid(format!(
            "window [{t}, {}] is outside the run's time span [0, {}]",
            t + horizon,
            interp.horizon()
        )));
    }
    let coarse = integrate(trace, &interp, t, horizon, h)?;
    let fine = integrate(trace, &interp, t, horizon, h / 2.0)?;
    let step_too_large = (coarse.deviation - fine.deviation).abs() > (0.05 * fine.deviation).max(1e-6);
    Ok(AptReport {
        t,
        horizon,
        h,
        deviation: coarse.deviation,
        deviation_half: fine.deviation,
        step_too_large,
        lyapunov_max_increase: fine.lyapunov_max_increase,
    })
}

/// `|x_K|` along the run, for boundedness monitoring.
pub fn iterate_norms(trace: &RunTrace) -> Vec<f64> {
    trace.points.iter().map(|x| norm(x)).collect()
}
