//! Epoch-by-epoch execution of the without-replacement recursion
//!
//! ```text
//! z_{K,0} = x_K
//! z_{K,i} = z_{K,i-1} - alpha_{K,i} d_{pi_K(i)}(zhat_{K,i-1}),  i = 1..n
//! x_{K+1} = z_{K,n}
//! ```
//!
//! with a complete record of every inner step when requested.

use serde::{Deserialize, Serialize};

use crate::linalg::{all_finite, norm, norm_inf, norm_sq};
use crate::oracles::FiniteSumProblem;
use crate::schedules::{combine, EvalPointPolicy, PermutationPolicy, Weights};
use crate::steps::{StepState, StepStrategy};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordLevel {
    Full,
    EpochOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: StepStrategy,
    pub eval_policy: EvalPointPolicy,
    pub permutation: PermutationPolicy,
    pub x0: Vec<f64>,
    pub epochs: usize,
    pub record_level: RecordLevel,
    /// Flag epochs with `|x_K| >` this radius.
    #[serde(default)]
    pub monitor_radius: Option<f64>,
}

impl RunConfig {
    pub fn validate(&self, problem: &FiniteSumProblem) -> Result<()> {
        if self.x0.len() != problem.p() {
            return Err(Error::Dimension { expected: problem.p(), got: self.x0.len() });
        }
        if self.epochs == 0 {
            return Err(Error::invalid("the number of epochs must be at least 1"));
        }
        if self.strategy.n != problem.n() {
            return Err(Error::invalid(format!(
                "strategy built for n = {} but the problem has n = {}",
                self.strategy.n,
                problem.n()
            )));
        }
        if !all_finite(&self.x0) {
            return Err(Error::invalid("x0 has non-finite entries"));
        }
        self.strategy.validate()?;
        self.eval_policy.validate()?;
        self.permutation.validate(problem.n())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    /// Component `pi_K(i)`, 0-based.
    pub component: usize,
    pub weights: Weights,
    pub z_hat: Vec<f64>,
    pub d: Vec<f64>,
    pub dnorm2: f64,
    pub alpha: f64,
    pub z: Vec<f64>,
    /// `v_{K,i}` for the adaptive rule.
    pub v: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub k: usize,
    pub order: Vec<usize>,
    /// Inner steps `i = 1..n` in order; the last `z` is `x_{K+1}`.
    pub inner: Vec<InnerRecord>,
}

impl EpochRecord {
    pub fn alphas(&self) -> Vec<f64> {
        self.inner.iter().map(|r| r.alpha).collect()
    }

    /// `sum_j alpha_{K,j}^2 |d_j|^2`
    pub fn weighted_step_energy(&self) -> f64 {
        self.inner.iter().map(|r| r.alpha * r.alpha * r.dnorm2).sum()
    }
}

/// One row per completed epoch `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub k: usize,
    /// `F(x_K)`
    pub f: f64,
    /// `|(1/n) sum_i d_i(x_K)|^2`
    pub grad_norm_sq: f64,
    /// `min_{K' <= K}` of `grad_norm_sq`
    pub min_so_far: f64,
    pub alpha_first: f64,
    pub alpha_last: f64,
    pub alpha_sum: f64,
    /// `v_{K,n}` at the end of the epoch (adaptive only).
    pub v: Option<f64>,
    /// `|x_K|`
    pub x_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub epoch: usize,
    /// 1-based inner step, 0 when the failure is at the epoch boundary.
    pub step: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub k: usize,
    /// Inner step (1-based) for box exits inside an epoch.
    pub step: Option<usize>,
    pub x_norm: f64,
    pub outside_box: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub problem: FiniteSumProblem,
    pub config: RunConfig,
    /// `x_0, .., x_E` for `E` completed epochs.
    pub points: Vec<Vec<f64>>,
    /// `F(x_K)` for `K = 0..=E`.
    pub f_values: Vec<f64>,
    /// `|(1/n) sum_i d_i(x_K)|^2` for `K = 0..=E`.
    pub grad_norm_sq: Vec<f64>,
    pub summaries: Vec<EpochSummary>,
    /// Inner records, empty at `RecordLevel::EpochOnly`.
    pub epochs: Vec<EpochRecord>,
    pub abort: Option<Abort>,
    pub excursions: Vec<Excursion>,
}

impl RunTrace {
    pub fn completed_epochs(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_full(&self) -> bool {
        self.config.record_level == RecordLevel::Full && self.epochs.len() == self.summaries.len()
    }

    /// Per-epoch step history, from inner records when present.
    pub fn alpha_history(&self) -> Result<Vec<Vec<f64>>> {
        if !self.is_full() {
            return Err(Error::Precondition("step history needs a full trace".into()));
        }
        Ok(self.epochs.iter().map(EpochRecord::alphas).collect())
    }

    pub fn require_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::Precondition("this check needs a trace recorded at full level".into()))
        }
    }
}

/// Outcome of one epoch.
#[derive(Clone, Debug)]
pub struct EpochOutput {
    pub x_next: Vec<f64>,
    pub record: Option<EpochRecord>,
    pub alpha_first: f64,
    pub alpha_last: f64,
    pub alpha_sum: f64,
    /// First inner step whose iterate left the problem's box.
    pub box_exit: Option<(usize, f64)>,
}

/// Run epoch `k` from `x_k`. Non-finite values abort with the offending step.
pub fn run_epoch(
    problem: &FiniteSumProblem,
    config: &RunConfig,
    state: &mut StepState,
    x_k: &[f64],
    k: usize,
) -> Result<EpochOutput> {
    let n = problem.n();
    let strategy = &config.strategy;
    let probe: Option<Vec<f64>> = if config.permutation.needs_probe() {
        Some(problem.components().iter().map(|c| norm(&c.direction(x_k))).collect())
    } else {
        None
    };
    let order = config.permutation.permutation(k, n, probe.as_deref())?;
    let full = config.record_level == RecordLevel::Full;
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    zs.push(x_k.to_vec());
    let mut inner = Vec::with_capacity(if full { n } else { 0 });
    let (mut alpha_first, mut alpha_last, mut alpha_sum) = (0.0, 0.0, 0.0);
    let mut box_exit = None;
    for i in 1..=n {
        let weights = config.eval_policy.weights(k, i)?;
        let z_hat = combine(&weights, &zs);
        let component = order[i - 1];
        let d = problem.component(component).direction(&z_hat);
        let dnorm2 = norm_sq(&d);
        if !all_finite(&d) || !dnorm2.is_finite() {
            return Err(Error::NonFinite { epoch: k, step: i });
        }
        let alpha = strategy.step_value(state, k, i, dnorm2)?;
        if !alpha.is_finite() {
            return Err(Error::NonFinite { epoch: k, step: i });
        }
        let z: Vec<f64> = zs[i - 1].iter().zip(&d).map(|(zj, dj)| zj - alpha * dj).collect();
        if !all_finite(&z) {
            return Err(Error::NonFinite { epoch: k, step: i });
        }
        if box_exit.is_none() && !problem.in_box(&z) {
            box_exit = Some((i, norm_inf(&z)));
        }
        if i == 1 {
            alpha_first = alpha;
        }
        alpha_last = alpha;
        alpha_sum += alpha;
        if full {
            inner.push(InnerRecord { component, weights, z_hat, d, dnorm2, alpha, z: z.clone(), v: state.v });
        }
        zs.push(z);
    }
    let x_next = zs.pop().expect("n >= 1");
    let record = full.then(|| EpochRecord { k, order, inner });
    Ok(EpochOutput { x_next, record, alpha_first, alpha_last, alpha_sum, box_exit })
}

fn point_stats(problem: &FiniteSumProblem, x: &[f64]) -> Result<(f64, f64)> {
    let f = problem.full_value(x)?;
    let g = norm_sq(&problem.full_direction(x)?);
    Ok((f, g))
}

/// Execute `config.epochs` epochs. A non-finite value stops the run and is
/// reported in `abort`; the epochs completed before it are kept.
pub fn run(problem: &FiniteSumProblem, config: &RunConfig) -> Result<RunTrace> {
    config.validate(problem)?;
    let strategy = &config.strategy;
    let full = config.record_level == RecordLevel::Full;
    let mut state = strategy.initial_state(false);
    let mut trace = RunTrace {
        problem: problem.clone(),
        config: config.clone(),
        points: vec![config.x0.clone()],
        f_values: Vec::with_capacity(config.epochs + 1),
        grad_norm_sq: Vec::with_capacity(config.epochs + 1),
        summaries: Vec::with_capacity(config.epochs),
        epochs: Vec::with_capacity(if full { config.epochs } else { 0 }),
        abort: None,
        excursions: Vec::new(),
    };
    let (f0, g0) = point_stats(problem, &config.x0)?;
    trace.f_values.push(f0);
    trace.grad_norm_sq.push(g0);
    monitor(problem, config, &mut trace, 0, &config.x0, None);
    let mut min_so_far = f64::INFINITY;
    for k in 0..config.epochs {
        let x_k = trace.points[k].clone();
        let out = match run_epoch(problem, config, &mut state, &x_k, k) {
            Ok(out) => out,
            Err(Error::NonFinite { epoch, step }) => {
                trace.abort = Some(Abort { epoch, step, reason: "non-finite value".into() });
                break;
            }
            Err(e) => return Err(e),
        };
        let (f_next, g_next) = point_stats(problem, &out.x_next)?;
        if !f_next.is_finite() || !g_next.is_finite() {
            trace.abort = Some(Abort { epoch: k, step: 0, reason: "non-finite objective at epoch end".into() });
            break;
        }
        min_so_far = min_so_far.min(trace.grad_norm_sq[k]);
        trace.summaries.push(EpochSummary {
            k,
            f: trace.f_values[k],
            grad_norm_sq: trace.grad_norm_sq[k],
            min_so_far,
            alpha_first: out.alpha_first,
            alpha_last: out.alpha_last,
            alpha_sum: out.alpha_sum,
            v: state.v,
            x_norm: norm(&x_k),
        });
        if let Some(rec) = out.record {
            trace.epochs.push(rec);
        }
        monitor(problem, config, &mut trace, k + 1, &out.x_next, out.box_exit.map(|b| (k, b)));
        trace.f_values.push(f_next);
        trace.grad_norm_sq.push(g_next);
        trace.points.push(out.x_next);
    }
    Ok(trace)
}

fn monitor(
    problem: &FiniteSumProblem,
    config: &RunConfig,
    trace: &mut RunTrace,
    k: usize,
    x: &[f64],
    inner_exit: Option<(usize, (usize, f64))>,
) {
    if let Some((epoch, (step, _))) = inner_exit {
        trace.excursions.push(Excursion { k: epoch, step: Some(step), x_norm: norm(&trace.points[epoch]), outside_box: true });
    }
    let x_norm = norm(x);
    let outside_box = !problem.in_box(x);
    let outside_radius = config.monitor_radius.is_some_and(|r| x_norm > r);
    if outside_box || outside_radius {
        trace.excursions.push(Excursion { k, step: None, x_norm, outside_box });
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub k: usize,
    /// 1-based inner step, `None` for epoch-level fields.
    pub i: Option<usize>,
    pub field: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub ok: bool,
    pub first_mismatch: Option<Mismatch>,
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn same_weights(a: &Weights, b: &Weights) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|((j, x), (k, y))| j == k && x.to_bits() == y.to_bits())
}

/// Recompute the run from its configuration and compare every stored value
/// bitwise, reporting the first difference.
pub fn replay(trace: &RunTrace) -> Result<ReplayReport> {
    trace.require_full()?;
    let mut config = trace.config.clone();
    config.epochs = trace.completed_epochs().max(1);
    let fresh = run(&trace.problem, &config)?;
    let fail = |k, i, field: &str| {
        Ok(ReplayReport { ok: false, first_mismatch: Some(Mismatch { k, i, field: field.to_string() }) })
    };
    if fresh.completed_epochs() < trace.completed_epochs() {
        return fail(fresh.completed_epochs(), None, "abort");
    }
    if !same_bits(&fresh.points[0], &trace.points[0]) {
        return fail(0, None, "x");
    }
    for (k, (a, b)) in trace.epochs.iter().zip(&fresh.epochs).enumerate() {
        if a.k != b.k || a.order != b.order || a.inner.len() != b.inner.len() {
            return fail(k, None, "order");
        }
        for (i, (r, s)) in a.inner.iter().zip(&b.inner).enumerate() {
            let i = Some(i + 1);
            if r.component != s.component {
                return fail(k, i, "component");
            }
            if !same_weights(&r.weights, &s.weights) {
                return fail(k, i, "weights");
            }
            if !same_bits(&r.z_hat, &s.z_hat) {
                return fail(k, i, "z_hat");
            }
            if !same_bits(&r.d, &s.d) {
                return fail(k, i, "d");
            }
            if r.dnorm2.to_bits() != s.dnorm2.to_bits() {
                return fail(k, i, "dnorm2");
            }
            if r.alpha.to_bits() != s.alpha.to_bits() {
                return fail(k, i, "alpha");
            }
            if r.v.map(f64::to_bits) != s.v.map(f64::to_bits) {
                return fail(k, i, "v");
            }
            if !same_bits(&r.z, &s.z) {
                return fail(k, i, "z");
            }
        }
        if !same_bits(&trace.points[k + 1], &fresh.points[k + 1]) {
            return fail(k + 1, None, "x");
        }
        if trace.f_values[k + 1].to_bits() != fresh.f_values[k + 1].to_bits() {
            return fail(k + 1, None, "f");
        }
        if trace.grad_norm_sq[k + 1].to_bits() != fresh.grad_norm_sq[k + 1].to_bits() {
            return fail(k + 1, None, "grad_norm_sq");
        }
    }
    Ok(ReplayReport { ok: true, first_mismatch: None })
}
