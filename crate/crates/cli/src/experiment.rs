//! Turning a config into an engine run and writing its files.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use wrdescent::engine::{run, RunConfig, RunTrace};
use wrdescent::oracles::{make_problem, FiniteSumProblem};
use wrdescent::steps::{StepRule, StepStrategy};
use wrdescent::traceio::{write_summary_csv, write_trace_file};

use crate::config::{ExperimentConfig, StartSpec, StrategyFields};

fn need_l(problem: &FiniteSumProblem, rule: &str) -> Result<f64> {
    problem
        .lipschitz_gradient()
        .ok_or_else(|| anyhow!("strategy `{rule}` needs L but {} is not smooth", problem.kind().name()))
}

pub fn step_rule(spec: &StrategyFields, problem: &FiniteSumProblem) -> Result<StepRule> {
    let n = problem.n() as f64;
    Ok(match *spec {
        StrategyFields::Constant { alpha } => StepRule::Constant { alpha },
        StrategyFields::ConstantOverL { scale } => StepRule::Constant { alpha: scale / need_l(problem, "constant_over_l")? },
        StrategyFields::Sqrt => StepRule::DecreasingSqrt,
        StrategyFields::Cbrt { l } => StepRule::DecreasingCbrtWithL {
            l: match l {
                Some(l) => l,
                None => need_l(problem, "cbrt")?,
            },
        },
        StrategyFields::Adaptive { delta, beta } => StepRule::Adaptive {
            delta: delta.unwrap_or(n * n * n),
            beta: beta.unwrap_or(n * n),
        },
    })
}

/// Uniform point in the ball of `radius`: Gaussian direction, radius `r U^{1/p}`.
fn ball_point(p: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / p as f64);
    for x in &mut v {
        *x *= r / len;
    }
    v
}

pub fn start_point(spec: &StartSpec, p: usize) -> Result<Vec<f64>> {
    match spec {
        StartSpec::Zero => Ok(vec![0.0; p]),
        StartSpec::Ball { radius, seed } => {
            if !(*radius >= 0.0) {
                return Err(anyhow!("invalid config at `x0.radius`: must be nonnegative"));
            }
            Ok(ball_point(p, *radius, *seed))
        }
        StartSpec::Point { value } => {
            if value.len() != p {
                return Err(anyhow!("invalid config at `x0.value`: expected {p} entries, got {}", value.len()));
            }
            Ok(value.clone())
        }
    }
}

pub fn build(config: &ExperimentConfig) -> Result<(FiniteSumProblem, RunConfig)> {
    let spec = &config.problem;
    let problem = make_problem(spec.kind, spec.n, spec.p, spec.seed).context("building the problem")?;
    let rule = step_rule(&config.strategy.0, &problem)?;
    let run_config = RunConfig {
        strategy: StepStrategy::new(rule, problem.n())?,
        eval_policy: config.eval_policy.clone(),
        permutation: config.permutation.clone(),
        x0: start_point(&config.x0, problem.p())?,
        epochs: config.epochs,
        record_level: config.record_level,
        monitor_radius: config.monitor_radius,
    };
    run_config.validate(&problem)?;
    Ok((problem, run_config))
}

pub fn execute(config: &ExperimentConfig) -> Result<RunTrace> {
    let (problem, run_config) = build(config)?;
    Ok(run(&problem, &run_config)?)
}

/// `trace.txt`, `summary.csv` and the resolved `config.json`.
pub fn write_outputs(config: &ExperimentConfig, trace: &RunTrace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trace_file(trace, &dir.join("trace.txt"))?;
    let mut summary = Vec::new();
    write_summary_csv(trace, &mut summary)?;
    fs::write(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("config.json"), config.to_json() + "\n")?;
    Ok(())
}
