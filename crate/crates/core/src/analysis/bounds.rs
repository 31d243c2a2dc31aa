//! Closed-form bounds on `min_K |grad F(x_K)|^2` and their certification on runs.

use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::steps::StepRule;
use crate::{Error, Result};

/// Relative tolerance of `observed <= bound`.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corollary {
    /// Constant `alpha / n`, no condition on `alpha`.
    Cor1,
    /// `1 / (n sqrt(K + 1))`
    Cor2,
    /// Constant `alpha / n` with `alpha <= 1 / L`.
    Cor3,
    /// `1 / (L n (K + 1)^{1/3})`
    Cor4,
    /// Adaptive with `beta = n^2`, `delta = n^3`.
    Cor5,
}

impl Corollary {
    pub const ALL: [Corollary; 5] = [Corollary::Cor1, Corollary::Cor2, Corollary::Cor3, Corollary::Cor4, Corollary::Cor5];

    pub fn name(self) -> &'static str {
        match self {
            Corollary::Cor1 => "cor1",
            Corollary::Cor2 => "cor2",
            Corollary::Cor3 => "cor3",
            Corollary::Cor4 => "cor4",
            Corollary::Cor5 => "cor5",
        }
    }

    /// First `K` of the minimum: 0 for constant and adaptive, 1 for decreasing rules.
    pub fn first_index(self) -> usize {
        match self {
            Corollary::Cor2 | Corollary::Cor4 => 1,
            _ => 0,
        }
    }
}

impl std::str::FromStr for Corollary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Corollary::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown corollary `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `F(x_0) - F*` (or an upper bound on it).
    pub f0_minus_fstar: f64,
    pub l: f64,
    pub m: f64,
    /// Constant-rule `alpha` (steps are `alpha / n`).
    pub alpha: Option<f64>,
    /// Horizon `N`.
    pub horizon: usize,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub n: usize,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Right-hand side of the chosen corollary, evaluated as stated.
pub fn bound_corollary(which: Corollary, p: &BoundParams) -> Result<f64> {
    let d = p.f0_minus_fstar;
    let (l, m) = (p.l, p.m);
    let np1 = p.horizon as f64 + 1.0;
    let need_alpha = || p.alpha.ok_or_else(|| Error::invalid(format!("{} needs alpha", which.name())));
    let need_horizon = || {
        if p.horizon == 0 {
            Err(Error::Precondition(format!("{} needs N >= 1", which.name())))
        } else {
            Ok(())
        }
    };
    Ok(match which {
        Corollary::Cor1 => {
            let a = need_alpha()?;
            2.0 * d / (np1 * a) + 2.0 * (a * l * l * m * m + 0.5 * l * m * m) * a
        }
        Corollary::Cor2 => {
            need_horizon()?;
            (d + (l * l * m * m + 0.5 * l * m * m) * (1.0 + np1.ln())) / (np1.sqrt() - 1.0)
        }
        Corollary::Cor3 => {
            let a = need_alpha()?;
            if a * l > 1.0 {
                return Err(Error::Precondition(format!("cor3 needs alpha <= 1/L, got alpha = {a}, 1/L = {}", 1.0 / l)));
            }
            2.0 * d / (np1 * a) + 2.0 * a * a * l * l * m * m
        }
        Corollary::Cor4 => {
            need_horizon()?;
            2.0 / (3.0 * (np1.powf(2.0 / 3.0) - 1.0)) * (l * d + m * m * (1.0 + np1.ln()))
        }
        Corollary::Cor5 => {
            let nf = p.n as f64;
            if let (Some(delta), Some(beta)) = (p.delta, p.beta) {
                if !close(beta, nf * nf) || !close(delta, nf * nf * nf) {
                    return Err(Error::Precondition(format!(
                        "cor5 needs beta = n^2 and delta = n^3, got beta = {beta}, delta = {delta}, n = {}",
                        p.n
                    )));
                }
            }
            let inner = d
                + (l.powi(5) + 0.5 * l.powi(4))
                + (0.5 * l * l * (1.0 + m).cbrt() + m * m) * (m * m * np1).ln_1p();
            2.0 * (m * m + 1.0).cbrt() * inner / np1.powf(2.0 / 3.0)
        }
    })
}

/// Corollary whose step rule matches the run; constant steps route to the
/// `L`-aware bound when `alpha <= 1/L`.
pub fn route_corollary(trace: &RunTrace) -> Result<Corollary> {
    let l = trace.problem.lipschitz_gradient();
    Ok(match trace.config.strategy.rule {
        StepRule::Constant { alpha } => match l {
            Some(l) if alpha * l <= 1.0 => Corollary::Cor3,
            _ => Corollary::Cor1,
        },
        StepRule::DecreasingSqrt => Corollary::Cor2,
        StepRule::DecreasingCbrtWithL { .. } => Corollary::Cor4,
        StepRule::Adaptive { .. } => Corollary::Cor5,
    })
}

fn matches_rule(which: Corollary, rule: StepRule, l: f64) -> Result<()> {
    let ok = match (which, rule) {
        (Corollary::Cor1 | Corollary::Cor3, StepRule::Constant { .. }) => true,
        (Corollary::Cor2, StepRule::DecreasingSqrt) => true,
        (Corollary::Cor4, StepRule::DecreasingCbrtWithL { l: step_l }) => {
            if !close(step_l, l) {
                return Err(Error::Precondition(format!(
                    "cor4 needs the step rule built with the problem's L = {l}, got {step_l}"
                )));
            }
            true
        }
        (Corollary::Cor5, StepRule::Adaptive { .. }) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{} does not apply to step rule {rule:?}", which.name())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub horizon: usize,
    pub bound: f64,
    pub observed: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub corollary: Corollary,
    pub rule: StepRule,
    pub f0_minus_fstar: f64,
    pub l: f64,
    pub m: f64,
    pub rows: Vec<BoundRow>,
    pub pass: bool,
}

/// Compare `min_K |grad F(x_K)|^2` against the corollary's bound at every
/// horizon the run covers. `F*` is replaced by the problem's lower bound.
pub fn certify_run(trace: &RunTrace, which: Option<Corollary>) -> Result<BoundReport> {
    let problem = &trace.problem;
    let l = problem
        .lipschitz_gradient()
        .ok_or_else(|| Error::Unsupported(format!("{} is not smooth", problem.kind().name())))?;
    let m = problem.lipschitz_value();
    let f_lower = problem
        .f_star_lower()
        .ok_or_else(|| Error::Unsupported("problem has no lower bound on F*".into()))?;
    let which = match which {
        Some(w) => w,
        None => route_corollary(trace)?,
    };
    let rule = trace.config.strategy.rule;
    matches_rule(which, rule, l)?;
    let (alpha, delta, beta) = match rule {
        StepRule::Constant { alpha } => (Some(alpha), None, None),
        StepRule::Adaptive { delta, beta } => (None, Some(delta), Some(beta)),
        _ => (None, None, None),
    };
    let f0_minus_fstar = trace.f_values[0] - f_lower;
    let mut params = BoundParams { f0_minus_fstar, l, m, alpha, horizon: 0, delta, beta, n: problem.n() };
    let first = which.first_index();
    let last = trace.grad_norm_sq.len() - 1;
    let mut rows = Vec::with_capacity(last + 1);
    let mut observed = f64::INFINITY;
    for horizon in first..=last {
        observed = observed.min(trace.grad_norm_sq[horizon]);
        params.horizon = horizon;
        let bound = bound_corollary(which, &params)?;
        let slack = bound - observed;
        rows.push(BoundRow { horizon, bound, observed, slack, pass: observed <= bound + BOUND_TOL * bound.abs() });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(BoundReport { corollary: which, rule, f0_minus_fstar, l, m, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: Option<f64>, horizon: usize) -> BoundParams {
        BoundParams { f0_minus_fstar: 1.0, l: 1.0, m: 1.0, alpha, horizon, delta: None, beta: None, n: 1 }
    }

    #[test]
    fn cor1_example() {
        let b = bound_corollary(Corollary::Cor1, &params(Some(0.1), 99)).unwrap();
        assert!((b - 0.32).abs() < 1e-15);
    }

    #[test]
    fn cor3_example_and_precondition() {
        let b = bound_corollary(Corollary::Cor3, &params(Some(0.1), 99)).unwrap();
        assert!((b - 0.22).abs() < 1e-15);
        assert!(matches!(bound_corollary(Corollary::Cor3, &params(Some(1.5), 99)), Err(Error::Precondition(_))));
    }

    #[test]
    fn cor5_example() {
        // 2 * 2^{1/3} * (1 + 1.5 + (2^{1/3}/2 + 1) log 2), evaluated independently
        let c = 2f64.powf(1.0 / 3.0);
        let expect = 2.0 * c * (2.5 + (c / 2.0 + 1.0) * std::f64::consts::LN_2);
        let b = bound_corollary(Corollary::Cor5, &params(None, 0)).unwrap();
        assert!((b - expect).abs() < 1e-14);
        assert!((b - 9.146_529_259_989_53).abs() < 1e-12);
    }

    #[test]
    fn cor5_checks_defaults() {
        let mut p = params(None, 3);
        p.n = 4;
        p.beta = Some(16.0);
        p.delta = Some(64.0);
        assert!(bound_corollary(Corollary::Cor5, &p).is_ok());
        p.delta = Some(63.0);
        assert!(bound_corollary(Corollary::Cor5, &p).is_err());
    }

    #[test]
    fn decreasing_bounds_need_positive_horizon() {
        assert!(bound_corollary(Corollary::Cor2, &params(None, 0)).is_err());
        assert!(bound_corollary(Corollary::Cor4, &params(None, 0)).is_err());
        // N = 3: 1/(2 - 1) * (1 + 1.5 (1 + log 4))
        let b = bound_corollary(Corollary::Cor2, &params(None, 3)).unwrap();
        assert!((b - (1.0 + 1.5 * (1.0 + 4f64.ln()))).abs() < 1e-15);
        // N = 7: 2 / (3 (4 - 1)) * (1 + 1 + log 8)
        let b = bound_corollary(Corollary::Cor4, &params(None, 7)).unwrap();
        assert!((b - 2.0 / 9.0 * (2.0 + 8f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn names_round_trip() {
        for c in Corollary::ALL {
            assert_eq!(c.name().parse::<Corollary>().unwrap(), c);
        }
    }
}
