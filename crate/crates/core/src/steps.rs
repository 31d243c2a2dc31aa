//! Step-size rules `alpha_{K,i}` and checks on recorded step sequences.
//!
//! Indices follow the recursion: `K` is the 0-based epoch, `i` the 1-based
//! position inside the epoch.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepRule {
    /// `alpha / n`
    Constant { alpha: f64 },
    /// `1 / (n sqrt(K + 1))`
    DecreasingSqrt,
    /// `1 / (L n (K + 1)^{1/3})`
    DecreasingCbrtWithL { l: f64 },
    /// `v += beta |d|^2`, then `v^{-1/3}`, starting from `v = delta`.
    Adaptive { delta: f64, beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStrategy {
    pub rule: StepRule,
    pub n: usize,
}

/// `v^{-1/3}`; shared by the step rule and every replay of it.
pub fn adaptive_alpha(v: f64) -> f64 {
    1.0 / v.cbrt()
}

impl StepStrategy {
    pub fn new(rule: StepRule, n: usize) -> Result<Self> {
        let s = StepStrategy { rule, n };
        s.validate()?;
        Ok(s)
    }

    /// Adaptive rule with `beta = n^2`, `delta = n^3`.
    pub fn adaptive_default(n: usize) -> Result<Self> {
        let nf = n as f64;
        Self::new(StepRule::Adaptive { delta: nf * nf * nf, beta: nf * nf }, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("step strategy needs n >= 1"));
        }
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self.rule {
            StepRule::Constant { alpha } => positive(alpha, "alpha"),
            StepRule::DecreasingSqrt => Ok(()),
            StepRule::DecreasingCbrtWithL { l } => positive(l, "L"),
            StepRule::Adaptive { delta, beta } => positive(delta, "delta").and(positive(beta, "beta")),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.rule, StepRule::Adaptive { .. })
    }

    /// Step of a prescribed rule; `None` for the adaptive rule.
    pub fn prescribed(&self, k: usize) -> Option<f64> {
        let n = self.n as f64;
        let kp1 = (k + 1) as f64;
        match self.rule {
            StepRule::Constant { alpha } => Some(alpha / n),
            StepRule::DecreasingSqrt => Some(1.0 / (n * kp1.sqrt())),
            StepRule::DecreasingCbrtWithL { l } => Some(1.0 / (l * n * kp1.cbrt())),
            StepRule::Adaptive { .. } => None,
        }
    }

    /// `alpha_0`: `delta^{-1/3}` for the adaptive rule, `alpha_{0,1}` otherwise.
    pub fn initial_anchor(&self) -> f64 {
        match self.rule {
            StepRule::Adaptive { delta, .. } => adaptive_alpha(delta),
            _ => self.prescribed(0).expect("prescribed rule"),
        }
    }

    pub fn initial_state(&self, keep_history: bool) -> StepState {
        StepState {
            v: match self.rule {
                StepRule::Adaptive { delta, .. } => Some(delta),
                _ => None,
            },
            epoch: 0,
            current: Vec::with_capacity(self.n),
            last_alpha_of_prev_epoch: None,
            keep_history,
            history: Vec::new(),
        }
    }

    /// Compute `alpha_{K,i}` and advance the state. For the adaptive rule the
    /// accumulator absorbs `beta * dnorm2` before the step is read off.
    pub fn step_value(&self, state: &mut StepState, k: usize, i: usize, dnorm2: f64) -> Result<f64> {
        if k != state.epoch || i != state.current.len() + 1 || i > self.n {
            return Err(Error::Precondition(format!(
                "step ({k}, {i}) requested but the state expects ({}, {})",
                state.epoch,
                state.current.len() + 1
            )));
        }
        let alpha = match self.rule {
            StepRule::Adaptive { beta, .. } => {
                let v = state.v.as_mut().expect("adaptive state carries v");
                *v += beta * dnorm2;
                adaptive_alpha(*v)
            }
            _ => self.prescribed(k).expect("prescribed rule"),
        };
        state.current.push(alpha);
        if state.current.len() == self.n {
            state.last_alpha_of_prev_epoch = Some(alpha);
            let done = std::mem::replace(&mut state.current, Vec::with_capacity(self.n));
            if state.keep_history {
                state.history.push(done);
            }
            state.epoch += 1;
        }
        Ok(alpha)
    }

    /// `alpha_K`: `alpha_{K-1,n}` for `K >= 1`, `initial_anchor` for `K = 0`.
    pub fn epoch_anchor(&self, state: &StepState, k: usize) -> Result<f64> {
        if k == 0 {
            return Ok(self.initial_anchor());
        }
        if k == state.epoch {
            return state.last_alpha_of_prev_epoch.ok_or(Error::EpochIncomplete(k - 1));
        }
        if k > state.epoch {
            return Err(Error::EpochIncomplete(k - 1));
        }
        anchor_from_history(self, &state.history, k)
    }
}

/// `alpha_K` read from a per-epoch step history.
pub fn anchor_from_history(strategy: &StepStrategy, history: &[Vec<f64>], k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(strategy.initial_anchor());
    }
    match history.get(k - 1) {
        Some(prev) if prev.len() == strategy.n => Ok(prev[strategy.n - 1]),
        _ => Err(Error::EpochIncomplete(k - 1)),
    }
}

/// Mutable step bookkeeping owned by one run.
#[derive(Clone, Debug, PartialEq)]
pub struct StepState {
    /// Adaptive accumulator `v_{K,i}`; `None` for prescribed rules.
    pub v: Option<f64>,
    epoch: usize,
    current: Vec<f64>,
    last_alpha_of_prev_epoch: Option<f64>,
    keep_history: bool,
    history: Vec<Vec<f64>>,
}

impl StepState {
    /// Epoch the next call to `step_value` belongs to.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Steps of the epoch in progress.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    /// Completed epochs, if history is kept.
    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexReport {
    pub ok: bool,
    /// `(K, i)` with `i` 1-based where the order first breaks.
    pub first_violation: Option<(usize, usize)>,
}

/// `alpha_{K,i-1} >= alpha_{K,i} >= alpha_{K+1,1}` over the whole history.
pub fn check_lex_monotone(history: &[Vec<f64>]) -> LexReport {
    let mut prev: Option<f64> = None;
    for (k, epoch) in history.iter().enumerate() {
        for (i, &a) in epoch.iter().enumerate() {
            if let Some(p) = prev {
                if a > p {
                    return LexReport { ok: false, first_violation: Some((k, i + 1)) };
                }
            }
            prev = Some(a);
        }
    }
    LexReport { ok: true, first_violation: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTolerances {
    /// Pass requires `alpha_{K,1} / alpha_{K,n} - 1 <= ratio_tol`.
    pub ratio_tol: f64,
    /// Pass requires `alpha_{K,1} <= alpha_threshold`.
    pub alpha_threshold: f64,
}

impl Default for AsymptoticTolerances {
    fn default() -> Self {
        AsymptoticTolerances { ratio_tol: 1e-3, alpha_threshold: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    /// `sum_{K <= K_max} alpha_{K,1}`
    pub sum_first: f64,
    /// `alpha_{K_max,1}`
    pub alpha_first: f64,
    /// `alpha_{K_max,1} / alpha_{K_max,n}`
    pub ratio: f64,
    pub ratio_ok: bool,
    pub alpha_small: bool,
    pub pass: bool,
}

/// Finite-horizon proxies for a divergent step sum, vanishing steps and a
/// within-epoch ratio tending to one.
pub fn check_asymptotic_conditions(
    history: &[Vec<f64>],
    k_max: usize,
    tol: AsymptoticTolerances,
) -> Result<AsymptoticReport> {
    let last = history
        .get(k_max)
        .filter(|e| !e.is_empty())
        .ok_or(Error::EpochIncomplete(k_max))?;
    let sum_first = history[..=k_max].iter().map(|e| e[0]).sum();
    let alpha_first = last[0];
    let ratio = alpha_first / last[last.len() - 1];
    let ratio_ok = ratio - 1.0 <= tol.ratio_tol;
    let alpha_small = alpha_first <= tol.alpha_threshold;
    Ok(AsymptoticReport { sum_first, alpha_first, ratio, ratio_ok, alpha_small, pass: ratio_ok && alpha_small })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_steps(s: &StepStrategy, epochs: usize, dn: impl Fn(usize, usize) -> f64) -> StepState {
        let mut st = s.initial_state(true);
        for k in 0..epochs {
            for i in 1..=s.n {
                s.step_value(&mut st, k, i, dn(k, i)).unwrap();
            }
        }
        st
    }

    #[test]
    fn constant_step() {
        let s = StepStrategy::new(StepRule::Constant { alpha: 0.5 }, 5).unwrap();
        let st = run_steps(&s, 3, |_, _| 7.0);
        assert!(st.history().iter().flatten().all(|&a| a == 0.1));
        for k in 0..4 {
            assert_eq!(s.epoch_anchor(&st, k).unwrap(), 0.1);
        }
    }

    #[test]
    fn adaptive_first_call() {
        let s = StepStrategy::new(StepRule::Adaptive { delta: 8.0, beta: 1.0 }, 2).unwrap();
        let mut st = s.initial_state(true);
        assert_eq!(s.epoch_anchor(&st, 0).unwrap(), 0.5);
        let a = s.step_value(&mut st, 0, 1, 19.0).unwrap();
        assert_eq!(st.v, Some(27.0));
        assert_eq!(a, 1.0 / 3.0);
    }

    #[test]
    fn adaptive_anchor_after_one_epoch() {
        let s = StepStrategy::new(StepRule::Adaptive { delta: 8.0, beta: 1.0 }, 2).unwrap();
        let mut st = s.initial_state(true);
        s.step_value(&mut st, 0, 1, 10.0).unwrap();
        assert!(matches!(s.epoch_anchor(&st, 1), Err(Error::EpochIncomplete(0))));
        s.step_value(&mut st, 0, 2, 9.0).unwrap();
        assert_eq!(s.epoch_anchor(&st, 1).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn sqrt_step() {
        let s = StepStrategy::new(StepRule::DecreasingSqrt, 2).unwrap();
        assert_eq!(s.prescribed(3), Some(0.25));
        assert_eq!(s.initial_anchor(), 0.5);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(StepStrategy::new(StepRule::Constant { alpha: 0.0 }, 3).is_err());
        assert!(StepStrategy::new(StepRule::DecreasingCbrtWithL { l: -1.0 }, 3).is_err());
        assert!(StepStrategy::new(StepRule::Adaptive { delta: 1.0, beta: 0.0 }, 3).is_err());
        assert!(StepStrategy::new(StepRule::DecreasingSqrt, 0).is_err());
    }

    #[test]
    fn out_of_order_step_rejected() {
        let s = StepStrategy::new(StepRule::DecreasingSqrt, 3).unwrap();
        let mut st = s.initial_state(false);
        assert!(s.step_value(&mut st, 0, 2, 0.0).is_err());
        assert!(s.step_value(&mut st, 1, 1, 0.0).is_err());
    }

    #[test]
    fn lex_violation_within_epoch() {
        let r = check_lex_monotone(&[vec![0.1, 0.2]]);
        assert_eq!(r, LexReport { ok: false, first_violation: Some((0, 2)) });
    }

    #[test]
    fn lex_violation_across_epochs() {
        let r = check_lex_monotone(&[vec![0.2, 0.1], vec![0.15, 0.1]]);
        assert_eq!(r.first_violation, Some((1, 1)));
    }

    #[test]
    fn sqrt_history_is_monotone() {
        let s = StepStrategy::new(StepRule::DecreasingSqrt, 4).unwrap();
        let st = run_steps(&s, 100, |_, _| 0.0);
        assert!(check_lex_monotone(st.history()).ok);
    }

    #[test]
    fn adaptive_history_is_monotone() {
        let s = StepStrategy::adaptive_default(3).unwrap();
        let st = run_steps(&s, 50, |k, i| ((k * 7 + i * 3) % 5) as f64);
        assert!(check_lex_monotone(st.history()).ok);
    }

    #[test]
    fn asymptotic_constant_flagged() {
        let s = StepStrategy::new(StepRule::Constant { alpha: 0.3 }, 3).unwrap();
        let st = run_steps(&s, 11, |_, _| 0.0);
        let r = check_asymptotic_conditions(st.history(), 10, AsymptoticTolerances::default()).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!((r.sum_first - 11.0 * 0.1).abs() < 1e-15);
        assert!(!r.alpha_small && !r.pass);
    }

    #[test]
    fn asymptotic_sqrt_at_ten_thousand() {
        let s = StepStrategy::new(StepRule::DecreasingSqrt, 2).unwrap();
        let st = run_steps(&s, 10_001, |_, _| 0.0);
        let r = check_asymptotic_conditions(st.history(), 10_000, AsymptoticTolerances::default()).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.alpha_first, 1.0 / (2.0 * 10_001f64.sqrt()));
        assert!(r.pass);
    }

    #[test]
    fn history_can_be_dropped() {
        let s = StepStrategy::new(StepRule::DecreasingSqrt, 2).unwrap();
        let mut st = s.initial_state(false);
        for k in 0..3 {
            for i in 1..=2 {
                s.step_value(&mut st, k, i, 0.0).unwrap();
            }
        }
        assert!(st.history().is_empty());
        assert_eq!(s.epoch_anchor(&st, 3).unwrap(), 1.0 / (2.0 * 3f64.sqrt()));
    }
}
