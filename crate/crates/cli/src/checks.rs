//! Named checks over a recorded trace, as run by `verify` and `run`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use wrdescent::analysis::{
    apt_deviation, certify_run, check_adaptive_ratio, check_claim2, check_descent_decomposition,
    check_summability_ada, claim1_trace, criticality, gamma_trace, log_spaced, BoundReport, Corollary, Interpolant,
};
use wrdescent::engine::{replay, RunTrace};
use wrdescent::steps::check_lex_monotone;
use wrdescent::traceio::{write_certificate_csv, write_criticality_csv, write_gamma_csv};
use wrdescent::Error;

pub const CHECK_NAMES: [&str; 16] = [
    "claim1",
    "claim2",
    "descent",
    "cor",
    "cor1",
    "cor2",
    "cor3",
    "cor4",
    "cor5",
    "summability",
    "adaptive_ratio",
    "lex",
    "gamma",
    "criticality",
    "replay",
    "apt",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub detail: Value,
}

/// Files a check wants written next to the verify report.
#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

enum Verdict {
    Done { pass: bool, detail: Value },
    Skip(String),
}

fn done(pass: bool, detail: Value) -> wrdescent::Result<Verdict> {
    Ok(Verdict::Done { pass, detail })
}

fn certificate(trace: &RunTrace, which: Option<Corollary>, out: &mut Artifacts) -> wrdescent::Result<Verdict> {
    let report: BoundReport = certify_run(trace, which)?;
    let mut csv = Vec::new();
    write_certificate_csv(&report, &mut csv)?;
    out.files.push((format!("certificate_{}.csv", report.corollary.name()), csv));
    let worst = report.rows.iter().min_by(|a, b| a.slack.total_cmp(&b.slack));
    done(
        report.pass,
        json!({
            "corollary": report.corollary.name(),
            "horizons": report.rows.len(),
            "failing_horizons": report.rows.iter().filter(|r| !r.pass).count(),
            "f0_minus_fstar": report.f0_minus_fstar,
            "l": report.l,
            "m": report.m,
            "final": report.rows.last(),
            "min_slack": worst.map(|r| r.slack),
        }),
    )
}

fn evaluate(name: &str, trace: &RunTrace, out: &mut Artifacts) -> wrdescent::Result<Verdict> {
    let last = trace.completed_epochs();
    match name {
        "claim1" => {
            let reports = claim1_trace(trace)?;
            let worst = reports.iter().min_by(|a, b| a.min_rel_slack.total_cmp(&b.min_rel_slack));
            done(
                reports.iter().all(|r| r.pass),
                json!({
                    "epochs": reports.len(),
                    "min_rel_slack": worst.map(|r| r.min_rel_slack),
                    "worst_epoch": worst.map(|r| r.k),
                }),
            )
        }
        "claim2" => {
            trace.require_full()?;
            let reports = (0..trace.epochs.len()).map(|k| check_claim2(trace, k)).collect::<Result<Vec<_>, _>>()?;
            let stated_fail: Vec<usize> = reports.iter().filter(|r| !r.pass_printed).map(|r| r.k).collect();
            let valid_fail = reports.iter().filter(|r| !r.pass_valid).count();
            let min = |f: fn(&wrdescent::analysis::EpochDescentReport) -> f64| {
                reports.iter().map(f).fold(f64::INFINITY, f64::min)
            };
            done(
                stated_fail.is_empty(),
                json!({
                    "epochs": reports.len(),
                    "stated_failures": stated_fail.len(),
                    "first_stated_failure": stated_fail.first(),
                    "min_rel_slack_stated": min(|r| r.rel_slack_printed),
                    "kept_term_failures": valid_fail,
                    "min_rel_slack_kept_term": min(|r| r.rel_slack_valid),
                }),
            )
        }
        "descent" => {
            trace.require_full()?;
            let reports = (0..trace.epochs.len())
                .map(|k| check_descent_decomposition(trace, k))
                .collect::<Result<Vec<_>, _>>()?;
            done(
                reports.iter().all(|r| r.pass),
                json!({
                    "epochs": reports.len(),
                    "failures": reports.iter().filter(|r| !r.pass).count(),
                    "min_rel_slack": reports.iter().map(|r| r.rel_slack).fold(f64::INFINITY, f64::min),
                }),
            )
        }
        "cor" => certificate(trace, None, out),
        "cor1" | "cor2" | "cor3" | "cor4" | "cor5" => certificate(trace, Some(name.parse()?), out),
        "summability" => {
            if trace.epochs.is_empty() {
                return Err(Error::EpochIncomplete(0));
            }
            let r = check_summability_ada(trace, trace.epochs.len() - 1)?;
            done(r.pass, serde_json::to_value(&r)?)
        }
        "adaptive_ratio" => {
            let r = check_adaptive_ratio(trace)?;
            done(!r.violates_m_squared, serde_json::to_value(&r)?)
        }
        "lex" => {
            let r = check_lex_monotone(&trace.alpha_history()?);
            done(r.ok, serde_json::to_value(&r)?)
        }
        "gamma" => {
            let g = gamma_trace(trace, trace.problem.lipschitz_value())?;
            let mut csv = Vec::new();
            write_gamma_csv(&g, &mut csv)?;
            out.files.push(("gamma.csv".into(), csv));
            let (first, final_gamma) = (g.intervals.first().map(|i| i.gamma), g.intervals.last().map(|i| i.gamma));
            done(
                g.lambdas_ok(),
                json!({
                    "lambdas_ok": g.lambdas_ok(),
                    "nonincreasing": g.is_nonincreasing(),
                    "gamma_first": first,
                    "gamma_last": final_gamma,
                }),
            )
        }
        "criticality" => {
            let rows = criticality_rows(trace)?;
            let mut csv = Vec::new();
            write_criticality_csv(&rows, &mut csv)?;
            out.files.push(("criticality.csv".into(), csv));
            let last_row = rows.last().map(|(k, r)| json!({ "k": k, "measure": r.measure }));
            done(rows.iter().all(|(_, r)| r.measure.is_finite()), json!({ "checkpoints": rows.len(), "last": last_row }))
        }
        "replay" => {
            let r = replay(trace)?;
            done(r.ok, serde_json::to_value(&r)?)
        }
        "apt" => {
            let horizon_total = Interpolant::from_trace(trace)?.horizon();
            if !(horizon_total > 0.0) {
                return Ok(Verdict::Skip("run has no elapsed interpolant time".into()));
            }
            let window = horizon_total.min(1.0) / 2.0;
            let h = (window / 100.0).min(1e-3);
            let early = apt_deviation(trace, 0.0, window, h)?;
            let late = apt_deviation(trace, horizon_total - window, window, h)?;
            done(
                !early.step_too_large && !late.step_too_large,
                json!({ "window": window, "early": early, "late": late, "epochs": last }),
            )
        }
        other => Err(Error::InvalidParameter(format!("unknown check `{other}`"))),
    }
}

/// `K = 0` and up to ten log-spaced epochs through the end of the run.
fn criticality_rows(trace: &RunTrace) -> wrdescent::Result<Vec<(usize, wrdescent::analysis::CriticalityReport)>> {
    let last = trace.completed_epochs();
    let mut ks = vec![0];
    if last > 0 {
        ks.extend(log_spaced(1, last, 10));
    }
    ks.dedup();
    ks.into_iter().map(|k| Ok((k, criticality(&trace.problem, &trace.points[k])?))).collect()
}

pub fn validate_names(names: &[String]) -> Result<()> {
    for n in names {
        if !CHECK_NAMES.contains(&n.as_str()) {
            bail!("unknown check `{n}`; known checks: {}", CHECK_NAMES.join(", "));
        }
    }
    Ok(())
}

/// Runs each named check. Checks whose preconditions the trace does not meet
/// are reported as skipped.
pub fn run_checks(trace: &RunTrace, names: &[String]) -> Result<(Vec<CheckOutcome>, Artifacts)> {
    validate_names(names)?;
    let mut artifacts = Artifacts::default();
    let mut outcomes = Vec::with_capacity(names.len());
    for name in names {
        let verdict = match evaluate(name, trace, &mut artifacts) {
            Ok(v) => v,
            Err(e @ (Error::Precondition(_) | Error::Unsupported(_) | Error::EpochIncomplete(_))) => {
                Verdict::Skip(e.to_string())
            }
            Err(e) => return Err(anyhow::Error::new(e).context(format!("check `{name}`"))),
        };
        outcomes.push(match verdict {
            Verdict::Done { pass, detail } => CheckOutcome {
                name: name.clone(),
                status: if pass { Status::Pass } else { Status::Fail },
                reason: None,
                detail,
            },
            Verdict::Skip(reason) => {
                CheckOutcome { name: name.clone(), status: Status::Skipped, reason: Some(reason), detail: Value::Null }
            }
        });
    }
    Ok((outcomes, artifacts))
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.status != Status::Fail)
}

/// `verify.json` plus any per-check files.
pub fn write_report(dir: &Path, outcomes: &[CheckOutcome], artifacts: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes)?;
    }
    let doc = json!({ "pass": all_passed(outcomes), "checks": outcomes });
    fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

pub fn print_outcomes(outcomes: &[CheckOutcome]) {
    for o in outcomes {
        match o.status {
            Status::Pass => println!("PASS  {}", o.name),
            Status::Fail => println!("FAIL  {}", o.name),
            Status::Skipped => println!("SKIP  {}: {}", o.name, o.reason.as_deref().unwrap_or("")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wrdescent::engine::{run, RecordLevel, RunConfig};
    use wrdescent::oracles::{make_problem, ProblemKind};
    use wrdescent::schedules::{EvalPointPolicy, PermutationPolicy};
    use wrdescent::steps::{StepRule, StepStrategy};

    fn trace(kind: ProblemKind, rule: StepRule, level: RecordLevel) -> RunTrace {
        let p = make_problem(kind, 4, 2, 3).unwrap();
        let config = RunConfig {
            strategy: StepStrategy::new(rule, 4).unwrap(),
            eval_policy: EvalPointPolicy::Incremental,
            permutation: PermutationPolicy::Identity,
            x0: vec![0.5, -0.5],
            epochs: 20,
            record_level: level,
            monitor_radius: None,
        };
        run(&p, &config).unwrap()
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn incompatible_checks_skip() {
        let t = trace(ProblemKind::Median, StepRule::Constant { alpha: 0.1 }, RecordLevel::EpochOnly);
        let (out, _) = run_checks(&t, &names(&["claim1", "cor", "summability", "criticality"])).unwrap();
        let status: Vec<Status> = out.iter().map(|o| o.status).collect();
        assert_eq!(status, [Status::Skipped, Status::Skipped, Status::Skipped, Status::Pass]);
        assert!(all_passed(&out));
    }

    #[test]
    fn full_trace_passes_basic_checks() {
        let t = trace(ProblemKind::Logistic, StepRule::Adaptive { delta: 64.0, beta: 16.0 }, RecordLevel::Full);
        let (out, files) =
            run_checks(&t, &names(&["claim1", "descent", "cor", "summability", "lex", "replay", "gamma"])).unwrap();
        for o in &out {
            assert_eq!(o.status, Status::Pass, "{o:?}");
        }
        let written: Vec<&str> = files.files.iter().map(|f| f.0.as_str()).collect();
        assert_eq!(written, ["certificate_cor5.csv", "gamma.csv"]);
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(validate_names(&names(&["claim3"])).is_err());
    }
}
