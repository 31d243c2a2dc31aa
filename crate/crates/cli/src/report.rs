//! Plot-ready files and a short summary for one trace.

use std::fs;
use std::path::Path;

use anyhow::Result;
use serde_json::{json, Value};

use wrdescent::analysis::{certify_run, gamma_trace};
use wrdescent::engine::RunTrace;
use wrdescent::traceio::{write_gamma_csv, write_summary_csv};

use crate::checks::run_checks;

pub fn build_report(trace: &RunTrace, dir: &Path) -> Result<Value> {
    fs::create_dir_all(dir)?;
    let mut summary = Vec::new();
    write_summary_csv(trace, &mut summary)?;
    fs::write(dir.join("summary.csv"), summary)?;

    let gamma = gamma_trace(trace, trace.problem.lipschitz_value()).ok();
    if let Some(g) = &gamma {
        let mut csv = Vec::new();
        write_gamma_csv(g, &mut csv)?;
        fs::write(dir.join("gamma.csv"), csv)?;
    }
    let (outcomes, artifacts) = run_checks(trace, &["criticality".to_string()])?;
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes)?;
    }

    let cert = certify_run(trace, None);
    let problem = &trace.problem;
    let e = trace.completed_epochs();
    let doc = json!({
        "problem": { "kind": problem.kind().name(), "n": problem.n(), "p": problem.p(), "seed": problem.seed() },
        "rule": trace.config.strategy.rule,
        "eval_policy": trace.config.eval_policy,
        "permutation": trace.config.permutation,
        "completed_epochs": e,
        "requested_epochs": trace.config.epochs,
        "abort": trace.abort,
        "excursions": trace.excursions.len(),
        "f_initial": trace.f_values.first(),
        "f_final": trace.f_values.last(),
        "min_grad_norm_sq": trace.grad_norm_sq.iter().copied().reduce(f64::min),
        "lipschitz_value": problem.lipschitz_value(),
        "lipschitz_gradient": problem.lipschitz_gradient(),
        "certificate": match &cert {
            Ok(c) => json!({ "corollary": c.corollary.name(), "pass": c.pass, "final": c.rows.last() }),
            Err(err) => json!({ "skipped": err.to_string() }),
        },
        "gamma_last": gamma.as_ref().and_then(|g| g.intervals.last().map(|i| i.gamma)),
        "criticality": outcomes[0].detail["last"],
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(doc)
}

pub fn print_summary(doc: &Value) {
    let p = &doc["problem"];
    println!("problem     {} n={} p={}", p["kind"].as_str().unwrap_or("?"), p["n"], p["p"]);
    println!("epochs      {} of {}", doc["completed_epochs"], doc["requested_epochs"]);
    if !doc["abort"].is_null() {
        println!("abort       {}", doc["abort"]["reason"].as_str().unwrap_or(""));
    }
    println!("F           {} -> {}", doc["f_initial"], doc["f_final"]);
    println!("min |grad|^2 {}", doc["min_grad_norm_sq"]);
    let c = &doc["certificate"];
    match c["corollary"].as_str() {
        Some(name) => println!("certificate {} {}", name, if c["pass"] == json!(true) { "pass" } else { "fail" }),
        None => println!("certificate skipped: {}", c["skipped"].as_str().unwrap_or("")),
    }
}
