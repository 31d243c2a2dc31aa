//! Cartesian parameter sweeps over a config template.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde_json::Value;

use wrdescent::analysis::{certify_run, log_spaced, loglog_slope, min_grad_at};
use wrdescent::engine::RunTrace;
use wrdescent::traceio::fmt_f64;

use crate::config::{parse_scalar, set_key, ExperimentConfig};
use crate::experiment::execute;

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<Value>,
}

/// Splits on commas outside brackets, braces and quotes.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut quoted, mut escaped, mut start) = (0i32, false, false, 0);
    for (i, c) in text.char_indices() {
        if quoted {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => quoted = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => quoted = true,
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

impl std::str::FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, list) = s.split_once('=').ok_or_else(|| anyhow!("expected key=v1,v2,.. got `{s}`"))?;
        let values: Vec<Value> = split_top_level(list).into_iter().map(|v| parse_scalar(v.trim())).collect();
        if key.trim().is_empty() || list.trim().is_empty() {
            bail!("axis `{s}` needs a key and at least one value");
        }
        Ok(Axis { key: key.trim().to_string(), values })
    }
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub labels: Vec<String>,
    pub status: String,
    pub message: String,
    pub final_f: Option<f64>,
    pub min_grad: Option<f64>,
    pub corollary: Option<String>,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
    pub slope: Option<f64>,
    /// `(N, min_{K <= N} |grad F(x_K)|^2)`
    pub curve: Vec<(usize, f64)>,
}

/// Horizons for the slope fit: nine log-spaced points over the last two decades of the run.
pub fn slope_horizons(epochs: usize) -> Vec<usize> {
    log_spaced((epochs / 100).max(1), epochs, 9)
}

fn summarize(labels: Vec<String>, trace: &RunTrace) -> CellResult {
    let e = trace.completed_epochs();
    let status = if trace.abort.is_some() { "aborted" } else { "ok" };
    let message = trace.abort.as_ref().map(|a| a.reason.clone()).unwrap_or_default();
    let cert = certify_run(trace, None).ok();
    let last_row = cert.as_ref().and_then(|c| c.rows.last());
    let curve_ns = if e > 0 { log_spaced(1, e, 20) } else { vec![0] };
    let curve = min_grad_at(&trace.grad_norm_sq, &curve_ns)
        .map(|v| curve_ns.into_iter().zip(v).collect())
        .unwrap_or_default();
    let slope = if e >= 2 {
        let hs = slope_horizons(e);
        min_grad_at(&trace.grad_norm_sq, &hs).ok().and_then(|g| {
            let x: Vec<f64> = hs.iter().map(|&h| h as f64).collect();
            loglog_slope(&x, &g).ok()
        })
    } else {
        None
    };
    CellResult {
        labels,
        status: status.into(),
        message,
        final_f: trace.f_values.last().copied(),
        min_grad: trace.grad_norm_sq.iter().copied().reduce(f64::min),
        corollary: cert.as_ref().map(|c| c.corollary.name().to_string()),
        bound: last_row.map(|r| r.bound),
        pass: cert.as_ref().map(|c| c.pass),
        slope,
        curve,
    }
}

fn failed(labels: Vec<String>, err: anyhow::Error) -> CellResult {
    CellResult {
        labels,
        status: "error".into(),
        message: format!("{err:#}"),
        final_f: None,
        min_grad: None,
        corollary: None,
        bound: None,
        pass: None,
        slope: None,
        curve: Vec::new(),
    }
}

fn run_cell(template: &Value, axes: &[Axis], picks: &[usize]) -> CellResult {
    let labels: Vec<String> = axes.iter().zip(picks).map(|(a, &j)| label(&a.values[j])).collect();
    let mut doc = template.clone();
    for (a, &j) in axes.iter().zip(picks) {
        if let Err(e) = set_key(&mut doc, &a.key, a.values[j].clone()) {
            return failed(labels, e);
        }
    }
    match ExperimentConfig::from_value(doc).and_then(|c| execute(&c)) {
        Ok(trace) => summarize(labels, &trace),
        Err(e) => failed(labels, e),
    }
}

/// Index tuples of the cartesian product, last axis fastest.
fn grid(axes: &[Axis]) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new()];
    for a in axes {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                (0..a.values.len()).map(move |j| {
                    let mut next = c.clone();
                    next.push(j);
                    next
                })
            })
            .collect();
    }
    cells
}

pub fn run_sweep(template: &Value, axes: &[Axis]) -> Result<Vec<CellResult>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        bail!("sweep needs at least one axis with at least one value");
    }
    Ok(grid(axes).par_iter().map(|picks| run_cell(template, axes, picks)).collect())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_sweep(dir: &Path, axes: &[Axis], cells: &[CellResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let keys: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();

    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let mut header: Vec<&str> = keys.clone();
    header.extend(["status", "final_f", "min_grad", "corollary", "bound", "pass", "slope", "message"]);
    w.write_record(&header)?;
    for c in cells {
        let mut row = c.labels.clone();
        row.extend([
            c.status.clone(),
            opt(c.final_f),
            opt(c.min_grad),
            c.corollary.clone().unwrap_or_default(),
            opt(c.bound),
            c.pass.map(|p| p.to_string()).unwrap_or_default(),
            opt(c.slope),
            c.message.clone(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("curves.csv"))?;
    let mut header: Vec<&str> = vec!["cell"];
    header.extend(keys.iter().copied());
    header.extend(["N", "min_grad"]);
    w.write_record(&header)?;
    for (idx, c) in cells.iter().enumerate() {
        for &(n, g) in &c.curve {
            let mut row = vec![idx.to_string()];
            row.extend(c.labels.iter().cloned());
            row.extend([n.to_string(), fmt_f64(g)]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
