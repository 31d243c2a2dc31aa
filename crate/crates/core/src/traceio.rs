//! Text forms of traces and reports.
//!
//! A trace file is one JSON header line followed by CSV blocks, each opened by
//! a `#name` line and a column line:
//!
//! ```text
//! {"format":"wrdescent-trace",...}
//! #points
//! k,x_1,..,x_p
//! #values
//! k,f,grad_norm_sq
//! #summary
//! k,f,grad_norm_sq,min_so_far,alpha_first,alpha_last,alpha_sum,v,x_norm
//! #epoch 0
//! i,component,alpha,dnorm2,v,weights,z_hat_1..,d_1..,z_1..
//! ```
//!
//! Numbers are written with 17 significant digits, which round-trips `f64`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{BoundReport, CriticalityReport, GammaTrace};
use crate::engine::{Abort, EpochRecord, EpochSummary, Excursion, InnerRecord, RunConfig, RunTrace};
use crate::oracles::FiniteSumProblem;
use crate::{Error, Result};

const FORMAT: &str = "wrdescent-trace";
const VERSION: u32 = 1;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    problem: FiniteSumProblem,
    config: RunConfig,
    abort: Option<Abort>,
    excursions: Vec<Excursion>,
}

fn axis_header(prefix: &str, p: usize) -> String {
    (1..=p).map(|j| format!("{prefix}_{j}")).collect::<Vec<_>>().join(",")
}

pub fn write_trace<W: Write>(trace: &RunTrace, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        problem: trace.problem.clone(),
        config: trace.config.clone(),
        abort: trace.abort.clone(),
        excursions: trace.excursions.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    let p = trace.problem.p();
    writeln!(out, "#points\nk,{}", axis_header("x", p))?;
    for (k, x) in trace.points.iter().enumerate() {
        writeln!(out, "{k},{}", join(x))?;
    }
    writeln!(out, "#values\nk,f,grad_norm_sq")?;
    for (k, (f, g)) in trace.f_values.iter().zip(&trace.grad_norm_sq).enumerate() {
        writeln!(out, "{k},{},{}", fmt_f64(*f), fmt_f64(*g))?;
    }
    writeln!(out, "#summary")?;
    write_summary_rows(&trace.summaries, &mut out)?;
    for e in &trace.epochs {
        writeln!(
            out,
            "#epoch {}\ni,component,alpha,dnorm2,v,weights,{},{},{}",
            e.k,
            axis_header("z_hat", p),
            axis_header("d", p),
            axis_header("z", p)
        )?;
        for (i, r) in e.inner.iter().enumerate() {
            let weights = r
                .weights
                .iter()
                .map(|(j, w)| format!("{j}:{}", fmt_f64(*w)))
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{},{},{},{},{},{weights},{},{},{}",
                i + 1,
                r.component,
                fmt_f64(r.alpha),
                fmt_f64(r.dnorm2),
                fmt_opt(r.v),
                join(&r.z_hat),
                join(&r.d),
                join(&r.z)
            )?;
        }
    }
    Ok(())
}

pub fn write_trace_file(trace: &RunTrace, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Trace(format!("bad number `{s}`")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Trace(format!("bad index `{s}`")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn parse_vec(fields: &[&str]) -> Result<Vec<f64>> {
    fields.iter().map(|s| parse_f64(s)).collect()
}

struct Block {
    name: String,
    rows: Vec<String>,
}

fn split_blocks(lines: impl Iterator<Item = std::io::Result<String>>) -> Result<Vec<Block>> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut expect_columns = false;
    for line in lines {
        let line = line?;
        if let Some(name) = line.strip_prefix('#') {
            blocks.push(Block { name: name.to_string(), rows: Vec::new() });
            expect_columns = true;
        } else if expect_columns {
            expect_columns = false;
        } else if !line.is_empty() {
            blocks
                .last_mut()
                .ok_or_else(|| Error::Trace("data before the first block".into()))?
                .rows
                .push(line);
        }
    }
    Ok(blocks)
}

fn parse_summary_row(line: &str) -> Result<EpochSummary> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 9 {
        return Err(Error::Trace(format!("summary row has {} fields", f.len())));
    }
    Ok(EpochSummary {
        k: parse_usize(f[0])?,
        f: parse_f64(f[1])?,
        grad_norm_sq: parse_f64(f[2])?,
        min_so_far: parse_f64(f[3])?,
        alpha_first: parse_f64(f[4])?,
        alpha_last: parse_f64(f[5])?,
        alpha_sum: parse_f64(f[6])?,
        v: parse_opt(f[7])?,
        x_norm: parse_f64(f[8])?,
    })
}

fn parse_inner_row(line: &str, p: usize) -> Result<InnerRecord> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 6 + 3 * p {
        return Err(Error::Trace(format!("epoch row has {} fields, expected {}", f.len(), 6 + 3 * p)));
    }
    let weights = f[5]
        .split('|')
        .map(|pair| {
            let (j, w) = pair.split_once(':').ok_or_else(|| Error::Trace(format!("bad weight `{pair}`")))?;
            Ok((parse_usize(j)?, parse_f64(w)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InnerRecord {
        component: parse_usize(f[1])?,
        alpha: parse_f64(f[2])?,
        dnorm2: parse_f64(f[3])?,
        v: parse_opt(f[4])?,
        weights,
        z_hat: parse_vec(&f[6..6 + p])?,
        d: parse_vec(&f[6 + p..6 + 2 * p])?,
        z: parse_vec(&f[6 + 2 * p..6 + 3 * p])?,
    })
}

pub fn read_trace<R: BufRead>(input: R) -> Result<RunTrace> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Trace("empty trace".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Trace(format!("unsupported trace format {} v{}", header.format, header.version)));
    }
    let p = header.problem.p();
    let mut trace = RunTrace {
        problem: header.problem,
        config: header.config,
        points: Vec::new(),
        f_values: Vec::new(),
        grad_norm_sq: Vec::new(),
        summaries: Vec::new(),
        epochs: Vec::new(),
        abort: header.abort,
        excursions: header.excursions,
    };
    for block in split_blocks(lines)? {
        match block.name.as_str() {
            "points" => {
                for row in &block.rows {
                    let f: Vec<&str> = row.split(',').collect();
                    if f.len() != p + 1 {
                        return Err(Error::Trace("point row has the wrong width".into()));
                    }
                    trace.points.push(parse_vec(&f[1..])?);
                }
            }
            "values" => {
                for row in &block.rows {
                    let f: Vec<&str> = row.split(',').collect();
                    if f.len() != 3 {
                        return Err(Error::Trace("value row has the wrong width".into()));
                    }
                    trace.f_values.push(parse_f64(f[1])?);
                    trace.grad_norm_sq.push(parse_f64(f[2])?);
                }
            }
            "summary" => {
                for row in &block.rows {
                    trace.summaries.push(parse_summary_row(row)?);
                }
            }
            name => {
                let k = name
                    .strip_prefix("epoch ")
                    .ok_or_else(|| Error::Trace(format!("unknown block `{name}`")))
                    .and_then(parse_usize)?;
                let inner = block.rows.iter().map(|r| parse_inner_row(r, p)).collect::<Result<Vec<_>>>()?;
                let order = inner.iter().map(|r| r.component).collect();
                trace.epochs.push(EpochRecord { k, order, inner });
            }
        }
    }
    let e = trace.summaries.len();
    if trace.points.len() != e + 1 || trace.f_values.len() != e + 1 {
        return Err(Error::Trace("block lengths disagree with the number of epochs".into()));
    }
    Ok(trace)
}

pub fn read_trace_file(path: &std::path::Path) -> Result<RunTrace> {
    let f = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(f))
}

pub const SUMMARY_COLUMNS: &str = "k,f,grad_norm_sq,min_so_far,alpha_first,alpha_last,alpha_sum,v,x_norm";

fn write_summary_rows<W: Write>(rows: &[EpochSummary], out: &mut W) -> Result<()> {
    writeln!(out, "{SUMMARY_COLUMNS}")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.k,
            fmt_f64(s.f),
            fmt_f64(s.grad_norm_sq),
            fmt_f64(s.min_so_far),
            fmt_f64(s.alpha_first),
            fmt_f64(s.alpha_last),
            fmt_f64(s.alpha_sum),
            fmt_opt(s.v),
            fmt_f64(s.x_norm)
        )?;
    }
    Ok(())
}

/// One row per completed epoch.
pub fn write_summary_csv<W: Write>(trace: &RunTrace, mut out: W) -> Result<()> {
    write_summary_rows(&trace.summaries, &mut out)
}

pub fn write_certificate_csv<W: Write>(report: &BoundReport, mut out: W) -> Result<()> {
    writeln!(out, "N,bound,observed,slack,pass")?;
    for r in &report.rows {
        writeln!(out, "{},{},{},{},{}", r.horizon, fmt_f64(r.bound), fmt_f64(r.observed), fmt_f64(r.slack), r.pass)?;
    }
    Ok(())
}

pub fn write_gamma_csv<W: Write>(gamma: &GammaTrace, mut out: W) -> Result<()> {
    writeln!(out, "k,tau_start,tau_end,gamma,ratio,lambda_max,lambda_ok")?;
    for g in &gamma.intervals {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            g.k,
            fmt_f64(g.t_start),
            fmt_f64(g.t_end),
            fmt_f64(g.gamma),
            fmt_f64(g.ratio),
            fmt_f64(g.lambda_max),
            g.lambda_ok
        )?;
    }
    Ok(())
}

pub fn write_criticality_csv<W: Write>(rows: &[(usize, CriticalityReport)], mut out: W) -> Result<()> {
    let p = rows.first().map_or(0, |(_, r)| r.x.len());
    writeln!(out, "k,measure,{},{}", axis_header("x", p), axis_header("v", p))?;
    for (k, r) in rows {
        writeln!(out, "{k},{},{},{}", fmt_f64(r.measure), join(&r.x), join(&r.min_norm))?;
    }
    Ok(())
}
