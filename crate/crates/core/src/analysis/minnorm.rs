//! Minimum-norm point of the convex hull of finitely many vectors (Wolfe's
//! method) and the criticality measure built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, norm_sq};
use crate::oracles::FiniteSumProblem;
use crate::{Error, Result};

/// Stop when `<v, g - v> >= -STOP_TOL` for every generator `g`.
pub const STOP_TOL: f64 = 1e-10;
const MAX_MAJOR: usize = 1000;
const POSITIVE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinNormResult {
    pub point: Vec<f64>,
    /// Active generators and their convex weights.
    pub weights: Vec<(usize, f64)>,
    pub iterations: usize,
    /// `min_g <v, g - v>`; nonnegative at an exact solution.
    pub certificate: f64,
}

fn combination(gens: &[Vec<f64>], set: &[usize], lam: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; gens[0].len()];
    for (&j, &l) in set.iter().zip(lam) {
        for (xi, gi) in x.iter_mut().zip(&gens[j]) {
            *xi += l * gi;
        }
    }
    x
}

/// Minimizer of `|sum mu_j g_j|` over the affine hull of the active set.
fn affine_minimizer(gens: &[Vec<f64>], set: &[usize]) -> Vec<f64> {
    let m = set.len();
    let kkt = DMatrix::from_fn(m + 1, m + 1, |r, c| match (r < m, c < m) {
        (true, true) => dot(&gens[set[r]], &gens[set[c]]),
        (false, false) => 0.0,
        _ => 1.0,
    });
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = kkt
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .expect("both factors were requested");
    let mu: Vec<f64> = (0..m).map(|j| sol[j]).collect();
    let total: f64 = mu.iter().sum();
    mu.into_iter().map(|v| v / total).collect()
}

fn certificate(gens: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let xx = norm_sq(x);
    gens.iter()
        .enumerate()
        .map(|(j, g)| (j, dot(x, g) - xx))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty generator list")
}

/// Minimum-norm element of `conv(gens)`.
pub fn min_norm_point(gens: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(min_norm_point_detailed(gens)?.point)
}

pub fn min_norm_point_detailed(gens: &[Vec<f64>]) -> Result<MinNormResult> {
    let first = gens.first().ok_or_else(|| Error::invalid("min-norm point of an empty set"))?;
    let p = first.len();
    if let Some(g) = gens.iter().find(|g| g.len() != p) {
        return Err(Error::Dimension { expected: p, got: g.len() });
    }
    let start = (0..gens.len())
        .min_by(|&a, &b| norm_sq(&gens[a]).total_cmp(&norm_sq(&gens[b])))
        .expect("nonempty");
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let mut x = gens[start].clone();
    let mut iterations = 0;
    while iterations < MAX_MAJOR {
        iterations += 1;
        let (j, gap) = certificate(gens, &x);
        if gap >= -STOP_TOL {
            break;
        }
        if let Some(pos) = set.iter().position(|&s| s == j) {
            // affine solve was inexact: exact line search towards g_j
            let dir: Vec<f64> = gens[j].iter().zip(&x).map(|(g, v)| g - v).collect();
            let t = (-dot(&x, &dir) / norm_sq(&dir)).clamp(0.0, 1.0);
            if !(t > 0.0) {
                break;
            }
            for l in lam.iter_mut() {
                *l *= 1.0 - t;
            }
            lam[pos] += t;
            x = combination(gens, &set, &lam);
            continue;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            let mu = affine_minimizer(gens, &set);
            if mu.iter().all(|&m| m > POSITIVE) {
                lam = mu;
                x = combination(gens, &set, &lam);
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &m) in lam.iter().zip(&mu) {
                if m <= POSITIVE && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            let mut next_set = Vec::with_capacity(set.len());
            let mut next_lam = Vec::with_capacity(set.len());
            for ((&s, &l), &m) in set.iter().zip(&lam).zip(&mu) {
                let v = (1.0 - theta) * l + theta * m;
                if v > POSITIVE {
                    next_set.push(s);
                    next_lam.push(v);
                }
            }
            if next_set.is_empty() {
                // numerically degenerate; keep the newest generator
                next_set.push(*set.last().expect("nonempty"));
                next_lam.push(1.0);
            }
            let total: f64 = next_lam.iter().sum();
            lam = next_lam.into_iter().map(|v| v / total).collect();
            set = next_set;
            x = combination(gens, &set, &lam);
            if set.len() == 1 {
                break;
            }
        }
    }
    let (_, cert) = certificate(gens, &x);
    Ok(MinNormResult { point: x, weights: set.into_iter().zip(lam).collect(), iterations, certificate: cert })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub x: Vec<f64>,
    pub min_norm: Vec<f64>,
    /// `|min_norm|`; zero exactly at critical points.
    pub measure: f64,
}

/// Distance from the origin to `conv` of the generator set at `x`.
pub fn criticality(problem: &FiniteSumProblem, x: &[f64]) -> Result<CriticalityReport> {
    let gens = problem.generator_set(x)?;
    let v = min_norm_point(&gens)?;
    Ok(CriticalityReport { x: x.to_vec(), measure: norm(&v), min_norm: v })
}
