//! Finite-sum problems `F(x) = (1/n) sum_i f_i(x)` and their component oracles.
//!
//! Every component exposes a value, a direction `d_i` (the gradient when smooth,
//! a selection of a conservative field otherwise), its value-Lipschitz constant
//! `M_i` and, when smooth, its gradient-Lipschitz constant `L_i`. Constants are
//! closed forms per problem class.
//!
//! Nonsmooth selections use `sign(0) = 0` and `relu'(0) = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, norm_inf, norm_sq};
use crate::{Error, Result};

/// Problem classes of the built-in zoo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `log(1 + exp(-b_i <a_i, x>))`
    Logistic,
    /// `1 - sigmoid(b_i <a_i, x>)`, smooth and nonconvex.
    SigmoidNonconvex,
    /// `sum_j |x_j - b_ij|`; for `p = 1` the minimizers are the medians of `b`.
    Median,
    /// `|net(a_i; x) - y_i|` for a two-layer ReLU network, scalar output.
    ReluNet,
    /// `sqrt(1 + |x - c_i|^2) - 1`
    PseudoHuber,
    /// `<c_i, x>`
    Linear,
    /// `f_i = 0`
    Zero,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Logistic => "logistic",
            ProblemKind::SigmoidNonconvex => "sigmoid_nonconvex",
            ProblemKind::Median => "median",
            ProblemKind::ReluNet => "relu_net",
            ProblemKind::PseudoHuber => "pseudo_huber",
            ProblemKind::Linear => "linear",
            ProblemKind::Zero => "zero",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logistic" => ProblemKind::Logistic,
            "sigmoid_nonconvex" | "sigmoid" => ProblemKind::SigmoidNonconvex,
            "median" => ProblemKind::Median,
            "relu_net" => ProblemKind::ReluNet,
            "pseudo_huber" => ProblemKind::PseudoHuber,
            "linear" => ProblemKind::Linear,
            "zero" => ProblemKind::Zero,
            other => return Err(Error::invalid(format!("unknown problem kind `{other}`"))),
        })
    }
}

/// Raw data of one component `f_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentData {
    Logistic { a: Vec<f64>, b: f64 },
    Sigmoid { a: Vec<f64>, b: f64 },
    AbsDeviation { b: Vec<f64> },
    /// Parameters are laid out as `[u_1, .., u_h, w_1, .., w_h]` with `u_k` of
    /// length `a.len()`.
    ReluNet { a: Vec<f64>, y: f64, hidden: usize },
    PseudoHuber { c: Vec<f64> },
    Linear { c: Vec<f64> },
    Zero { p: usize },
}

// 1 / (6 sqrt 3) = sup |sigmoid''|
const SIGMOID_CURVATURE: f64 = 0.096_225_044_864_937_63;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ComponentData {
    pub fn dim(&self) -> usize {
        match self {
            ComponentData::Logistic { a, .. } | ComponentData::Sigmoid { a, .. } => a.len(),
            ComponentData::AbsDeviation { b } => b.len(),
            ComponentData::ReluNet { a, hidden, .. } => hidden * (a.len() + 1),
            ComponentData::PseudoHuber { c } | ComponentData::Linear { c } => c.len(),
            ComponentData::Zero { p } => *p,
        }
    }

    fn relu_net_output(a: &[f64], hidden: usize, x: &[f64]) -> f64 {
        let q = a.len();
        let (u, w) = x.split_at(hidden * q);
        (0..hidden)
            .map(|k| w[k] * dot(&u[k * q..(k + 1) * q], a).max(0.0))
            .sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ComponentData::Logistic { a, b } => softplus(-b * dot(a, x)),
            ComponentData::Sigmoid { a, b } => sigmoid(-b * dot(a, x)),
            ComponentData::AbsDeviation { b } => x.iter().zip(b).map(|(xj, bj)| (xj - bj).abs()).sum(),
            ComponentData::ReluNet { a, y, hidden } => (Self::relu_net_output(a, *hidden, x) - y).abs(),
            ComponentData::PseudoHuber { c } => {
                let r2: f64 = x.iter().zip(c).map(|(xj, cj)| (xj - cj) * (xj - cj)).sum();
                (1.0 + r2).sqrt() - 1.0
            }
            ComponentData::Linear { c } => dot(c, x),
            ComponentData::Zero { .. } => 0.0,
        }
    }

    pub fn direction(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ComponentData::Logistic { a, b } => {
                let s = -b * sigmoid(-b * dot(a, x));
                a.iter().map(|aj| s * aj).collect()
            }
            ComponentData::Sigmoid { a, b } => {
                let m = b * dot(a, x);
                let s = -b * sigmoid(m) * sigmoid(-m);
                a.iter().map(|aj| s * aj).collect()
            }
            ComponentData::AbsDeviation { b } => x.iter().zip(b).map(|(xj, bj)| sign(xj - bj)).collect(),
            ComponentData::ReluNet { a, y, hidden } => {
                let q = a.len();
                let h = *hidden;
                let s = sign(Self::relu_net_output(a, h, x) - y);
                let mut g = vec![0.0; h * (q + 1)];
                if s == 0.0 {
                    return g;
                }
                let (u, w) = x.split_at(h * q);
                for k in 0..h {
                    let pre = dot(&u[k * q..(k + 1) * q], a);
                    if pre > 0.0 {
                        for (gj, aj) in g[k * q..(k + 1) * q].iter_mut().zip(a) {
                            *gj = s * w[k] * aj;
                        }
                        g[h * q + k] = s * pre;
                    }
                }
                g
            }
            ComponentData::PseudoHuber { c } => {
                let r: Vec<f64> = x.iter().zip(c).map(|(xj, cj)| xj - cj).collect();
                let s = 1.0 / (1.0 + norm_sq(&r)).sqrt();
                r.iter().map(|rj| s * rj).collect()
            }
            ComponentData::Linear { c } => c.clone(),
            ComponentData::Zero { p } => vec![0.0; *p],
        }
    }

    /// Finite generator list of the field at `x`, when the class supports one.
    pub fn generators(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        match self {
            ComponentData::AbsDeviation { b } => {
                let mut out = vec![Vec::with_capacity(x.len())];
                for (xj, bj) in x.iter().zip(b) {
                    let r = xj - bj;
                    if r == 0.0 {
                        let mut next = Vec::with_capacity(out.len() * 2);
                        for g in &out {
                            for s in [-1.0, 1.0] {
                                let mut h = g.clone();
                                h.push(s);
                                next.push(h);
                            }
                        }
                        out = next;
                    } else {
                        for g in &mut out {
                            g.push(sign(r));
                        }
                    }
                }
                Some(out)
            }
            ComponentData::ReluNet { .. } => None,
            _ => Some(vec![self.direction(x)]),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, ComponentData::AbsDeviation { .. } | ComponentData::ReluNet { .. })
    }

    /// Closed-form `(M_i, L_i)`. `box_radius` bounds `|x|_inf` for classes whose
    /// constants only hold locally.
    fn constants(&self, box_radius: Option<f64>) -> Result<(f64, Option<f64>)> {
        Ok(match self {
            ComponentData::Logistic { a, .. } => (norm(a), Some(norm_sq(a) / 4.0)),
            ComponentData::Sigmoid { a, .. } => (norm(a) / 4.0, Some(norm_sq(a) * SIGMOID_CURVATURE)),
            ComponentData::AbsDeviation { b } => ((b.len() as f64).sqrt(), None),
            ComponentData::ReluNet { a, .. } => {
                let r = box_radius.ok_or_else(|| Error::invalid("relu_net needs a box radius"))?;
                (r * norm(a) * (self.dim() as f64).sqrt(), None)
            }
            ComponentData::PseudoHuber { .. } => (1.0, Some(1.0)),
            ComponentData::Linear { c } => (norm(c), Some(0.0)),
            ComponentData::Zero { .. } => (0.0, Some(0.0)),
        })
    }
}

/// One component `f_i` with its constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentOracle {
    pub data: ComponentData,
    /// `M_i`: bound on `|d_i(x)|`.
    pub lipschitz_value: f64,
    /// `L_i`, present iff the component is smooth.
    pub lipschitz_gradient: Option<f64>,
}

impl ComponentOracle {
    pub fn new(data: ComponentData, box_radius: Option<f64>) -> Result<Self> {
        let (m, l) = data.constants(box_radius)?;
        Ok(ComponentOracle { data, lipschitz_value: m, lipschitz_gradient: l })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.data.value(x)
    }

    pub fn direction(&self, x: &[f64]) -> Vec<f64> {
        self.data.direction(x)
    }

    pub fn generators(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.data.generators(x)
    }

    pub fn is_smooth(&self) -> bool {
        self.lipschitz_gradient.is_some()
    }
}

/// `F = (1/n) sum_i f_i` together with `M = sqrt((1/n) sum M_i^2)` and
/// `L = (1/n) sum L_i`.
///
/// Immutable after construction; deserialization recomputes the constants and
/// rejects documents whose stored values disagree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct FiniteSumProblem {
    kind: ProblemKind,
    seed: Option<u64>,
    p: usize,
    components: Vec<ComponentOracle>,
    lipschitz_value: f64,
    lipschitz_gradient: Option<f64>,
    f_star_lower: Option<f64>,
    known_solution: Option<Vec<f64>>,
    box_radius: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: ProblemKind,
    seed: Option<u64>,
    n: usize,
    p: usize,
    lipschitz_value: f64,
    lipschitz_gradient: Option<f64>,
    f_star_lower: Option<f64>,
    known_solution: Option<Vec<f64>>,
    box_radius: Option<f64>,
    components: Vec<ComponentOracle>,
}

impl From<FiniteSumProblem> for RawProblem {
    fn from(p: FiniteSumProblem) -> Self {
        RawProblem {
            kind: p.kind,
            seed: p.seed,
            n: p.components.len(),
            p: p.p,
            lipschitz_value: p.lipschitz_value,
            lipschitz_gradient: p.lipschitz_gradient,
            f_star_lower: p.f_star_lower,
            known_solution: p.known_solution,
            box_radius: p.box_radius,
            components: p.components,
        }
    }
}

impl TryFrom<RawProblem> for FiniteSumProblem {
    type Error = Error;

    fn try_from(raw: RawProblem) -> Result<Self> {
        if raw.n != raw.components.len() {
            return Err(Error::invalid(format!(
                "n = {} but {} components present",
                raw.n,
                raw.components.len()
            )));
        }
        for c in &raw.components {
            let fresh = ComponentOracle::new(c.data.clone(), raw.box_radius)?;
            if fresh.lipschitz_value != c.lipschitz_value || fresh.lipschitz_gradient != c.lipschitz_gradient {
                return Err(Error::invalid("component constants do not match their data"));
            }
        }
        let problem = FiniteSumProblem::assemble(
            raw.kind,
            raw.seed,
            raw.p,
            raw.components,
            raw.f_star_lower,
            raw.known_solution,
            raw.box_radius,
        )?;
        if problem.lipschitz_value != raw.lipschitz_value || problem.lipschitz_gradient != raw.lipschitz_gradient {
            return Err(Error::invalid("stored M/L differ from the values recomputed from components"));
        }
        Ok(problem)
    }
}

fn mean_constants(components: &[ComponentOracle]) -> (f64, Option<f64>) {
    let n = components.len() as f64;
    let m = (components.iter().map(|c| c.lipschitz_value * c.lipschitz_value).sum::<f64>() / n).sqrt();
    let l = components
        .iter()
        .map(|c| c.lipschitz_gradient)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    (m, l)
}

const MAX_GENERATORS: usize = 1 << 14;

impl FiniteSumProblem {
    fn assemble(
        kind: ProblemKind,
        seed: Option<u64>,
        p: usize,
        components: Vec<ComponentOracle>,
        f_star_lower: Option<f64>,
        known_solution: Option<Vec<f64>>,
        box_radius: Option<f64>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a finite sum needs at least one component"));
        }
        if p == 0 {
            return Err(Error::invalid("dimension p must be at least 1"));
        }
        for c in &components {
            if c.data.dim() != p {
                return Err(Error::Dimension { expected: p, got: c.data.dim() });
            }
        }
        if let Some(s) = &known_solution {
            if s.len() != p {
                return Err(Error::Dimension { expected: p, got: s.len() });
            }
        }
        let (m, l) = mean_constants(&components);
        Ok(FiniteSumProblem {
            kind,
            seed,
            p,
            components,
            lipschitz_value: m,
            lipschitz_gradient: l,
            f_star_lower,
            known_solution,
            box_radius,
        })
    }

    /// Build a problem from explicit component data.
    pub fn from_components(
        kind: ProblemKind,
        p: usize,
        data: Vec<ComponentData>,
        f_star_lower: Option<f64>,
        known_solution: Option<Vec<f64>>,
        box_radius: Option<f64>,
    ) -> Result<Self> {
        let components = data
            .into_iter()
            .map(|d| ComponentOracle::new(d, box_radius))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(kind, None, p, components, f_star_lower, known_solution, box_radius)
    }

    /// Logistic loss over the rows `a_i` with labels `b_i`.
    pub fn logistic(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid("features and labels differ in length"));
        }
        let p = a.first().map_or(0, Vec::len);
        let data = a.into_iter().zip(b).map(|(a, b)| ComponentData::Logistic { a, b }).collect();
        Self::from_components(ProblemKind::Logistic, p, data, Some(0.0), None, None)
    }

    /// `f_i(x) = |x - b_i|_1` with a coordinatewise median as known solution.
    pub fn median(b: Vec<Vec<f64>>) -> Result<Self> {
        let p = b.first().map_or(0, Vec::len);
        let solution = if b.iter().all(|r| r.len() == p) && p > 0 { Some(coordinatewise_median(&b)) } else { None };
        let data = b.into_iter().map(|b| ComponentData::AbsDeviation { b }).collect();
        Self::from_components(ProblemKind::Median, p, data, Some(0.0), solution, None)
    }

    /// `n` copies of the zero function on `R^p`.
    pub fn zero(n: usize, p: usize) -> Result<Self> {
        let data = (0..n).map(|_| ComponentData::Zero { p }).collect();
        Self::from_components(ProblemKind::Zero, p, data, Some(0.0), None, None)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn components(&self) -> &[ComponentOracle] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ComponentOracle {
        &self.components[i]
    }

    /// `M = sqrt((1/n) sum M_i^2)`.
    pub fn lipschitz_value(&self) -> f64 {
        self.lipschitz_value
    }

    /// `L = (1/n) sum L_i` when every component is smooth.
    pub fn lipschitz_gradient(&self) -> Option<f64> {
        self.lipschitz_gradient
    }

    pub fn is_smooth(&self) -> bool {
        self.lipschitz_gradient.is_some()
    }

    pub fn f_star_lower(&self) -> Option<f64> {
        self.f_star_lower
    }

    pub fn known_solution(&self) -> Option<&[f64]> {
        self.known_solution.as_deref()
    }

    /// Half-width of the `|.|_inf` box on which `M_i` is valid, if local.
    pub fn box_radius(&self) -> Option<f64> {
        self.box_radius
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        self.box_radius.map_or(true, |r| norm_inf(x) <= r)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::Dimension { expected: self.p, got: x.len() });
        }
        Ok(())
    }

    /// `F(x) = (1/n) sum_i f_i(x)`.
    pub fn full_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.components.iter().map(|c| c.value(x)).sum::<f64>() / self.n() as f64)
    }

    /// `(1/n) sum_i d_i(x)`; the gradient of `F` for smooth problems.
    pub fn full_direction(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut acc = vec![0.0; self.p];
        for c in &self.components {
            for (a, d) in acc.iter_mut().zip(c.direction(x)) {
                *a += d;
            }
        }
        let n = self.n() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// Distinct elements of `{(1/n) sum_i g_i : g_i in generators_i(x)}`.
    pub fn generator_set(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let mut sums: Vec<Vec<f64>> = vec![vec![0.0; self.p]];
        for (i, c) in self.components.iter().enumerate() {
            let gens = c.generators(x).ok_or_else(|| {
                Error::Unsupported(format!("component {i} ({}) exposes no generators", self.kind.name()))
            })?;
            if gens.len() == 1 {
                for s in &mut sums {
                    for (a, g) in s.iter_mut().zip(&gens[0]) {
                        *a += g;
                    }
                }
                continue;
            }
            let mut next = Vec::with_capacity(sums.len() * gens.len());
            for s in &sums {
                for g in &gens {
                    next.push(s.iter().zip(g).map(|(a, b)| a + b).collect::<Vec<f64>>());
                }
            }
            sums = dedup_vectors(next);
            if sums.len() > MAX_GENERATORS {
                return Err(Error::Unsupported(format!("more than {MAX_GENERATORS} generators at this point")));
            }
        }
        let n = self.n() as f64;
        let scaled = sums.into_iter().map(|s| s.into_iter().map(|a| a / n).collect()).collect();
        Ok(dedup_vectors(scaled))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn dedup_vectors(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let dup = out.iter().any(|w| {
            v.iter().zip(w).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())))
        });
        if !dup {
            out.push(v);
        }
    }
    out
}

/// Coordinatewise median; the midpoint of the two central order statistics
/// when `n` is even.
pub fn coordinatewise_median(rows: &[Vec<f64>]) -> Vec<f64> {
    let p = rows[0].len();
    let n = rows.len();
    (0..p)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// Box half-width used for `relu_net` instances.
pub const RELU_BOX_RADIUS: f64 = 4.0;

fn normal_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

/// Hidden width and input dimension of the `relu_net` architecture for a
/// parameter dimension `p = h (q + 1)`.
pub fn relu_net_shape(p: usize) -> Result<(usize, usize)> {
    (1..=16usize)
        .rev()
        .find(|h| p % h == 0 && p / h >= 2)
        .map(|h| (h, p / h - 1))
        .ok_or_else(|| Error::invalid("relu_net needs p >= 2"))
}

/// Seeded instance of the zoo. Deterministic in `seed`.
///
/// Features are standard normal. Logistic and sigmoid labels come from a
/// standard-normal planted direction with unit label noise.
pub fn make_problem(kind: ProblemKind, n: usize, p: usize, seed: u64) -> Result<FiniteSumProblem> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("n and p must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted_labels = |rng: &mut ChaCha8Rng| {
        let w = normal_vec(rng, p, 1.0);
        (0..n)
            .map(|_| {
                let a = normal_vec(rng, p, 1.0);
                let noise: f64 = StandardNormal.sample(rng);
                let b = if dot(&a, &w) + noise >= 0.0 { 1.0 } else { -1.0 };
                (a, b)
            })
            .collect::<Vec<_>>()
    };
    let mut problem = match kind {
        ProblemKind::Logistic => {
            let data = planted_labels(&mut rng).into_iter().map(|(a, b)| ComponentData::Logistic { a, b }).collect();
            FiniteSumProblem::from_components(kind, p, data, Some(0.0), None, None)?
        }
        ProblemKind::SigmoidNonconvex => {
            let data = planted_labels(&mut rng).into_iter().map(|(a, b)| ComponentData::Sigmoid { a, b }).collect();
            FiniteSumProblem::from_components(kind, p, data, Some(0.0), None, None)?
        }
        ProblemKind::Median => {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(&mut rng, p, 1.0)).collect();
            FiniteSumProblem::median(rows)?
        }
        ProblemKind::ReluNet => {
            let (h, q) = relu_net_shape(p)?;
            let r = RELU_BOX_RADIUS;
            let mut teacher = normal_vec(&mut rng, h * q, 1.0 / (q as f64).sqrt());
            teacher.extend(normal_vec(&mut rng, h, 1.0 / (h as f64).sqrt()));
            for t in &mut teacher {
                *t = t.clamp(-r, r);
            }
            let data = (0..n)
                .map(|_| {
                    let a = normal_vec(&mut rng, q, 1.0);
                    let y = ComponentData::relu_net_output(&a, h, &teacher);
                    ComponentData::ReluNet { a, y, hidden: h }
                })
                .collect();
            FiniteSumProblem::from_components(kind, p, data, Some(0.0), Some(teacher), Some(r))?
        }
        ProblemKind::PseudoHuber => {
            let data = (0..n).map(|_| ComponentData::PseudoHuber { c: normal_vec(&mut rng, p, 1.0) }).collect();
            FiniteSumProblem::from_components(kind, p, data, Some(0.0), None, None)?
        }
        ProblemKind::Linear => {
            let data = (0..n).map(|_| ComponentData::Linear { c: normal_vec(&mut rng, p, 1.0) }).collect();
            FiniteSumProblem::from_components(kind, p, data, None, None, None)?
        }
        ProblemKind::Zero => FiniteSumProblem::zero(n, p)?,
    };
    problem.seed = Some(seed);
    Ok(problem)
}

/// Max over coordinates of `|fd_j - g_j| / max(1, |g_j|)` with central
/// differences of step `h` on `F` against `full_direction`.
pub fn finite_diff_check(problem: &FiniteSumProblem, x: &[f64], h: f64) -> Result<f64> {
    if !problem.is_smooth() {
        return Err(Error::Unsupported(format!("{} is not smooth", problem.kind().name())));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let g = problem.full_direction(x)?;
    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let fp = problem.full_value(&probe)?;
        probe[j] = x[j] - h;
        let fm = problem.full_value(&probe)?;
        probe[j] = x[j];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
    }
    Ok(worst)
}
