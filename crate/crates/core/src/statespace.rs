//! Market state, pricing kernel, benchmark maps and the expectation engine.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::numeric::{gauss_hermite_normal, gauss_legendre, Rule};

/// Half-width of the truncated normal range used by panel quadrature.
pub const NORMAL_SPAN: f64 = 20.0;
pub const DEFAULT_NODES: usize = 256;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        std_normal().cdf(x)
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        std_normal().inverse_cdf(p)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Law of the scalar market state `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateDistribution {
    StandardNormal,
    Uniform { lo: f64, hi: f64 },
    Discrete(Vec<Atom>),
}

impl StateDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("uniform state", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn discrete(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("discrete state", "no atoms"));
        }
        for a in &atoms {
            if !(a.prob > 0.0) || !a.value.is_finite() {
                return Err(invalid(
                    "discrete state",
                    format!("atom ({}, {}) needs finite value and positive probability", a.value, a.prob),
                ));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("discrete state", format!("probabilities sum to {total}")));
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(Self::Discrete(atoms))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::StandardNormal => Ok(()),
            Self::Uniform { lo, hi } => Self::uniform(*lo, *hi).map(|_| ()),
            Self::Discrete(atoms) => Self::discrete(atoms.clone()).map(|_| ()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete(_))
    }

    /// Smallest closed interval carrying all the mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::StandardNormal => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Discrete(a) => (a[0].value, a[a.len() - 1].value),
        }
    }

    /// `P[lo <= W < hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        match self {
            Self::StandardNormal => {
                if lo > 0.0 {
                    (normal_cdf(-lo) - normal_cdf(-hi)).max(0.0)
                } else {
                    (normal_cdf(hi) - normal_cdf(lo)).max(0.0)
                }
            }
            Self::Uniform { lo: a, hi: b } => {
                let l = lo.max(*a);
                let h = hi.min(*b);
                if h > l {
                    (h - l) / (b - a)
                } else {
                    0.0
                }
            }
            Self::Discrete(atoms) => atoms
                .iter()
                .filter(|a| a.value >= lo && a.value < hi)
                .map(|a| a.prob)
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::StandardNormal => 0.0,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Discrete(a) => a.iter().map(|x| x.value * x.prob).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::StandardNormal => rng.sample(StandardNormal),
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms[atoms.len() - 1].value
            }
        }
    }
}

/// One analytic piece of a scalar map of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MapForm {
    Constant { value: f64 },
    Affine { slope: f64, intercept: f64 },
    /// `scale · exp(rate · w)`
    Exponential { scale: f64, rate: f64 },
}

impl MapForm {
    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            MapForm::Constant { value } => value,
            MapForm::Affine { slope, intercept } => {
                if slope == 0.0 {
                    intercept
                } else {
                    slope * w + intercept
                }
            }
            MapForm::Exponential { scale, rate } => {
                if rate == 0.0 {
                    scale
                } else {
                    scale * (rate * w).exp()
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            MapForm::Constant { .. } => true,
            MapForm::Affine { slope, .. } => slope == 0.0,
            MapForm::Exponential { scale, rate } => rate == 0.0 || scale == 0.0,
        }
    }

    /// Solutions of `eval(w) = level` for a strictly monotone piece.
    pub fn preimage(&self, level: f64) -> Option<f64> {
        match *self {
            MapForm::Constant { .. } => None,
            MapForm::Affine { slope, intercept } => {
                (slope != 0.0).then(|| (level - intercept) / slope)
            }
            MapForm::Exponential { scale, rate } => {
                if rate == 0.0 || scale == 0.0 || level / scale <= 0.0 {
                    None
                } else {
                    Some((level / scale).ln() / rate)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPiece {
    pub start: f64,
    pub form: MapForm,
}

/// Right-continuous piecewise map `w ↦ value`; piece `i` covers
/// `[start_i, start_{i+1})`, and the first piece also covers everything to
/// its left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMap {
    pieces: Vec<MapPiece>,
}

impl PiecewiseMap {
    pub fn new(pieces: Vec<MapPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("piecewise map", "no pieces"));
        }
        for w in pieces.windows(2) {
            if !(w[0].start < w[1].start) {
                return Err(invalid("piecewise map", "piece starts must be strictly increasing"));
            }
        }
        Ok(Self { pieces })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            pieces: vec![MapPiece {
                start: f64::NEG_INFINITY,
                form: MapForm::Constant { value },
            }],
        }
    }

    /// `lo` below `at`, `hi` from `at` on.
    pub fn step(lo: f64, hi: f64, at: f64) -> Self {
        Self {
            pieces: vec![
                MapPiece {
                    start: f64::NEG_INFINITY,
                    form: MapForm::Constant { value: lo },
                },
                MapPiece {
                    start: at,
                    form: MapForm::Constant { value: hi },
                },
            ],
        }
    }

    pub fn pieces(&self) -> &[MapPiece] {
        &self.pieces
    }

    fn index(&self, w: f64) -> usize {
        match self.pieces.iter().rposition(|p| p.start <= w) {
            Some(i) => i,
            None => 0,
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        self.pieces[self.index(w)].form.eval(w)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// Piece intervals `[lo, hi)` with their forms, covering the real line.
    pub fn intervals(&self) -> Vec<(f64, f64, MapForm)> {
        let n = self.pieces.len();
        (0..n)
            .map(|i| {
                let lo = if i == 0 { f64::NEG_INFINITY } else { self.pieces[i].start };
                let hi = if i + 1 < n { self.pieces[i + 1].start } else { f64::INFINITY };
                (lo, hi, self.pieces[i].form)
            })
            .collect()
    }
}

/// The state-price density `ξ(w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PricingKernel {
    Lognormal { rate: f64, premium: f64, horizon: f64 },
    Explicit(PiecewiseMap),
    Identity,
}

impl PricingKernel {
    pub fn lognormal(rate: f64, premium: f64, horizon: f64) -> Result<Self> {
        if !(rate.is_finite() && premium.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("lognormal kernel", "need finite rate/premium and positive horizon"));
        }
        Ok(Self::Lognormal { rate, premium, horizon })
    }

    /// Pieces of the kernel as a piecewise map.
    pub fn as_map(&self) -> PiecewiseMap {
        match self {
            Self::Lognormal { rate, premium, horizon } => {
                let m = (rate + 0.5 * premium * premium) * horizon;
                PiecewiseMap {
                    pieces: vec![MapPiece {
                        start: f64::NEG_INFINITY,
                        form: MapForm::Exponential {
                            scale: (-m).exp(),
                            rate: -premium * horizon.sqrt(),
                        },
                    }],
                }
            }
            Self::Explicit(m) => m.clone(),
            Self::Identity => PiecewiseMap {
                pieces: vec![MapPiece {
                    start: f64::NEG_INFINITY,
                    form: MapForm::Affine { slope: 1.0, intercept: 0.0 },
                }],
            },
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            Self::Lognormal { rate, premium, horizon } => {
                (-(rate + 0.5 * premium * premium) * horizon - premium * horizon.sqrt() * w).exp()
            }
            Self::Identity => w,
            Self::Explicit(ref m) => m.eval(w),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Explicit(m) => m.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// State values inside `(lo, hi)` where `ξ(w) = level` on a strictly
    /// monotone piece.
    pub fn preimages(&self, level: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (a, b, form) in self.as_map().intervals() {
            if let Some(w) = form.preimage(level) {
                if w >= a && w < b && w > lo && w < hi {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Essential infimum and supremum of `ξ` on `lo <= W < hi`, and the
    /// probability that `ξ` equals its infimum there.
    pub fn range_on(&self, dist: &StateDistribution, lo: f64, hi: f64) -> KernelRange {
        let mut out = KernelRange {
            inf: f64::INFINITY,
            sup: f64::NEG_INFINITY,
            mass_at_inf: 0.0,
        };
        if let StateDistribution::Discrete(atoms) = dist {
            let vals: Vec<(f64, f64)> = atoms
                .iter()
                .filter(|a| a.value >= lo && a.value < hi)
                .map(|a| (self.eval(a.value), a.prob))
                .collect();
            for &(x, _) in &vals {
                out.inf = out.inf.min(x);
                out.sup = out.sup.max(x);
            }
            out.mass_at_inf = vals
                .iter()
                .filter(|(x, _)| crate::numeric::close(*x, out.inf, 1e-12))
                .map(|(_, p)| p)
                .sum();
            return out;
        }
        let (s_lo, s_hi) = dist.support();
        let lo = lo.max(s_lo);
        let hi = hi.min(s_hi);
        let mut consts = Vec::new();
        for (a, b, form) in self.as_map().intervals() {
            let l = a.max(lo);
            let h = b.min(hi);
            if !(h > l) || dist.mass(l, h) <= 0.0 {
                continue;
            }
            let (v1, v2) = (limit_value(&form, l), limit_value(&form, h));
            out.inf = out.inf.min(v1.min(v2));
            out.sup = out.sup.max(v1.max(v2));
            if form.is_constant() {
                consts.push((form.eval(l), dist.mass(l, h)));
            }
        }
        out.mass_at_inf = consts
            .iter()
            .filter(|(x, _)| crate::numeric::close(*x, out.inf, 1e-12))
            .map(|(_, p)| p)
            .sum();
        out
    }

    /// Positive-probability level sets of `ξ` on `lo <= W < hi`: each entry
    /// is `(ξ value, probability, w-interval)`.
    pub fn level_sets(&self, dist: &StateDistribution, lo: f64, hi: f64) -> Vec<LevelSet> {
        if let StateDistribution::Discrete(atoms) = dist {
            return atoms
                .iter()
                .filter(|a| a.value >= lo && a.value < hi)
                .map(|a| LevelSet {
                    xi: self.eval(a.value),
                    prob: a.prob,
                    lo: a.value,
                    hi: a.value,
                })
                .collect();
        }
        let mut out = Vec::new();
        for (a, b, form) in self.as_map().intervals() {
            let l = a.max(lo);
            let h = b.min(hi);
            if h > l && form.is_constant() {
                let m = dist.mass(l, h);
                if m > 0.0 {
                    out.push(LevelSet {
                        xi: form.eval(l),
                        prob: m,
                        lo: l,
                        hi: h,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self, dist: &StateDistribution) -> Result<()> {
        if let Self::Lognormal { .. } = self {
            return Ok(());
        }
        let r = self.range_on(dist, f64::NEG_INFINITY, f64::INFINITY);
        if r.inf < 0.0 || (r.inf == 0.0 && r.mass_at_inf > 0.0) {
            return Err(invalid("pricing kernel", "must be positive on the support of the state"));
        }
        if let StateDistribution::Discrete(atoms) = dist {
            if atoms.iter().any(|a| !(self.eval(a.value) > 0.0)) {
                return Err(invalid("pricing kernel", "must be positive at every atom"));
            }
        }
        Ok(())
    }
}

fn limit_value(form: &MapForm, w: f64) -> f64 {
    if w.is_finite() {
        return form.eval(w);
    }
    match *form {
        MapForm::Constant { value } => value,
        MapForm::Affine { slope, intercept } => {
            if slope == 0.0 {
                intercept
            } else {
                slope * w
            }
        }
        MapForm::Exponential { scale, rate } => {
            if rate == 0.0 {
                scale
            } else if (rate > 0.0) == (w > 0.0) {
                scale * f64::INFINITY
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRange {
    pub inf: f64,
    pub sup: f64,
    pub mass_at_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSet {
    pub xi: f64,
    pub prob: f64,
    pub lo: f64,
    pub hi: f64,
}

/// `(ess-inf ξ, ess-sup ξ, P[ξ = ess-inf ξ])`.
pub fn kernel_essential_bounds(kernel: &PricingKernel, dist: &StateDistribution) -> (f64, f64, f64) {
    let r = kernel.range_on(dist, f64::NEG_INFINITY, f64::INFINITY);
    (r.inf, r.sup, r.mass_at_inf)
}

/// Benchmark value(s) as functions of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMap {
    components: Vec<PiecewiseMap>,
}

impl BenchmarkMap {
    pub fn new(components: Vec<PiecewiseMap>) -> Self {
        Self { components }
    }

    /// No benchmark at all.
    pub fn none() -> Self {
        Self { components: Vec::new() }
    }

    pub fn constant(values: &[f64]) -> Self {
        Self {
            components: values.iter().map(|v| PiecewiseMap::constant(*v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[PiecewiseMap] {
        &self.components
    }

    pub fn eval(&self, w: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(w)).collect()
    }

    /// Sorted, strictly increasing union of component breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.components.iter().flat_map(|c| c.breakpoints()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Intervals between breakpoints, with the benchmark value when every
    /// component is constant there.
    pub fn regions(&self) -> Vec<(f64, f64, Option<Vec<f64>>)> {
        let mut cuts = vec![f64::NEG_INFINITY];
        cuts.extend(self.breakpoints());
        cuts.push(f64::INFINITY);
        cuts.windows(2)
            .map(|c| {
                let (lo, hi) = (c[0], c[1]);
                let probe = if lo.is_finite() { lo } else if hi.is_finite() { hi - 1.0 } else { 0.0 };
                let mut vals = Vec::with_capacity(self.components.len());
                let mut constant = true;
                for comp in &self.components {
                    let i = comp.index(probe);
                    let form = comp.pieces[i].form;
                    if !form.is_constant() {
                        constant = false;
                    }
                    vals.push(form.eval(probe));
                }
                (lo, hi, constant.then_some(vals))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineMode {
    Quadrature { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Weighted evaluation points for one expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub sampled: bool,
}

/// Deterministic expectation operator over the state.
#[derive(Debug, Clone)]
pub struct ExpectationEngine {
    mode: EngineMode,
    splits: Vec<f64>,
    legendre: Arc<Rule>,
    hermite: Arc<Rule>,
}

impl PartialEq for ExpectationEngine {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.splits == other.splits
    }
}

impl Default for ExpectationEngine {
    fn default() -> Self {
        Self::quadrature(DEFAULT_NODES)
    }
}

impl ExpectationEngine {
    pub fn quadrature(nodes: usize) -> Self {
        let nodes = nodes.max(2);
        let (legendre, hermite) = cached_rules(nodes);
        Self {
            mode: EngineMode::Quadrature { nodes },
            splits: Vec::new(),
            legendre,
            hermite,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            mode: EngineMode::MonteCarlo {
                samples: samples.max(2),
                seed,
            },
            splits: Vec::new(),
            legendre: cached_rules(2).0,
            hermite: cached_rules(2).1,
        }
    }

    pub fn from_mode(mode: EngineMode) -> Self {
        match mode {
            EngineMode::Quadrature { nodes } => Self::quadrature(nodes),
            EngineMode::MonteCarlo { samples, seed } => Self::monte_carlo(samples, seed),
        }
    }

    pub fn with_splits(mut self, mut splits: Vec<f64>) -> Self {
        splits.retain(|s| s.is_finite());
        splits.sort_by(f64::total_cmp);
        splits.dedup();
        self.splits = splits;
        self
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self.mode, EngineMode::MonteCarlo { .. })
    }

    /// Evaluation points and weights; panels are cut at `breakpoints` and
    /// at the engine's own splits.
    pub fn nodes(&self, dist: &StateDistribution, breakpoints: &[f64]) -> NodeSet {
        if let StateDistribution::Discrete(atoms) = dist {
            if !self.is_monte_carlo() {
                return NodeSet {
                    points: atoms.iter().map(|a| a.value).collect(),
                    weights: atoms.iter().map(|a| a.prob).collect(),
                    sampled: false,
                };
            }
        }
        if let EngineMode::MonteCarlo { samples, seed } = self.mode {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<f64> = (0..samples).map(|_| dist.sample(&mut rng)).collect();
            return NodeSet {
                points,
                weights: vec![1.0 / samples as f64; samples],
                sampled: true,
            };
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .chain(self.splits.iter())
            .copied()
            .filter(|b| b.is_finite())
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        match dist {
            StateDistribution::StandardNormal => {
                if cuts.is_empty() {
                    return NodeSet {
                        points: self.hermite.nodes.clone(),
                        weights: self.hermite.weights.clone(),
                        sampled: false,
                    };
                }
                let lo = (-NORMAL_SPAN).min(cuts[0]);
                let hi = NORMAL_SPAN.max(cuts[cuts.len() - 1]);
                let mut edges = vec![lo];
                edges.extend(cuts.iter().copied().filter(|c| *c > lo && *c < hi));
                edges.push(hi);
                self.panels(&edges, normal_pdf)
            }
            StateDistribution::Uniform { lo, hi } => {
                let dens = 1.0 / (hi - lo);
                let mut edges = vec![*lo];
                edges.extend(cuts.iter().copied().filter(|c| c > lo && c < hi));
                edges.push(*hi);
                self.panels(&edges, |_| dens)
            }
            StateDistribution::Discrete(_) => unreachable!(),
        }
    }

    fn panels(&self, edges: &[f64], density: impl Fn(f64) -> f64) -> NodeSet {
        let n = self.legendre.len();
        let mut points = Vec::with_capacity(n * (edges.len() - 1));
        let mut weights = Vec::with_capacity(points.capacity());
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            if !(b > a) {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
                let t = mid + half * x;
                points.push(t);
                weights.push(w * half * density(t));
            }
        }
        NodeSet {
            points,
            weights,
            sampled: false,
        }
    }

    pub fn expect<F: Fn(f64) -> f64>(
        &self,
        dist: &StateDistribution,
        f: F,
        breakpoints: &[f64],
    ) -> Result<f64> {
        let ns = self.nodes(dist, breakpoints);
        accumulate(ns.weights.iter().zip(&ns.points).map(|(w, x)| (*w, f(*x))))
    }

    /// Expectation together with its Monte Carlo standard error (zero for
    /// quadrature).
    pub fn estimate<F: Fn(f64) -> f64>(
        &self,
        dist: &StateDistribution,
        f: F,
        breakpoints: &[f64],
    ) -> Result<Estimate> {
        let ns = self.nodes(dist, breakpoints);
        let vals: Vec<f64> = ns.points.iter().map(|x| f(*x)).collect();
        let mean = accumulate(ns.weights.iter().copied().zip(vals.iter().copied()))?;
        if !ns.sampled || !mean.is_finite() {
            return Ok(Estimate { mean, std_error: 0.0 });
        }
        let n = vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Estimate {
            mean,
            std_error: (var / n).sqrt(),
        })
    }
}

type RulePair = (Arc<Rule>, Arc<Rule>);

fn cached_rules(n: usize) -> RulePair {
    static CACHE: OnceLock<Mutex<HashMap<usize, RulePair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| (Arc::new(gauss_legendre(n)), Arc::new(gauss_hermite_normal(n))))
        .clone()
}

/// Weighted sum with extended-real semantics: exact-zero weights are
/// skipped, a single-signed infinity wins, mixed infinities are an error.
pub fn accumulate(terms: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let mut sum = 0.0;
    let mut pos = false;
    let mut neg = false;
    for (w, v) in terms {
        if w == 0.0 {
            continue;
        }
        if v.is_nan() {
            return Err(Error::UndefinedExpectation);
        }
        if v == f64::INFINITY {
            pos = true;
        } else if v == f64::NEG_INFINITY {
            neg = true;
        } else {
            sum += w * v;
        }
    }
    match (pos, neg) {
        (true, true) => Err(Error::UndefinedExpectation),
        (true, false) => Ok(f64::INFINITY),
        (false, true) => Ok(f64::NEG_INFINITY),
        _ => Ok(sum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market_kernel() -> PricingKernel {
        PricingKernel::lognormal(0.03, 0.3, 10.0).unwrap()
    }

    #[test]
    fn uniform_mean() {
        let e = ExpectationEngine::default();
        let d = StateDistribution::uniform(1.0, 2.0).unwrap();
        assert!((e.expect(&d, |w| w, &[]).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn lognormal_mean_is_discount_factor() {
        let e = ExpectationEngine::default();
        let k = market_kernel();
        let v = e.expect(&StateDistribution::StandardNormal, |w| k.eval(w), &[]).unwrap();
        assert!((v - (-0.3f64).exp()).abs() < 1e-12);
        let split = e.expect(&StateDistribution::StandardNormal, |w| k.eval(w), &[-1.0, 0.5]).unwrap();
        assert!((split - (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn infinite_part_dominates() {
        let e = ExpectationEngine::default();
        let d = StateDistribution::uniform(1.0, 2.0).unwrap();
        let v = e
            .expect(&d, |w| if w < 1.5 { f64::INFINITY } else { 1.0 }, &[1.5])
            .unwrap();
        assert_eq!(v, f64::INFINITY);
        let err = e.expect(
            &d,
            |w| if w < 1.5 { f64::INFINITY } else { f64::NEG_INFINITY },
            &[1.5],
        );
        assert_eq!(err, Err(Error::UndefinedExpectation));
    }

    #[test]
    fn zero_weight_infinity_is_ignored() {
        let v = accumulate([(0.0, f64::INFINITY), (1.0, 2.0)].into_iter()).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn essential_bounds() {
        let (lo, hi, m) = kernel_essential_bounds(&market_kernel(), &StateDistribution::StandardNormal);
        assert_eq!((lo, hi, m), (0.0, f64::INFINITY, 0.0));
        let u = StateDistribution::uniform(1.0, 2.0).unwrap();
        assert_eq!(kernel_essential_bounds(&PricingKernel::Identity, &u), (1.0, 2.0, 0.0));
        let d = StateDistribution::discrete(vec![
            Atom { value: 0.0, prob: 0.5 },
            Atom { value: 1.0, prob: 0.5 },
        ])
        .unwrap();
        let k = PricingKernel::Explicit(
            PiecewiseMap::new(vec![MapPiece {
                start: f64::NEG_INFINITY,
                form: MapForm::Affine { slope: 1.0, intercept: 1.0 },
            }])
            .unwrap(),
        );
        assert_eq!(kernel_essential_bounds(&k, &d), (1.0, 2.0, 0.5));
    }

    #[test]
    fn constant_piece_has_atom_mass() {
        let k = PricingKernel::Explicit(PiecewiseMap::step(0.5, 2.0, 0.0));
        let r = k.range_on(&StateDistribution::StandardNormal, f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!((r.inf, r.sup), (0.5, 2.0));
        assert!((r.mass_at_inf - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let e = ExpectationEngine::monte_carlo(10_000, 7);
        let d = StateDistribution::StandardNormal;
        let a = e.estimate(&d, |w| w * w, &[]).unwrap();
        let b = e.estimate(&d, |w| w * w, &[]).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 1.0).abs() < 4.0 * a.std_error);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(StateDistribution::uniform(2.0, 1.0).is_err());
        assert!(StateDistribution::discrete(vec![Atom { value: 0.0, prob: 0.6 }]).is_err());
        let neg = PricingKernel::Identity;
        let u = StateDistribution::uniform(-1.0, 1.0).unwrap();
        assert!(neg.validate(&u).is_err());
    }

    #[test]
    fn benchmark_regions() {
        let b = BenchmarkMap::new(vec![PiecewiseMap::constant(60.0), PiecewiseMap::step(40.0, 50.0, -1.0)]);
        let r = b.regions();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].2, Some(vec![60.0, 40.0]));
        assert_eq!(r[1].2, Some(vec![60.0, 50.0]));
        assert_eq!(b.eval(-1.0), vec![60.0, 50.0]);
    }

    #[test]
    fn normal_mass_tails() {
        let d = StateDistribution::StandardNormal;
        assert!((d.mass(f64::NEG_INFINITY, 0.0) - 0.5).abs() < 1e-15);
        assert!(d.mass(10.0, f64::INFINITY) > 0.0);
    }
}
