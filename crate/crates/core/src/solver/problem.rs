use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use crate::conjugate::selection;
use crate::envelope::{concavify, ConcaveEnvelope};
use crate::error::{invalid, Error, Result};
use crate::statespace::{
    accumulate, BenchmarkMap, Estimate, ExpectationEngine, NodeSet, PricingKernel, StateDistribution,
};
use crate::utility::{check_admissibility, SolverPath, UtilityFamily};

/// Everything the solver needs about `U(·, b)` at one benchmark value.
#[derive(Debug, Clone)]
pub struct Local {
    pub b: Vec<f64>,
    pub env: ConcaveEnvelope,
    pub alpha: f64,
    pub lower: f64,
    pub bliss: f64,
}

impl Local {
    pub fn build(family: &dyn UtilityFamily, b: Vec<f64>) -> Result<Self> {
        let u = family.utility(&b)?;
        let report = check_admissibility(&u)?;
        if report.solver_path == SolverPath::DiagnosticsOnly {
            return Err(invalid(
                "utility",
                "an unbounded lower region is supported by the envelope and conjugate only",
            ));
        }
        let env = concavify(&u)?;
        Ok(Self {
            b,
            alpha: report.alpha,
            lower: report.lower_bound,
            bliss: report.bliss,
            env,
        })
    }

    /// Slopes where the selections change regime, the tail slope included.
    fn split_slopes(&self) -> Vec<f64> {
        let mut v = self.env.critical_slopes();
        if self.alpha > 0.0 {
            v.push(self.alpha);
        }
        v
    }

    pub fn utility(&self, x: f64) -> f64 {
        self.env.source().eval(x)
    }
}

#[derive(Debug)]
struct Region {
    lo: f64,
    hi: f64,
    local: Option<Arc<Local>>,
}

struct Inner {
    dist: StateDistribution,
    kernel: PricingKernel,
    family: Arc<dyn UtilityFamily>,
    benchmark: BenchmarkMap,
    engine: ExpectationEngine,
    regions: Vec<Region>,
    atoms: Vec<(f64, Arc<Local>)>,
    base_splits: Vec<f64>,
    lambda0: f64,
}

impl fmt::Debug for Inner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("dist", &self.dist)
            .field("kernel", &self.kernel)
            .field("family", &self.family.name())
            .field("benchmark", &self.benchmark)
            .field("engine", &self.engine.mode())
            .finish()
    }
}

/// Budget-constrained problem `sup E[U(X, B)]` subject to `E[ξX] ≤ x0`.
#[derive(Debug, Clone)]
pub struct Problem {
    inner: Arc<Inner>,
    x0: f64,
}

/// Which end of the maximizer set to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

impl Problem {
    pub fn new(
        dist: StateDistribution,
        kernel: PricingKernel,
        family: Arc<dyn UtilityFamily>,
        benchmark: BenchmarkMap,
        x0: f64,
        engine: ExpectationEngine,
    ) -> Result<Self> {
        dist.validate()?;
        kernel.validate(&dist)?;
        if x0.is_nan() {
            return Err(invalid("budget", "x0 is NaN"));
        }
        if benchmark.dim() < family.benchmark_dim() {
            return Err(invalid(
                "benchmark",
                format!(
                    "{} needs {} component(s), got {}",
                    family.name(),
                    family.benchmark_dim(),
                    benchmark.dim()
                ),
            ));
        }
        let mut regions = Vec::new();
        for (lo, hi, fixed) in benchmark.regions() {
            let local = match fixed {
                Some(b) => Some(Arc::new(Local::build(family.as_ref(), b)?)),
                None => None,
            };
            regions.push(Region { lo, hi, local });
        }
        let mut atoms = Vec::new();
        if let StateDistribution::Discrete(list) = &dist {
            for a in list {
                let r = region_index(&regions, a.value);
                let local = match &regions[r].local {
                    Some(l) => l.clone(),
                    None => Arc::new(Local::build(family.as_ref(), benchmark.eval(a.value))?),
                };
                atoms.push((a.value, local));
            }
        } else {
            for r in regions.iter().filter(|r| r.local.is_none()) {
                let probe = if r.lo.is_finite() { r.lo } else if r.hi.is_finite() { r.hi - 1.0 } else { 0.0 };
                Local::build(family.as_ref(), benchmark.eval(probe))?;
            }
        }
        let mut base_splits = benchmark.breakpoints();
        base_splits.extend(kernel.breakpoints());
        let lambda0 = lambda0(&dist, &kernel, family.as_ref(), &benchmark, &engine, &regions, &atoms)?;
        Ok(Self {
            inner: Arc::new(Inner {
                dist,
                kernel,
                family,
                benchmark,
                engine,
                regions,
                atoms,
                base_splits,
                lambda0,
            }),
            x0,
        })
    }

    /// `ess-sup α(B)/ξ`: below it `X̲_B(λξ) = +∞` with positive probability.
    pub fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        Self { inner: self.inner.clone(), x0 }
    }

    pub fn dist(&self) -> &StateDistribution {
        &self.inner.dist
    }

    pub fn kernel(&self) -> &PricingKernel {
        &self.inner.kernel
    }

    pub fn family(&self) -> &dyn UtilityFamily {
        self.inner.family.as_ref()
    }

    pub fn benchmark(&self) -> &BenchmarkMap {
        &self.inner.benchmark
    }

    pub fn engine(&self) -> &ExpectationEngine {
        &self.inner.engine
    }

    pub fn xi(&self, w: f64) -> f64 {
        self.inner.kernel.eval(w)
    }

    /// Benchmark regions `[lo, hi)` with their local data when the
    /// benchmark is constant there.
    pub fn regions(&self) -> impl Iterator<Item = (f64, f64, Option<&Local>)> {
        self.inner.regions.iter().map(|r| (r.lo, r.hi, r.local.as_deref()))
    }

    /// Local data at every atom of a discrete state, in state order.
    pub fn atom_locals(&self) -> impl Iterator<Item = (f64, &Local)> {
        self.inner.atoms.iter().map(|(w, l)| (*w, l.as_ref()))
    }

    pub fn local_at(&self, w: f64) -> Result<Cow<'_, Local>> {
        let inner = &self.inner;
        if !inner.atoms.is_empty() {
            if let Ok(i) = inner.atoms.binary_search_by(|(v, _)| v.total_cmp(&w)) {
                return Ok(Cow::Borrowed(inner.atoms[i].1.as_ref()));
            }
        }
        let r = &inner.regions[region_index(&inner.regions, w)];
        match &r.local {
            Some(l) => Ok(Cow::Borrowed(l.as_ref())),
            None => Ok(Cow::Owned(Local::build(inner.family.as_ref(), inner.benchmark.eval(w))?)),
        }
    }

    pub fn utility_at(&self, w: f64, x: f64) -> Result<f64> {
        Ok(self.local_at(w)?.utility(x))
    }

    /// Selection `X̲_B(λξ)` or `X̄_B(λξ)` at state `w`.
    pub fn select(&self, w: f64, lambda: f64, side: Side) -> Result<f64> {
        let local = self.local_at(w)?;
        select_local(&local, lambda * self.xi(w), side)
    }

    /// Panel cuts that make every selection smooth inside a panel at
    /// multiplier `lambda`.
    pub fn splits(&self, lambda: f64) -> Vec<f64> {
        let inner = &self.inner;
        let mut v = inner.base_splits.clone();
        if lambda > 0.0 && lambda.is_finite() {
            for r in &inner.regions {
                if let Some(l) = &r.local {
                    for s in l.split_slopes() {
                        v.extend(inner.kernel.preimages(s / lambda, r.lo, r.hi));
                    }
                }
            }
        }
        v.retain(|x| x.is_finite());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn nodes(&self, lambda: f64, extra: &[f64]) -> NodeSet {
        let mut cuts = self.splits(lambda);
        cuts.extend_from_slice(extra);
        self.inner.engine.nodes(&self.inner.dist, &cuts)
    }

    /// Expectation of `f(w, ξ(w), local)` with panels cut for `lambda`.
    pub fn integrate<F>(&self, lambda: f64, extra: &[f64], f: F) -> Result<Estimate>
    where
        F: Fn(f64, f64, &Local) -> Result<f64>,
    {
        let ns = self.nodes(lambda, extra);
        let mut vals = Vec::with_capacity(ns.points.len());
        for &w in &ns.points {
            let local = self.local_at(w)?;
            vals.push(f(w, self.xi(w), &local)?);
        }
        let mean = accumulate(ns.weights.iter().copied().zip(vals.iter().copied()))?;
        if !ns.sampled || !mean.is_finite() {
            return Ok(Estimate { mean, std_error: 0.0 });
        }
        let n = vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Estimate { mean, std_error: (var / n).sqrt() })
    }

    /// Tolerance on `|E[ξX] − x0|` for the engine in use.
    pub fn budget_tolerance(&self, std_error: f64) -> f64 {
        if self.inner.engine.is_monte_carlo() {
            (3.0 * std_error).max(1e-12)
        } else {
            1e-8 * self.x0.abs().max(1.0)
        }
    }
}

pub(crate) fn select_local(local: &Local, y: f64, side: Side) -> Result<f64> {
    let (lo, hi) = selection(&local.env, if y.is_nan() { 0.0 } else { y })?;
    Ok(match side {
        Side::Lower => lo,
        Side::Upper => hi,
    })
}

fn lambda0(
    dist: &StateDistribution,
    kernel: &PricingKernel,
    family: &dyn UtilityFamily,
    benchmark: &BenchmarkMap,
    engine: &ExpectationEngine,
    regions: &[Region],
    atoms: &[(f64, Arc<Local>)],
) -> Result<f64> {
    if !atoms.is_empty() {
        return Ok(atoms
            .iter()
            .filter(|(_, l)| l.alpha > 0.0)
            .map(|(w, l)| l.alpha / kernel.eval(*w))
            .fold(0.0, f64::max));
    }
    let mut out: f64 = 0.0;
    for r in regions {
        if dist.mass(r.lo, r.hi) <= 0.0 {
            continue;
        }
        let range = kernel.range_on(dist, r.lo, r.hi);
        match &r.local {
            Some(l) => {
                if l.alpha > 0.0 {
                    out = out.max(if range.inf > 0.0 { l.alpha / range.inf } else { f64::INFINITY });
                }
            }
            None => {
                let ns = engine.nodes(dist, &[r.lo, r.hi]);
                for &w in ns.points.iter().filter(|w| **w >= r.lo && **w < r.hi) {
                    let a = family.asymptotic_slope(&benchmark.eval(w))?;
                    if a > 0.0 {
                        out = out.max(if range.inf > 0.0 { a / range.inf } else { f64::INFINITY });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn region_index(regions: &[Region], w: f64) -> usize {
    regions
        .iter()
        .rposition(|r| r.lo <= w)
        .unwrap_or(0)
}

/// `ξ·x` with `0·(±∞)` read as 0 only for an exactly zero price.
pub(crate) fn cost(xi: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        xi * x
    }
}

pub(crate) fn bracket_err(msg: impl Into<String>) -> Error {
    Error::NumericalBracketFailure(msg.into())
}
