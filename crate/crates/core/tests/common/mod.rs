#![allow(dead_code)]

use std::sync::Arc;

use euopt::conjugate::{conjugate_at, lower_selection, upper_selection};
use euopt::envelope::{concavify, ConcaveEnvelope};
use euopt::oracle::{brute_solve, grid_resolution, DiscreteInstance, Objective, OracleAtom};
use euopt::solver::{eval_g, Problem, SolveReport};
use euopt::statespace::{
    normal_quantile, Atom, BenchmarkMap, ExpectationEngine, PiecewiseMap, PricingKernel, StateDistribution,
};
use euopt::utility::{
    Custom, Digital, ModifiedSShaped, Piece, PieceForm, PiecewiseUtility, SShaped, TwoPiece, UtilityFamily,
};
use euopt::varapp::{closed_form_selection, RegimeThresholds};

pub type Check = Result<(), String>;

/// Utilities drawn from a few non-concave shapes.
#[derive(Debug, Clone)]
pub enum Shape {
    SShaped { k: f64, p: f64, b: f64 },
    Modified { k: f64, p: f64, mu: f64, b1: f64, b2: f64 },
    Digital { height: f64, b: f64 },
    Ramps { slopes: Vec<f64>, jumps: Vec<f64> },
}

impl Shape {
    pub fn utility(&self) -> PiecewiseUtility {
        match self {
            Shape::SShaped { k, p, b } => SShaped::new(*k, *p).unwrap().utility(&[*b]).unwrap(),
            Shape::Modified { k, p, mu, b1, b2 } => ModifiedSShaped { base: SShaped::new(*k, *p).unwrap(), mu: *mu }
                .utility(&[*b1, *b2])
                .unwrap(),
            Shape::Digital { height, b } => Digital { height: *height, floor: 0.0 }.utility(&[*b]).unwrap(),
            Shape::Ramps { slopes, jumps } => ramps(slopes, jumps),
        }
    }

    /// Right end of the region where the envelope can differ from a tail
    /// that is already concave.
    pub fn reach(&self) -> f64 {
        match self {
            Shape::SShaped { b, .. } => 3.0 * b + 10.0,
            Shape::Modified { b1, .. } => 3.0 * b1 + 10.0,
            Shape::Digital { b, .. } => 3.0 * b + 10.0,
            Shape::Ramps { slopes, .. } => slopes.len() as f64 + 10.0,
        }
    }
}

/// Unit-width affine pieces with the given slopes, each starting `jump`
/// above the previous piece's end.
pub fn ramps(slopes: &[f64], jumps: &[f64]) -> PiecewiseUtility {
    let mut pieces = Vec::new();
    let mut level = 0.0;
    for (i, (s, j)) in slopes.iter().zip(jumps).enumerate() {
        let x = i as f64;
        level += j;
        pieces.push(Piece { start: x, form: PieceForm::Affine { slope: *s, intercept: level - s * x } });
        level += s;
    }
    PiecewiseUtility::new(pieces).unwrap()
}

pub fn envelope(u: &PiecewiseUtility) -> ConcaveEnvelope {
    concavify(u).unwrap()
}

/// Upper hull of `(x, u(x))` over the points, evaluated at each point.
pub fn grid_hull(xs: &[f64], vs: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (vs[b] - vs[a]) * (xs[i] - xs[a]) - (vs[i] - vs[a]) * (xs[b] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut k = 0;
    for &x in xs {
        while k + 1 < hull.len() && xs[hull[k + 1]] < x {
            k += 1;
        }
        let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
        if a == b || xs[b] == xs[a] {
            out.push(vs[a]);
        } else {
            let t = (x - xs[a]) / (xs[b] - xs[a]);
            out.push(vs[a] + t * (vs[b] - vs[a]));
        }
    }
    out
}

/// Envelope against the sup of chords between points of a fine grid that
/// is clustered at every breakpoint; compared at grid points only.
pub fn chord_sup_check(shape: &Shape, probes: &[f64]) -> Check {
    let u = shape.utility();
    let env = envelope(&u);
    let lo = u.lower_bound();
    let hi = shape.reach();
    let mut xs: Vec<f64> = (0..=20_000).map(|i| lo + (hi - lo) * i as f64 / 20_000.0).collect();
    for b in u.breakpoints() {
        for k in 1..=12 {
            let h = 10f64.powi(-k);
            xs.extend([b - h, b + h]);
        }
        xs.push(b);
    }
    xs.retain(|x| *x >= lo && *x <= hi);
    xs.extend((1..=40).map(|k| hi * 2f64.powi(k)));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut vs: Vec<f64> = xs.iter().map(|x| u.eval(*x)).collect();
    let mut hull = grid_hull(&xs, &vs);
    for _ in 0..3 {
        let above = |i: usize| hull[i] > vs[i] + 1e-12 * vs[i].abs().max(1.0);
        let ends: Vec<(f64, f64)> = (0..xs.len())
            .filter(|&i| !above(i) && ((i > 0 && above(i - 1)) || (i + 1 < xs.len() && above(i + 1))))
            .map(|i| (xs[i.saturating_sub(1)], xs[(i + 1).min(xs.len() - 1)]))
            .collect();
        for (a, b) in ends {
            xs.extend((1..100).map(|j| a + (b - a) * j as f64 / 100.0));
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        vs = xs.iter().map(|x| u.eval(*x)).collect();
        hull = grid_hull(&xs, &vs);
    }
    for &t in probes {
        let x = lo + t * (hi - lo) / 3.0;
        let i = xs.partition_point(|v| *v < x).min(xs.len() - 1);
        let (x, h) = (xs[i], hull[i]);
        let e = env.eval(x);
        if (e - h).abs() > 1e-5 * h.abs().max(1.0) {
            return Err(format!("{shape:?}: envelope {e} vs chord sup {h} at x = {x}"));
        }
    }
    Ok(())
}

/// `X̄(y₂) ≤ X̲(y₁)` for `y₁ < y₂`.
pub fn cross_monotone_check(shape: &Shape, y1: f64, y2: f64) -> Check {
    let env = envelope(&shape.utility());
    let (y1, y2) = (y1.min(y2), y1.max(y2));
    if y1 == y2 {
        return Ok(());
    }
    let low = lower_selection(&env, y1).map_err(|e| e.to_string())?;
    let high = upper_selection(&env, y2).map_err(|e| e.to_string())?;
    if high <= low {
        Ok(())
    } else {
        Err(format!("{shape:?}: X̄({y2}) = {high} > X̲({y1}) = {low}"))
    }
}

/// `X̲(y) → bliss` as `y → 0` and `X̄(y) → lower bound` as `y → ∞`.
pub fn limits_check(shape: &Shape) -> Check {
    let u = shape.utility();
    let env = envelope(&u);
    let bliss = u.bliss();
    let small = lower_selection(&env, 1e-12).map_err(|e| e.to_string())?;
    let ok_small = if bliss.is_finite() { (small - bliss).abs() <= 1e-9 * bliss.abs().max(1.0) } else { small >= 1e6 };
    if !ok_small {
        return Err(format!("{shape:?}: X̲(1e-12) = {small}, bliss {bliss}"));
    }
    let big = upper_selection(&env, 1e12).map_err(|e| e.to_string())?;
    if big != u.lower_bound() {
        return Err(format!("{shape:?}: X̄(1e12) = {big}, lower bound {}", u.lower_bound()));
    }
    let zero = lower_selection(&env, 0.0).map_err(|e| e.to_string())?;
    if bliss.is_finite() && (zero - bliss).abs() > 1e-9 * bliss.abs().max(1.0) {
        return Err(format!("{shape:?}: X̲(0) = {zero}, bliss {bliss}"));
    }
    Ok(())
}

/// Problems over which the budget search is exercised.
#[derive(Debug, Clone)]
pub enum Scenario {
    Lognormal { k: f64, p: f64, b: f64, x0: f64 },
    TwoPiece { x0: f64 },
    DigitalGap { x0: f64 },
    Atoms { xi: Vec<f64>, slopes: Vec<f64>, jumps: Vec<f64>, x0: f64 },
}

impl Scenario {
    pub fn problem(&self) -> Problem {
        let engine = ExpectationEngine::default();
        match self {
            Scenario::Lognormal { k, p, b, x0 } => Problem::new(
                StateDistribution::StandardNormal,
                PricingKernel::lognormal(0.03, 0.3, 10.0).unwrap(),
                Arc::new(SShaped::new(*k, *p).unwrap()),
                BenchmarkMap::new(vec![PiecewiseMap::step(*b, 1.5 * b, -0.5)]),
                *x0,
                engine,
            ),
            Scenario::TwoPiece { x0 } => Problem::new(
                StateDistribution::uniform(1.0, 2.0).unwrap(),
                PricingKernel::Identity,
                Arc::new(TwoPiece),
                BenchmarkMap::none(),
                *x0,
                engine,
            ),
            Scenario::DigitalGap { x0 } => Problem::new(
                StateDistribution::StandardNormal,
                PricingKernel::Explicit(PiecewiseMap::constant(1.0)),
                Arc::new(Digital::default()),
                BenchmarkMap::constant(&[1.0]),
                *x0,
                engine,
            ),
            Scenario::Atoms { xi, slopes, jumps, x0 } => {
                let atoms = xi.iter().map(|v| Atom { value: *v, prob: 1.0 / xi.len() as f64 }).collect();
                Problem::new(
                    StateDistribution::discrete(atoms).unwrap(),
                    PricingKernel::Identity,
                    Arc::new(Custom(ramps(slopes, jumps))),
                    BenchmarkMap::none(),
                    *x0,
                    engine,
                )
            }
        }
        .unwrap()
    }
}

/// `g` is nonincreasing along the multipliers.
pub fn g_monotone_check(p: &Problem, lambdas: &[f64]) -> Check {
    let mut ls = lambdas.to_vec();
    ls.sort_by(f64::total_cmp);
    let mut last = f64::INFINITY;
    for l in ls {
        let g = eval_g(p, l).map_err(|e| e.to_string())?;
        if g > last + 1e-9 * last.abs().max(1.0) {
            return Err(format!("g({l}) = {g} exceeds the value {last} at a smaller multiplier"));
        }
        last = g;
    }
    Ok(())
}

/// States where a solution is inspected.
pub fn probe_states(dist: &StateDistribution) -> Vec<f64> {
    match dist {
        StateDistribution::StandardNormal => (1..60).map(|i| normal_quantile(i as f64 / 60.0)).collect(),
        StateDistribution::Uniform { lo, hi } => (0..60).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 60.0).collect(),
        StateDistribution::Discrete(atoms) => atoms.iter().map(|a| a.value).collect(),
    }
}

/// Every returned solution maximizes `U(x) − λξx` state by state.
pub fn certificate_check(rep: &SolveReport) -> Check {
    for s in &rep.solutions {
        let Some(lambda) = s.lambda() else { continue };
        let p = s.problem();
        for w in probe_states(p.dist()) {
            let local = p.local_at(w).map_err(|e| e.to_string())?;
            let y = lambda * p.xi(w);
            let x = s.eval(w).map_err(|e| e.to_string())?;
            let v = conjugate_at(&local.env, y).map_err(|e| e.to_string())?.value;
            let got = local.utility(x) - y * x;
            if got < v - 1e-8 * v.abs().max(1.0) {
                return Err(format!("state {w}: U(X) - yX = {got} below the conjugate {v} (x = {x}, y = {y})"));
            }
        }
    }
    Ok(())
}

/// Closed-form selection against the envelope pipeline.
pub fn closed_form_check(k: f64, p: f64, mu: f64, b1: f64, b2: f64, y: f64) -> Check {
    let shape = SShaped::new(k, p).unwrap();
    let th = RegimeThresholds::new(&shape, mu, [b1, b2]).map_err(|e| e.to_string())?;
    for t in [th.y1, th.y2_mu, th.y3_mu] {
        if (y - t).abs() < 1e-7 * t {
            return Ok(());
        }
    }
    let want = closed_form_selection(&shape, mu, [b1, b2], y).map_err(|e| e.to_string())?;
    let env = envelope(&ModifiedSShaped { base: shape, mu }.utility(&[b1, b2]).unwrap());
    let got = lower_selection(&env, y).map_err(|e| e.to_string())?;
    if (want - got).abs() <= 1e-8 * want.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("k={k} p={p} mu={mu} b=({b1},{b2}) y={y}: closed form {want}, envelope {got}"))
    }
}

/// 64 atoms priced at multiples of `1/4`, a shared grid of step `1/4` and
/// random S-shaped benchmarks.
pub fn sshaped_instance(rng: &mut impl rand::Rng) -> (DiscreteInstance, SShaped) {
    let n = 64;
    let atoms = (0..n)
        .map(|_| OracleAtom {
            prob: 1.0 / n as f64,
            xi: rng.random_range(1..=8) as f64 / 4.0,
            b: vec![rng.random_range(2.0..6.0)],
        })
        .collect();
    let grid = (0..80).map(|j| j as f64 * 0.25).collect();
    let shape = SShaped::new(rng.random_range(1.0..3.0), rng.random_range(0.3..0.7)).unwrap();
    (DiscreteInstance::shared_grid(atoms, grid, rng.random_range(1.0..3.0)), shape)
}

/// Envelope optimum minus utility optimum on the same grid, against one
/// grid step.
pub fn relaxation_gap_check(inst: &DiscreteInstance, family: &dyn UtilityFamily) -> Check {
    let vu = brute_solve(inst, family, Objective::Utility).map_err(|e| e.to_string())?;
    let vt = brute_solve(inst, family, Objective::Envelope).map_err(|e| e.to_string())?;
    let res = grid_resolution(inst, family).map_err(|e| e.to_string())?;
    let gap = vt.value - vu.value;
    if gap >= -1e-9 && gap <= res + 1e-9 {
        Ok(())
    } else {
        Err(format!("envelope {} vs utility {} ({:?}), resolution {res}", vt.value, vu.value, vu.mode))
    }
}
