//! VaR-constrained S-shaped allocation with state-dependent benchmarks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{ext_serde, newton_bracketed};
use crate::solver::{solve, Problem, SolveReport};
use crate::statespace::{
    normal_cdf, BenchmarkMap, ExpectationEngine, PiecewiseMap, PricingKernel, StateDistribution,
};
use crate::utility::{ModifiedSShaped, SShaped};

/// Positive root of `1 + s·x^p = p(x + 1)`.
pub fn d(s: f64, p: f64) -> f64 {
    let h = |x: f64| p * (x + 1.0) - 1.0 - s * x.powf(p);
    let dh = |x: f64| p - s * p * x.powf(p - 1.0);
    let lo = if s > 0.0 { s.powf(1.0 / (1.0 - p)) } else { 0.0 };
    let mut hi = lo.max(1.0) * 2.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    newton_bracketed(|x| (h(x), dh(x)), lo, hi, 1e-13)
}

/// `U(x, b₁) + μ·1{x ≥ b₂}` on `x ≥ 0`.
pub fn modified_utility(base: SShaped, mu: f64) -> ModifiedSShaped {
    ModifiedSShaped { base, mu }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `y₁ ≤ y₂^μ`: the selection passes through `b₂`.
    Floor,
    /// `y₁ > y₂^μ`: the selection drops straight to 0.
    Direct,
}

/// Switching slopes of the closed-form selection at one benchmark pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeThresholds {
    pub y1: f64,
    pub y2_mu: f64,
    pub y3_mu: f64,
    pub d_k: f64,
    pub d_kmu: f64,
}

impl RegimeThresholds {
    pub fn new(shape: &SShaped, mu: f64, b: [f64; 2]) -> Result<Self> {
        let (k, p) = (shape.loss_aversion, shape.exponent);
        let [b1, b2] = b;
        if !(b1 > b2) {
            return Err(Error::RegimeViolation { b1, b2 });
        }
        if !(b2 > 0.0) {
            return Err(invalid("benchmark", format!("b2 must be positive, got {b2}")));
        }
        if !(mu >= 0.0) {
            return Err(invalid("reward", format!("mu must be nonnegative, got {mu}")));
        }
        let d_k = d(k, p);
        let d_kmu = d(k + mu * b1.powf(-p), p);
        Ok(Self {
            y1: p * (d_k / (b1 - b2)).powf(1.0 - p),
            y2_mu: (mu + k * b1.powf(p) - k * (b1 - b2).powf(p)) / b2,
            y3_mu: p * (d_kmu / b1).powf(1.0 - p),
            d_k,
            d_kmu,
        })
    }

    pub fn regime(&self) -> Regime {
        if self.y1 <= self.y2_mu {
            Regime::Floor
        } else {
            Regime::Direct
        }
    }

    /// Slope where the selection drops to 0.
    pub fn cutoff(&self) -> f64 {
        match self.regime() {
            Regime::Floor => self.y2_mu,
            Regime::Direct => self.y3_mu,
        }
    }

    /// `sup{y : X̲(y) ≥ level}`.
    pub fn reach(&self, shape: &SShaped, b: [f64; 2], level: f64) -> f64 {
        if level <= 0.0 {
            return f64::INFINITY;
        }
        let p = shape.exponent;
        let [b1, b2] = b;
        let gain = if level > b1 { p / (level - b1).powf(1.0 - p) } else { f64::INFINITY };
        match self.regime() {
            Regime::Floor if level <= b2 => self.y2_mu,
            Regime::Floor => self.y1.min(gain),
            Regime::Direct => self.y3_mu.min(gain),
        }
    }

    fn select(&self, shape: &SShaped, b: [f64; 2], y: f64) -> f64 {
        let p = shape.exponent;
        let gain = |y: f64| b[0] + (p / y).powf(1.0 / (1.0 - p));
        match self.regime() {
            Regime::Floor if y < self.y1 => gain(y),
            Regime::Floor if y < self.y2_mu => b[1],
            Regime::Direct if y < self.y3_mu => gain(y),
            _ => 0.0,
        }
    }
}

/// `X̲^μ_b(y)` from the two-regime formula.
pub fn closed_form_selection(shape: &SShaped, mu: f64, b: [f64; 2], y: f64) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(Error::NegativeDual(y));
    }
    Ok(RegimeThresholds::new(shape, mu, b)?.select(shape, b, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarPlan {
    I,
    II,
    III,
}

impl VarPlan {
    pub const ALL: [VarPlan; 3] = [VarPlan::I, VarPlan::II, VarPlan::III];

    pub fn name(self) -> &'static str {
        match self {
            VarPlan::I => "I",
            VarPlan::II => "II",
            VarPlan::III => "III",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarScenario {
    pub p: f64,
    pub k: f64,
    pub r: f64,
    pub theta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: f64,
    pub plan: VarPlan,
    pub levels: [f64; 4],
    pub w: f64,
    pub alpha: f64,
}

impl VarScenario {
    pub fn validate(&self) -> Result<()> {
        let [l1, l2, l3, l4] = self.levels;
        if !(self.p > 0.0 && self.p < 1.0 && self.k > 0.0) {
            return Err(invalid("var scenario", "need 0 < p < 1 and k > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("var scenario", "alpha must lie in (0, 1)"));
        }
        if !(self.theta > 0.0 && self.horizon > 0.0 && self.r.is_finite()) {
            return Err(invalid("var scenario", "need theta > 0, T > 0 and a finite rate"));
        }
        if !(l1 > l3 && l2 > l4 && l3 > 0.0 && l4 > 0.0) {
            return Err(invalid("var scenario", "need L1 > L3 > 0 and L2 > L4 > 0"));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite() && self.w.is_finite()) {
            return Err(invalid("var scenario", "x0 must be positive and w finite"));
        }
        Ok(())
    }

    pub fn with_plan(&self, plan: VarPlan) -> Self {
        Self { plan, ..self.clone() }
    }

    pub fn shape(&self) -> Result<SShaped> {
        SShaped::new(self.k, self.p)
    }

    pub fn kernel(&self) -> Result<PricingKernel> {
        PricingKernel::lognormal(self.r, self.theta, self.horizon)
    }

    /// `ξ = exp(−m − sW)`.
    fn log_kernel(&self) -> (f64, f64) {
        ((self.r + 0.5 * self.theta * self.theta) * self.horizon, self.theta * self.horizon.sqrt())
    }

    pub fn xi(&self, w: f64) -> f64 {
        let (m, s) = self.log_kernel();
        (-m - s * w).exp()
    }

    pub fn state_of(&self, xi: f64) -> f64 {
        let (m, s) = self.log_kernel();
        (-xi.ln() - m) / s
    }

    /// `(B₁, B₂)` as maps of the state.
    pub fn benchmark(&self) -> BenchmarkMap {
        plan_benchmark(self.plan, self.levels, self.w)
    }

    pub fn problem(&self, mu: f64, engine: &ExpectationEngine) -> Result<Problem> {
        Problem::new(
            StateDistribution::StandardNormal,
            self.kernel()?,
            Arc::new(modified_utility(self.shape()?, mu)),
            self.benchmark(),
            self.x0,
            engine.clone(),
        )
    }

    /// Largest reward considered when binding the probability constraint.
    pub fn mu_cap(&self) -> f64 {
        1e6 * self.k * self.levels[0].powf(self.p)
    }
}

/// `(B₁, B₂)` for a plan with levels `L₁..L₄` switching at state `w`.
pub fn plan_benchmark(plan: VarPlan, levels: [f64; 4], w: f64) -> BenchmarkMap {
    let [l1, l2, l3, l4] = levels;
    let b1 = match plan {
        VarPlan::III => PiecewiseMap::step(l1, l2, w),
        _ => PiecewiseMap::constant(l1),
    };
    let b2 = match plan {
        VarPlan::I => PiecewiseMap::constant(l3),
        _ => PiecewiseMap::step(l3, l4, w),
    };
    BenchmarkMap::new(vec![b1, b2])
}

/// Closed-form optimum `X̲^μ_B(λξ)` for one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarSolution {
    pub plan: VarPlan,
    pub mu: f64,
    pub lambda: f64,
    #[serde(skip)]
    scenario: VarScenario,
    #[serde(skip)]
    shape: SShaped,
    #[serde(skip)]
    regions: Vec<(f64, f64, [f64; 2], RegimeThresholds)>,
}

impl VarSolution {
    pub fn new(scenario: &VarScenario, mu: f64, lambda: f64) -> Result<Self> {
        let shape = scenario.shape()?;
        let mut regions = Vec::new();
        for (lo, hi, b) in scenario.benchmark().regions() {
            let b = b.expect("plan benchmarks are piecewise constant");
            let b = [b[0], b[1]];
            regions.push((lo, hi, b, RegimeThresholds::new(&shape, mu, b)?));
        }
        Ok(Self { plan: scenario.plan, mu, lambda, scenario: scenario.clone(), shape, regions })
    }

    pub fn scenario(&self) -> &VarScenario {
        &self.scenario
    }

    fn region(&self, w: f64) -> &(f64, f64, [f64; 2], RegimeThresholds) {
        let i = self.regions.iter().rposition(|r| r.0 <= w).unwrap_or(0);
        &self.regions[i]
    }

    pub fn x_at_state(&self, w: f64) -> f64 {
        let (_, _, b, th) = self.region(w);
        th.select(&self.shape, *b, self.lambda * self.scenario.xi(w))
    }

    pub fn x_at_xi(&self, xi: f64) -> f64 {
        self.x_at_state(self.scenario.state_of(xi))
    }

    /// `P[X ≥ level(b)]`, summed over benchmark regions from the
    /// states where `λξ` crosses the reach slope.
    pub fn prob_at_least(&self, level: impl Fn([f64; 2]) -> f64) -> f64 {
        self.regions
            .iter()
            .map(|(lo, hi, b, th)| {
                let y = th.reach(&self.shape, *b, level(*b));
                let from = if y == f64::INFINITY {
                    f64::NEG_INFINITY
                } else {
                    self.scenario.state_of(y / self.lambda)
                };
                (normal_cdf(*hi) - normal_cdf(from.max(*lo))).max(0.0)
            })
            .sum()
    }

    /// `P[X ≥ B₂]`.
    pub fn prob_b2(&self) -> f64 {
        self.prob_at_least(|b| b[1])
    }
}

fn constraint_prob(s: &VarScenario, mu: f64, engine: &ExpectationEngine) -> Result<(f64, SolveReport)> {
    let report = solve(&s.problem(mu, engine)?)?;
    let lambda = report
        .lambda_star
        .ok_or_else(|| Error::NumericalBracketFailure(format!("no multiplier at mu = {mu}")))?;
    Ok((VarSolution::new(s, mu, lambda)?.prob_b2(), report))
}

const PRESCAN: usize = 20;

/// Binds `P[X ≥ B₂] = 1 − α` by bisection on `μ`, each step solving the
/// budget problem for `U^μ`.
pub fn var_solve_with(s: &VarScenario, engine: &ExpectationEngine) -> Result<SolveReport> {
    s.validate()?;
    let target = 1.0 - s.alpha;
    let cap = s.mu_cap();
    let mut scan = Vec::with_capacity(PRESCAN);
    for i in 0..PRESCAN {
        let mu = if i == 0 { 0.0 } else { cap * 10f64.powf(-9.0 * (PRESCAN - 1 - i) as f64 / (PRESCAN - 2) as f64) };
        let (prob, rep) = constraint_prob(s, mu, engine)?;
        if i == 0 && prob >= target {
            return finish(s, 0.0, rep);
        }
        scan.push((mu, prob));
    }
    for w in scan.windows(2) {
        if w[1].1 < w[0].1 - 1e-9 {
            return Err(Error::NumericalBracketFailure(format!(
                "P[X >= B2] is not monotone in mu: {} at mu = {}, {} at mu = {}",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    let best = scan[PRESCAN - 1].1;
    if best < target {
        return Err(Error::ConstraintUnreachable { best, target });
    }
    let i = scan.iter().position(|(_, q)| *q >= target).expect("cap reaches target");
    let (mut lo, mut hi) = (scan[i - 1].0, scan[i].0);
    let mut at_hi = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (prob, rep) = constraint_prob(s, mid, engine)?;
        if prob >= target {
            hi = mid;
            at_hi = Some(rep);
            if prob - target < 1e-10 {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let rep = match at_hi {
        Some(r) => r,
        None => constraint_prob(s, hi, engine)?.1,
    };
    finish(s, hi, rep)
}

pub fn var_solve(s: &VarScenario) -> Result<SolveReport> {
    var_solve_with(s, &ExpectationEngine::default())
}

fn finish(s: &VarScenario, mu: f64, mut rep: SolveReport) -> Result<SolveReport> {
    let lambda = rep.lambda_star.expect("checked by constraint_prob");
    let sol = VarSolution::new(s, mu, lambda)?;
    let [_, _, l3, l4] = s.levels;
    rep.mu_star = Some(mu);
    rep.metrics.insert("prob_b2".into(), sol.prob_b2());
    rep.metrics.insert("prob_l3".into(), sol.prob_at_least(|_| l3));
    rep.metrics.insert("prob_l4".into(), sol.prob_at_least(|_| l4));
    Ok(rep)
}

/// Solution of `s` rebuilt from a finished report.
pub fn var_solution(s: &VarScenario, rep: &SolveReport) -> Result<VarSolution> {
    let lambda = rep
        .lambda_star
        .ok_or_else(|| Error::NumericalBracketFailure("report has no multiplier".into()))?;
    VarSolution::new(s, rep.mu_star.unwrap_or(0.0), lambda)
}

/// A maximal stretch of `ξ` values with its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiInterval {
    #[serde(with = "ext_serde")]
    pub xi_lo: f64,
    #[serde(with = "ext_serde")]
    pub xi_hi: f64,
    pub prob: f64,
}

const SCAN_SPAN: f64 = 8.0;
const SCAN_STEPS: usize = 16_000;

/// States where `pred` holds, as `ξ` intervals.
pub fn xi_region(s: &VarScenario, pred: impl Fn(f64) -> bool) -> Vec<XiInterval> {
    let step = 2.0 * SCAN_SPAN / SCAN_STEPS as f64;
    let edge = |mut a: f64, mut b: f64| {
        let want = pred(b);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if pred(m) == want {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let mut out = Vec::new();
    let mut start = pred(-SCAN_SPAN).then_some(f64::NEG_INFINITY);
    let mut prev = -SCAN_SPAN;
    for i in 1..=SCAN_STEPS {
        let w = -SCAN_SPAN + step * i as f64;
        let inside = pred(w);
        match (start, inside) {
            (None, true) => start = Some(edge(prev, w)),
            (Some(a), false) => {
                out.push((a, edge(prev, w)));
                start = None;
            }
            _ => {}
        }
        prev = w;
    }
    if let Some(a) = start {
        out.push((a, f64::INFINITY));
    }
    out.into_iter()
        .rev()
        .map(|(a, b)| XiInterval {
            xi_lo: if b == f64::INFINITY { 0.0 } else { s.xi(b) },
            xi_hi: if a == f64::NEG_INFINITY { f64::INFINITY } else { s.xi(a) },
            prob: normal_cdf(b) - normal_cdf(a),
        })
        .collect()
}

fn beats(a: f64, b: f64) -> bool {
    a > b + 1e-9 * b.abs().max(1.0)
}

/// Where `a` pays strictly more than `b`.
pub fn superiority_region(a: &VarSolution, b: &VarSolution) -> Vec<XiInterval> {
    xi_region(a.scenario(), |w| beats(a.x_at_state(w), b.x_at_state(w)))
}

/// Where `a` pays strictly more than every one of `others`.
pub fn top_region(a: &VarSolution, others: &[&VarSolution]) -> Vec<XiInterval> {
    xi_region(a.scenario(), |w| {
        let x = a.x_at_state(w);
        others.iter().all(|o| beats(x, o.x_at_state(w)))
    })
}
