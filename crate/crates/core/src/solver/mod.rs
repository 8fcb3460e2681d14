//! Multiplier search and solution construction for the budget problem.

mod diagnostics;
mod gap;
mod problem;
mod sampler;

use std::cell::Cell;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bracketed_root, ext_serde};
use crate::statespace::Estimate;

pub use diagnostics::{check_case1_sufficient, Case1Check, Moment};
pub use gap::construct_gap_family;
pub use problem::{Local, Problem, Side};
pub use sampler::{Plan, SolutionSampler};

use problem::{bracket_err, cost, select_local};

const LAMBDA_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Infeasible,
    Boundary,
    Unique,
    NonUnique,
    Bliss,
    Unattainable,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseInfo {
    pub case: u8,
    #[serde(with = "ext_serde")]
    pub lambda0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityStatus {
    Infeasible,
    Boundary,
    Interior,
    BlissAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub status: FeasibilityStatus,
    #[serde(with = "ext_serde")]
    pub min_cost: f64,
    #[serde(with = "ext_serde")]
    pub bliss_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub lambda: f64,
    #[serde(with = "ext_serde")]
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub classification: Classification,
    pub case: u8,
    #[serde(with = "ext_serde")]
    pub lambda0: f64,
    #[serde(with = "ext_serde::option")]
    pub lambda_star: Option<f64>,
    #[serde(with = "ext_serde::option")]
    pub mu_star: Option<f64>,
    pub x0: f64,
    pub feasibility: Feasibility,
    #[serde(with = "ext_serde::option")]
    pub theta: Option<f64>,
    #[serde(with = "ext_serde::option")]
    pub budget_used: Option<f64>,
    #[serde(with = "ext_serde")]
    pub optimal_value: f64,
    /// `optimal_value` is only an upper bound on the supremum.
    pub value_is_bound: bool,
    #[serde(with = "ext_serde::option")]
    pub value_bound: Option<f64>,
    pub bound_exact: bool,
    pub value_ladder: Vec<LadderPoint>,
    pub family_size: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip)]
    pub solutions: Vec<SolutionSampler>,
}

impl SolveReport {
    fn new(x0: f64, info: CaseInfo, feasibility: Feasibility) -> Self {
        Self {
            classification: Classification::Infeasible,
            case: info.case,
            lambda0: info.lambda0,
            lambda_star: None,
            mu_star: None,
            x0,
            feasibility,
            theta: None,
            budget_used: None,
            optimal_value: f64::NEG_INFINITY,
            value_is_bound: false,
            value_bound: None,
            bound_exact: false,
            value_ladder: Vec::new(),
            family_size: 0,
            metrics: BTreeMap::new(),
            solutions: Vec::new(),
        }
    }

    /// The first (or only) optimal solution.
    pub fn solution(&self) -> Option<&SolutionSampler> {
        self.solutions.first()
    }

    fn adopt(&mut self, class: Classification, solutions: Vec<SolutionSampler>) -> Result<()> {
        self.classification = class;
        if let Some(s) = solutions.first() {
            self.budget_used = Some(s.budget()?.mean);
            self.optimal_value = s.value()?.mean;
            self.lambda_star = s.lambda();
        }
        self.family_size = solutions.len();
        self.solutions = solutions;
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::NegativeDual(lambda));
    }
    Ok(())
}

fn selection_cost(p: &Problem, lambda: f64, side: Side) -> Result<Estimate> {
    check_lambda(lambda)?;
    if lambda < p.lambda0() * (1.0 - 1e-12) {
        return Ok(Estimate { mean: f64::INFINITY, std_error: 0.0 });
    }
    p.integrate(lambda, &[], |_, xi, l| Ok(cost(xi, select_local(l, lambda * xi, side)?)))
}

fn selection_value(p: &Problem, lambda: f64, side: Side) -> Result<Estimate> {
    check_lambda(lambda)?;
    p.integrate(lambda, &[], |_, xi, l| Ok(l.utility(select_local(l, lambda * xi, side)?)))
}

/// `g(λ) = E[ξ X̲_B(λξ)]`.
pub fn eval_g(p: &Problem, lambda: f64) -> Result<f64> {
    Ok(selection_cost(p, lambda, Side::Lower)?.mean)
}

/// `g(λ−) = E[ξ X̄_B(λξ)]`.
pub fn eval_g_left(p: &Problem, lambda: f64) -> Result<f64> {
    Ok(selection_cost(p, lambda, Side::Upper)?.mean)
}

/// `J(λ) = E[U(X̲_B(λξ), B)]`.
pub fn eval_j(p: &Problem, lambda: f64) -> Result<f64> {
    Ok(selection_value(p, lambda, Side::Lower)?.mean)
}

/// `E[U(X̄_B(λξ), B)]`.
pub fn eval_j_left(p: &Problem, lambda: f64) -> Result<f64> {
    Ok(selection_value(p, lambda, Side::Upper)?.mean)
}

pub fn classify_case(p: &Problem) -> CaseInfo {
    let lambda0 = p.lambda0();
    let case = if lambda0 == 0.0 {
        1
    } else if lambda0 == f64::INFINITY {
        3
    } else {
        2
    };
    CaseInfo { case, lambda0 }
}

pub fn feasibility(p: &Problem) -> Result<Feasibility> {
    let min_cost = p.integrate(f64::INFINITY, &[], |_, xi, l| Ok(cost(xi, l.lower)))?.mean;
    let bliss_cost = p.integrate(0.0, &[], |_, xi, l| Ok(cost(xi, l.bliss)))?.mean;
    let x0 = p.x0();
    let tol = p.budget_tolerance(0.0);
    let status = if x0 < min_cost - tol {
        FeasibilityStatus::Infeasible
    } else if x0 <= min_cost + tol {
        FeasibilityStatus::Boundary
    } else if bliss_cost.is_finite() && x0 >= bliss_cost - tol {
        FeasibilityStatus::BlissAvailable
    } else {
        FeasibilityStatus::Interior
    };
    Ok(Feasibility { status, min_cost, bliss_cost })
}

/// Multipliers `λ` at which `X̲_B(λξ) < X̄_B(λξ)` with positive
/// probability, found from the level sets of `ξ` on regions where the
/// benchmark is constant.
pub fn jump_candidates(p: &Problem) -> Vec<f64> {
    let mut v = Vec::new();
    if p.dist().is_discrete() {
        for (w, l) in p.atom_locals() {
            let xi = p.xi(w);
            v.extend(l.env.jump_slopes().into_iter().map(|j| j / xi));
        }
    } else {
        for (lo, hi, l) in p.regions() {
            let Some(l) = l else { continue };
            let jumps = l.env.jump_slopes();
            for ls in p.kernel().level_sets(p.dist(), lo, hi) {
                v.extend(jumps.iter().map(|j| j / ls.xi));
            }
        }
    }
    v.retain(|x| x.is_finite() && *x > 0.0);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * a.abs());
    v
}

/// Where the budget equation lands.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Landing {
    Root(f64),
    Jump { lambda: f64, right: f64, left: f64 },
}

struct Search<'a> {
    p: &'a Problem,
    x0: f64,
}

impl Search<'_> {
    fn g(&self, lambda: f64) -> Result<Estimate> {
        selection_cost(self.p, lambda, Side::Lower)
    }

    fn hits(&self, e: Estimate) -> bool {
        (e.mean - self.x0).abs() <= self.p.budget_tolerance(e.std_error)
    }

    fn land(&self, lower: f64) -> Result<Landing> {
        let x0 = self.x0;
        let cands: Vec<f64> = jump_candidates(self.p)
            .into_iter()
            .filter(|c| *c > lower * (1.0 + 1e-12))
            .collect();
        let (mut a, mut b) = (0, cands.len());
        while a < b {
            let mid = (a + b) / 2;
            if self.g(cands[mid])?.mean <= x0 {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        let mut lo = if a > 0 { cands[a - 1] } else { lower };
        let hi = if a < cands.len() {
            let c = cands[a];
            let gc = self.g(c)?;
            if self.hits(gc) {
                return Ok(Landing::Root(c));
            }
            let left = selection_cost(self.p, c, Side::Upper)?;
            if left.mean >= x0 - self.p.budget_tolerance(left.std_error) {
                return Ok(Landing::Jump { lambda: c, right: gc.mean, left: left.mean });
            }
            c
        } else {
            let mut hi = (2.0 * lo).max(1.0);
            loop {
                let g = self.g(hi)?;
                if g.mean <= x0 || self.hits(g) {
                    break;
                }
                hi *= 2.0;
                if hi > LAMBDA_CAP {
                    return Err(bracket_err(format!("g stays above x0 = {x0} up to λ = {LAMBDA_CAP}")));
                }
            }
            hi
        };
        if lo == 0.0 {
            lo = (0.5 * hi).min(1.0);
            while self.g(lo)?.mean <= x0 {
                lo *= 0.5;
                if lo < 1e-300 {
                    return Err(bracket_err(format!("g stays below x0 = {x0} down to λ = 0")));
                }
            }
        }
        let failure: Cell<Option<Error>> = Cell::new(None);
        let f = |l: f64| match self.g(l) {
            Ok(e) => e.mean - x0,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let root = bracketed_root(f, lo, hi, 1e-15 * hi, 1e-13 * x0.abs().max(1.0));
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let g = self.g(root)?;
        if self.hits(g) {
            return Ok(Landing::Root(root));
        }
        let left = selection_cost(self.p, root, Side::Upper)?;
        if g.mean < x0 && x0 <= left.mean + self.p.budget_tolerance(left.std_error) {
            return Ok(Landing::Jump { lambda: root, right: g.mean, left: left.mean });
        }
        Err(bracket_err(format!(
            "bracket collapsed at λ = {root} with g = {} and g(λ−) = {} around x0 = {x0}",
            g.mean, left.mean
        )))
    }
}

/// Solves the problem and classifies the answer.
pub fn solve(p: &Problem) -> Result<SolveReport> {
    let x0 = p.x0();
    let info = classify_case(p);
    let feas = feasibility(p)?;
    let mut rep = SolveReport::new(x0, info, feas);
    match feas.status {
        FeasibilityStatus::Infeasible => {
            rep.optimal_value = f64::NEG_INFINITY;
            return Ok(rep);
        }
        FeasibilityStatus::Boundary => {
            rep.adopt(Classification::Boundary, vec![SolutionSampler::new(p, Plan::Floor)])?;
            return Ok(rep);
        }
        _ => {}
    }
    let search = Search { p, x0 };
    match info.case {
        3 => infinite(p, &mut rep)?,
        1 => {
            if feas.status == FeasibilityStatus::BlissAvailable {
                rep.adopt(Classification::Bliss, vec![SolutionSampler::new(p, Plan::Bliss)])?;
            } else {
                finish(p, &mut rep, search.land(0.0)?)?;
            }
        }
        _ => {
            let l0 = info.lambda0;
            let g0 = selection_cost(p, l0, Side::Lower)?;
            if x0 <= g0.mean + p.budget_tolerance(g0.std_error) {
                let landing = if search.hits(g0) { Landing::Root(l0) } else { search.land(l0)? };
                finish(p, &mut rep, landing)?;
            } else {
                let theta = selection_cost(p, l0, Side::Upper)?;
                rep.theta = Some(theta.mean);
                if x0 > theta.mean + p.budget_tolerance(theta.std_error) {
                    unattainable(p, &mut rep, theta.mean)?;
                } else {
                    finish(p, &mut rep, Landing::Jump { lambda: l0, right: g0.mean, left: theta.mean })?;
                }
            }
        }
    }
    Ok(rep)
}

fn finish(p: &Problem, rep: &mut SolveReport, landing: Landing) -> Result<()> {
    let x0 = p.x0();
    match landing {
        Landing::Root(lambda) => rep.adopt(
            Classification::Unique,
            vec![SolutionSampler::new(p, Plan::Selection { lambda, side: Side::Lower })],
        ),
        Landing::Jump { lambda, right, left } => {
            let tol = p.budget_tolerance(0.0);
            if (x0 - right).abs() <= tol {
                return rep.adopt(
                    Classification::Unique,
                    vec![SolutionSampler::new(p, Plan::Selection { lambda, side: Side::Lower })],
                );
            }
            if (x0 - left).abs() <= tol {
                return rep.adopt(
                    Classification::Unique,
                    vec![SolutionSampler::new(p, Plan::Selection { lambda, side: Side::Upper })],
                );
            }
            let members = gap::family(p, lambda, x0, 3)?;
            let class = if members.len() > 1 { Classification::NonUnique } else { Classification::Unique };
            rep.adopt(class, members)
        }
    }
}

fn unattainable(p: &Problem, rep: &mut SolveReport, theta: f64) -> Result<()> {
    let l0 = rep.lambda0;
    let top = eval_j_left(p, l0)?;
    let bound = top + l0 * (p.x0() - theta);
    let exact = [0.5 * l0, (1.0 - 1e-3) * l0]
        .iter()
        .any(|&l| eval_j(p, l).map(|j| j < f64::INFINITY).unwrap_or(false));
    rep.classification = Classification::Unattainable;
    rep.lambda_star = Some(l0);
    rep.value_bound = Some(bound);
    rep.bound_exact = exact;
    if exact {
        rep.optimal_value = top;
    } else {
        rep.optimal_value = bound;
        rep.value_is_bound = true;
    }
    Ok(())
}

fn infinite(p: &Problem, rep: &mut SolveReport) -> Result<()> {
    let x0 = p.x0();
    let m = rep.feasibility.min_cost;
    let price = p.integrate(f64::INFINITY, &[], |_, xi, _| Ok(xi))?.mean;
    let delta = (x0 - m) / (2.0 * price);
    let base = SolutionSampler::new(p, Plan::Shifted { delta });
    let x1 = base.budget()?.mean;
    let v = base.value()?.mean;
    rep.classification = Classification::Infinite;
    rep.optimal_value = f64::INFINITY;
    rep.value_ladder = [1.0, 10.0, 100.0]
        .iter()
        .map(|&lambda| LadderPoint { lambda, lower_bound: v + lambda * (x0 - x1) })
        .collect();
    Ok(())
}

#[cfg(test)]
mod tests;
