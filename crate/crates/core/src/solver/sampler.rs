use crate::error::Result;
use crate::statespace::Estimate;

use super::gap;
use super::problem::{cost, select_local, Local, Problem, Side};

/// How a solution assigns wealth to each state.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    /// `X̲_B(λξ)` or `X̄_B(λξ)`.
    Selection { lambda: f64, side: Side },
    /// `x̲_B`.
    Floor,
    /// `x̄_B`.
    Bliss,
    /// `x̲_B + delta`.
    Shifted { delta: f64 },
    /// The gap top on `lo <= W < hi`, `X̲_B(λξ)` elsewhere.
    Window { lambda: f64, cap: f64, lo: f64, hi: f64 },
    /// Explicit values at atoms of a discrete state, `X̲_B(λξ)` elsewhere.
    Atoms { lambda: f64, values: Vec<(f64, f64)> },
}

/// A terminal wealth `X(w)` tied to its problem.
#[derive(Debug, Clone)]
pub struct SolutionSampler {
    problem: Problem,
    plan: Plan,
}

impl SolutionSampler {
    pub fn new(problem: &Problem, plan: Plan) -> Self {
        Self { problem: problem.clone(), plan }
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.plan {
            Plan::Selection { lambda, .. } | Plan::Window { lambda, .. } | Plan::Atoms { lambda, .. } => {
                Some(lambda)
            }
            _ => None,
        }
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        let local = self.problem.local_at(w)?;
        self.eval_local(w, self.problem.xi(w), &local)
    }

    pub(crate) fn eval_local(&self, w: f64, xi: f64, local: &Local) -> Result<f64> {
        Ok(match &self.plan {
            Plan::Selection { lambda, side } => select_local(local, lambda * xi, *side)?,
            Plan::Floor => local.lower,
            Plan::Bliss => local.bliss,
            Plan::Shifted { delta } => local.lower + delta,
            Plan::Window { lambda, cap, lo, hi } => {
                if w >= *lo && w < *hi {
                    gap::top(local, lambda * xi, *cap)?
                } else {
                    select_local(local, lambda * xi, Side::Lower)?
                }
            }
            Plan::Atoms { lambda, values } => {
                match values.binary_search_by(|(v, _)| v.total_cmp(&w)) {
                    Ok(i) => values[i].1,
                    Err(_) => select_local(local, lambda * xi, Side::Lower)?,
                }
            }
        })
    }

    fn cuts(&self) -> (f64, Vec<f64>) {
        match &self.plan {
            Plan::Selection { lambda, .. } | Plan::Atoms { lambda, .. } => (*lambda, Vec::new()),
            Plan::Window { lambda, lo, hi, .. } => (*lambda, vec![*lo, *hi]),
            _ => (f64::INFINITY, Vec::new()),
        }
    }

    /// `E[f(w, X(w), U(X(w), B(w)), ξ(w))]`.
    pub fn expect<F>(&self, f: F) -> Result<Estimate>
    where
        F: Fn(f64, f64, f64, f64) -> f64,
    {
        let (lambda, extra) = self.cuts();
        self.problem.integrate(lambda, &extra, |w, xi, l| {
            let x = self.eval_local(w, xi, l)?;
            Ok(f(w, x, l.utility(x), xi))
        })
    }

    /// `E[ξX]`.
    pub fn budget(&self) -> Result<Estimate> {
        self.expect(|_, x, _, xi| cost(xi, x))
    }

    /// `E[U(X, B)]`.
    pub fn value(&self) -> Result<Estimate> {
        self.expect(|_, _, u, _| u)
    }

    /// `P[X ≠ other]` on the engine's nodes.
    pub fn disagreement(&self, other: &SolutionSampler) -> Result<f64> {
        let (la, mut ea) = self.cuts();
        let (_, eb) = other.cuts();
        ea.extend(eb);
        let e = self.problem.integrate(la, &ea, |w, xi, l| {
            let a = self.eval_local(w, xi, l)?;
            let b = other.eval_local(w, xi, l)?;
            Ok(if a == b { 0.0 } else { 1.0 })
        })?;
        Ok(e.mean)
    }
}
