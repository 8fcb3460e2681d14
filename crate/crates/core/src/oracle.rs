//! Brute-force optimizer over small discrete instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::concavify;
use crate::error::{invalid, Error, Result};
use crate::solver::Problem;
use crate::statespace::StateDistribution;
use crate::utility::UtilityFamily;

const EXHAUSTIVE_LIMIT: f64 = 1e7;
const LATTICE_CELLS: f64 = 5e7;
const SCAN_LIMIT: f64 = 1e8;
const SCAN_POINTS: usize = 4001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleAtom {
    pub prob: f64,
    pub xi: f64,
    pub b: Vec<f64>,
}

/// Finite version of the budget problem: each atom picks a wealth level
/// from its own grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteInstance {
    pub atoms: Vec<OracleAtom>,
    pub wealth_grid: Vec<Vec<f64>>,
    pub x0: f64,
}

impl DiscreteInstance {
    /// The same grid at every atom.
    pub fn shared_grid(atoms: Vec<OracleAtom>, grid: Vec<f64>, x0: f64) -> Self {
        let wealth_grid = vec![grid; atoms.len()];
        Self { atoms, wealth_grid, x0 }
    }

    /// Atoms of a problem on a discrete state.
    pub fn from_problem(p: &Problem, grid: Vec<f64>) -> Result<Self> {
        let StateDistribution::Discrete(list) = p.dist() else {
            return Err(invalid("oracle instance", "the state must be discrete"));
        };
        let atoms = list
            .iter()
            .map(|a| OracleAtom { prob: a.prob, xi: p.xi(a.value), b: p.benchmark().eval(a.value) })
            .collect();
        Ok(Self::shared_grid(atoms, grid, p.x0()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() || self.atoms.len() != self.wealth_grid.len() {
            return Err(invalid("oracle instance", "need one nonempty grid per atom"));
        }
        let total: f64 = self.atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-9 || self.atoms.iter().any(|a| !(a.prob >= 0.0)) {
            return Err(invalid("oracle instance", format!("probabilities sum to {total}")));
        }
        if self.atoms.iter().any(|a| !(a.xi > 0.0 && a.xi.is_finite())) {
            return Err(invalid("oracle instance", "prices must be positive and finite"));
        }
        for g in &self.wealth_grid {
            if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) || g.iter().any(|x| !x.is_finite()) {
                return Err(invalid("oracle instance", "grids must be finite and strictly increasing"));
            }
        }
        if !self.x0.is_finite() {
            return Err(invalid("oracle instance", "x0 must be finite"));
        }
        Ok(())
    }

    pub fn search_space(&self) -> f64 {
        self.wealth_grid.iter().map(|g| g.len() as f64).product()
    }
}

/// Which utility the oracle maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Utility,
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BruteMode {
    /// Every assignment visited.
    Exhaustive,
    /// Dynamic programme over integer multiples of a common cost unit.
    Lattice,
    /// Per-atom argmax over a multiplier grid with exchange repair.
    Scan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteResult {
    pub value: f64,
    pub assignment: Vec<f64>,
    pub cost: f64,
    pub mode: BruteMode,
}

struct Table {
    costs: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

fn table(inst: &DiscreteInstance, family: &dyn UtilityFamily, objective: Objective) -> Result<Table> {
    let mut costs = Vec::with_capacity(inst.atoms.len());
    let mut values = Vec::with_capacity(inst.atoms.len());
    for (a, grid) in inst.atoms.iter().zip(&inst.wealth_grid) {
        let u = family.utility(&a.b)?;
        let lower = u.lower_bound();
        if lower.is_finite() && !grid.contains(&lower) {
            return Err(invalid("oracle instance", format!("grid misses the lower bound {lower}")));
        }
        let eval: Box<dyn Fn(f64) -> f64> = match objective {
            Objective::Utility => Box::new(move |x| u.eval(x)),
            Objective::Envelope => {
                let e = concavify(&u)?;
                Box::new(move |x| e.eval(x))
            }
        };
        costs.push(grid.iter().map(|x| a.prob * a.xi * x).collect());
        values.push(grid.iter().map(|x| a.prob * eval(*x)).collect());
    }
    Ok(Table { costs, values })
}

/// Best assignment of grid levels under the budget.
pub fn brute_solve(inst: &DiscreteInstance, family: &dyn UtilityFamily, objective: Objective) -> Result<BruteResult> {
    inst.validate()?;
    let t = table(inst, family, objective)?;
    let min_cost: f64 = t.costs.iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).sum();
    let slack = 1e-12 * inst.x0.abs().max(1.0);
    if min_cost > inst.x0 + slack {
        return Err(Error::Infeasible { x0: inst.x0, min_cost });
    }
    let budget = inst.x0 + slack;
    let space = inst.search_space();
    let (choice, mode) = if space <= EXHAUSTIVE_LIMIT {
        (exhaustive(&t, budget), BruteMode::Exhaustive)
    } else if let Some(c) = lattice(&t, inst.x0) {
        (c, BruteMode::Lattice)
    } else {
        let cells: f64 = inst.wealth_grid.iter().map(|g| g.len() as f64).sum::<f64>() * SCAN_POINTS as f64;
        if cells > SCAN_LIMIT {
            return Err(Error::SearchSpaceTooLarge { size: space });
        }
        (scan(&t, budget), BruteMode::Scan)
    };
    let value = choice.iter().enumerate().map(|(i, &j)| t.values[i][j]).sum();
    let cost = choice.iter().enumerate().map(|(i, &j)| t.costs[i][j]).sum();
    let assignment = choice.iter().enumerate().map(|(i, &j)| inst.wealth_grid[i][j]).collect();
    Ok(BruteResult { value, assignment, cost, mode })
}

fn exhaustive(t: &Table, budget: f64) -> Vec<usize> {
    let n = t.costs.len();
    let mut min_rest = vec![0.0; n + 1];
    let mut max_rest = vec![0.0; n + 1];
    for i in (0..n).rev() {
        min_rest[i] = min_rest[i + 1] + t.costs[i].iter().copied().fold(f64::INFINITY, f64::min);
        max_rest[i] = max_rest[i + 1] + t.values[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let first = t.costs[0].len();
    let branches: Vec<(f64, Vec<usize>)> = (0..first)
        .into_par_iter()
        .filter_map(|j| {
            let c = t.costs[0][j];
            if c + min_rest[1] > budget {
                return None;
            }
            let mut dfs = Dfs {
                t,
                budget,
                min_rest: &min_rest,
                max_rest: &max_rest,
                path: vec![j],
                best: f64::NEG_INFINITY,
                best_path: Vec::new(),
            };
            dfs.go(1, c, t.values[0][j]);
            (!dfs.best_path.is_empty()).then_some((dfs.best, dfs.best_path))
        })
        .collect();
    branches
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |acc, b| if b.0 > acc.0 || acc.1.is_empty() { b } else { acc })
        .1
}

struct Dfs<'a> {
    t: &'a Table,
    budget: f64,
    min_rest: &'a [f64],
    max_rest: &'a [f64],
    path: Vec<usize>,
    best: f64,
    best_path: Vec<usize>,
}

impl Dfs<'_> {
    fn go(&mut self, i: usize, cost: f64, value: f64) {
        if i == self.t.costs.len() {
            if value > self.best || self.best_path.is_empty() {
                self.best = value;
                self.best_path = self.path.clone();
            }
            return;
        }
        if !self.best_path.is_empty() && value + self.max_rest[i] <= self.best {
            return;
        }
        for j in 0..self.t.costs[i].len() {
            let c = cost + self.t.costs[i][j];
            if c + self.min_rest[i + 1] > self.budget {
                continue;
            }
            self.path.push(j);
            self.go(i + 1, c, value + self.t.values[i][j]);
            self.path.pop();
        }
    }
}

fn float_gcd(mut a: f64, mut b: f64, tol: f64) -> f64 {
    while b > tol {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Exact optimum when every shifted cost is an integer multiple of one unit.
fn lattice(t: &Table, x0: f64) -> Option<Vec<usize>> {
    let n = t.costs.len();
    let base: Vec<f64> = t.costs.iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let shifted: Vec<Vec<f64>> = t.costs.iter().zip(&base).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
    let scale = shifted.iter().flatten().copied().fold(0.0, f64::max);
    if scale <= 0.0 {
        return Some(vec![0; n]);
    }
    let tol = 1e-9 * scale;
    let unit = shifted.iter().flatten().filter(|v| **v > tol).fold(0.0, |g, v| float_gcd(v.max(g), v.min(g), tol));
    if !(unit > tol) {
        return None;
    }
    let mut steps = Vec::with_capacity(n);
    for row in &shifted {
        let mut r = Vec::with_capacity(row.len());
        for v in row {
            let q = v / unit;
            if (q - q.round()).abs() > 1e-6 {
                return None;
            }
            r.push(q.round() as usize);
        }
        steps.push(r);
    }
    let room = x0 - base.iter().sum::<f64>();
    let cap = ((room / unit) + 1e-7).floor();
    let max_total: f64 = steps.iter().map(|r| *r.iter().max().unwrap_or(&0) as f64).sum();
    let cap = cap.min(max_total);
    if cap < 0.0 || (cap + 1.0) * n as f64 > LATTICE_CELLS {
        return None;
    }
    let width = cap as usize + 1;
    let mut best = vec![0.0f64; width];
    let mut pick = vec![u32::MAX; n * width];
    for i in 0..n {
        let mut next = vec![f64::NEG_INFINITY; width];
        for (j, (&s, &v)) in steps[i].iter().zip(&t.values[i]).enumerate() {
            if s >= width {
                continue;
            }
            for b in s..width {
                let cand = best[b - s] + v;
                if cand > next[b] || pick[i * width + b] == u32::MAX {
                    next[b] = cand;
                    pick[i * width + b] = j as u32;
                }
            }
        }
        best = next;
    }
    let mut choice = vec![0usize; n];
    let mut b = width - 1;
    for i in (0..n).rev() {
        let j = pick[i * width + b] as usize;
        choice[i] = j;
        b -= steps[i][j];
    }
    Some(choice)
}

fn total(t: &Table, choice: &[usize]) -> (f64, f64) {
    choice.iter().enumerate().fold((0.0, 0.0), |(c, v), (i, &j)| (c + t.costs[i][j], v + t.values[i][j]))
}

fn scan(t: &Table, budget: f64) -> Vec<usize> {
    let finite = t.values.iter().flatten().copied().filter(|v| v.is_finite());
    let spread = finite.clone().fold(f64::NEG_INFINITY, f64::max) - finite.fold(f64::INFINITY, f64::min);
    let tick = t
        .costs
        .iter()
        .flat_map(|c| c.windows(2).map(|w| (w[1] - w[0]).abs()))
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let scale = if spread > 0.0 && tick.is_finite() { spread / tick } else { 1.0 };
    let lambdas: Vec<f64> = std::iter::once(0.0)
        .chain((0..SCAN_POINTS - 1).map(|k| scale * 10f64.powf(-12.0 + 14.0 * k as f64 / (SCAN_POINTS - 2) as f64)))
        .collect();
    let argmax = |lambda: f64| -> Vec<usize> {
        t.costs
            .iter()
            .zip(&t.values)
            .map(|(c, v)| {
                (0..c.len())
                    .max_by(|&a, &b| {
                        let fa = v[a] - lambda * c[a];
                        let fb = v[b] - lambda * c[b];
                        fa.total_cmp(&fb).then(c[b].total_cmp(&c[a]))
                    })
                    .unwrap_or(0)
            })
            .collect()
    };
    let candidates: Vec<Vec<usize>> = lambdas.par_iter().map(|l| argmax(*l)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (k, c) in candidates.iter().enumerate() {
        let feasible = total(t, c).0 <= budget;
        let boundary = candidates.get(k + 1).is_some_and(|n| total(t, n).0 <= budget);
        if !feasible && !boundary {
            continue;
        }
        let mut choice = c.clone();
        repair(t, &mut choice, budget);
        let (cost, value) = total(t, &choice);
        if cost <= budget && best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, choice));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| {
        let mut c: Vec<usize> = t
            .costs
            .iter()
            .map(|c| (0..c.len()).min_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap_or(0))
            .collect();
        repair(t, &mut c, budget);
        c
    })
}

/// Greedy downgrades until the budget holds, then single-atom upgrades
/// while any improves the value.
fn repair(t: &Table, choice: &mut [usize], budget: f64) {
    let mut cost = total(t, choice).0;
    while cost > budget {
        let mut pick: Option<(f64, usize, usize)> = None;
        for (i, &j) in choice.iter().enumerate() {
            for k in 0..t.costs[i].len() {
                let saved = t.costs[i][j] - t.costs[i][k];
                if saved <= 0.0 {
                    continue;
                }
                let loss = t.values[i][j] - t.values[i][k];
                let rate = loss / saved;
                if pick.is_none_or(|p| rate < p.0) {
                    pick = Some((rate, i, k));
                }
            }
        }
        let Some((_, i, k)) = pick else { return };
        cost -= t.costs[i][choice[i]] - t.costs[i][k];
        choice[i] = k;
    }
    loop {
        let mut pick: Option<(f64, usize, usize)> = None;
        for (i, &j) in choice.iter().enumerate() {
            for k in 0..t.costs[i].len() {
                let gain = t.values[i][k] - t.values[i][j];
                if gain <= 0.0 || cost - t.costs[i][j] + t.costs[i][k] > budget {
                    continue;
                }
                if pick.is_none_or(|p| gain > p.0) {
                    pick = Some((gain, i, k));
                }
            }
        }
        let Some((_, i, k)) = pick else { return };
        cost += t.costs[i][k] - t.costs[i][choice[i]];
        choice[i] = k;
    }
}

/// `max_i p_i · max_j (Ũ(x_{j+1}) − Ũ(x_j))`: the most one grid step can
/// be worth.
pub fn grid_resolution(inst: &DiscreteInstance, family: &dyn UtilityFamily) -> Result<f64> {
    let t = table(inst, family, Objective::Envelope)?;
    Ok(t.values
        .iter()
        .flat_map(|v| v.windows(2).map(|w| (w[1] - w[0]).abs()))
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max))
}

/// Solves on grids from `make(level)`, doubling the level until the value
/// moves by less than `1e-4`.
pub fn brute_refine(
    make: impl Fn(usize) -> DiscreteInstance,
    family: &dyn UtilityFamily,
    objective: Objective,
    max_level: usize,
) -> Result<(BruteResult, usize)> {
    let mut level = 1;
    let mut last = brute_solve(&make(level), family, objective)?;
    while level < max_level {
        level *= 2;
        let next = brute_solve(&make(level), family, objective)?;
        let moved = (next.value - last.value).abs();
        last = next;
        if moved < 1e-4 {
            break;
        }
    }
    Ok((last, level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{Digital, TwoPiece};

    fn atoms(xi: &[f64]) -> Vec<OracleAtom> {
        let p = 1.0 / xi.len() as f64;
        xi.iter().map(|x| OracleAtom { prob: p, xi: *x, b: vec![1.0] }).collect()
    }

    #[test]
    fn digital_pair() {
        let inst = DiscreteInstance::shared_grid(atoms(&[1.0, 1.0]), vec![0.0, 1.0], 0.5);
        let r = brute_solve(&inst, &Digital::default(), Objective::Utility).unwrap();
        assert_eq!(r.mode, BruteMode::Exhaustive);
        assert_eq!(r.value, 0.5);
        assert_eq!(r.assignment.iter().filter(|x| **x == 1.0).count(), 1);
    }

    #[test]
    fn infeasible_budget() {
        let inst = DiscreteInstance::shared_grid(atoms(&[1.0, 2.0]), vec![0.0, 1.0], -0.1);
        assert!(matches!(
            brute_solve(&inst, &Digital::default(), Objective::Utility),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn modes_agree() {
        let grid: Vec<f64> = (0..9).map(|j| j as f64 * 0.25).collect();
        let inst = DiscreteInstance::shared_grid(atoms(&[0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]), grid, 0.8);
        let t = table(&inst, &TwoPiece, Objective::Utility).unwrap();
        let budget = inst.x0 + 1e-12;
        let e = total(&t, &exhaustive(&t, budget)).1;
        let l = total(&t, &lattice(&t, inst.x0).unwrap()).1;
        let s = total(&t, &scan(&t, budget)).1;
        assert!((e - l).abs() < 1e-12);
        assert!(s <= e + 1e-12 && s >= e - 0.25);
    }

    #[test]
    fn grid_must_hold_floor() {
        let inst = DiscreteInstance::shared_grid(atoms(&[1.0]), vec![0.5, 1.0], 1.0);
        assert!(brute_solve(&inst, &Digital::default(), Objective::Utility).is_err());
    }
}
