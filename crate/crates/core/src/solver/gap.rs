use std::cell::Cell;

use crate::conjugate::maximizer_set;
use crate::error::{Error, Result};
use crate::numeric::bracketed_root;
use crate::statespace::{StateDistribution, NORMAL_SPAN};

use super::problem::{cost, select_local, Local, Problem, Side};
use super::sampler::{Plan, SolutionSampler};
use super::selection_cost;

const MAX_COMBINATIONS: f64 = 1e6;

/// Largest usable maximizer at slope `y`; an unbounded stretch is cut at
/// `X̲ + cap`.
pub(crate) fn top(local: &Local, y: f64, cap: f64) -> Result<f64> {
    let parts = maximizer_set(&local.env, y)?;
    let low = parts[0].0;
    let (a, b) = parts[parts.len() - 1];
    if b < f64::INFINITY {
        return Ok(b);
    }
    if a < f64::INFINITY {
        return Ok((low + cap).max(a));
    }
    Ok(if parts.len() > 1 { parts[parts.len() - 2].1 } else { low })
}

/// The `n`-th member (from 1) of the optimal family at a jump `λ` of `g`.
pub fn construct_gap_family(p: &Problem, lambda: f64, x0: f64, n: usize) -> Result<SolutionSampler> {
    let p = p.with_x0(x0);
    let right = selection_cost(&p, lambda, Side::Lower)?;
    let left = selection_cost(&p, lambda, Side::Upper)?;
    let tol = p.budget_tolerance(right.std_error.max(left.std_error));
    if !(x0 >= right.mean - tol && x0 <= left.mean + tol) {
        return Err(Error::NotAGap(format!(
            "x0 = {x0} outside [g(λ), g(λ−)] = [{}, {}] at λ = {lambda}",
            right.mean, left.mean
        )));
    }
    if (x0 - right.mean).abs() <= tol {
        return Ok(SolutionSampler::new(&p, Plan::Selection { lambda, side: Side::Lower }));
    }
    if (x0 - left.mean).abs() <= tol {
        return Ok(SolutionSampler::new(&p, Plan::Selection { lambda, side: Side::Upper }));
    }
    let n = n.max(1);
    let mut members = family(&p, lambda, x0, n)?;
    let k = (n - 1) % members.len();
    Ok(members.swap_remove(k))
}

/// Up to `count` distinct optimal solutions spending `x0` at the jump `λ`.
pub(crate) fn family(p: &Problem, lambda: f64, x0: f64, count: usize) -> Result<Vec<SolutionSampler>> {
    let base = selection_cost(p, lambda, Side::Lower)?.mean;
    let a = x0 - base;
    match p.dist() {
        StateDistribution::Discrete(_) => atoms(p, lambda, a, count),
        _ => windows(p, lambda, a, count),
    }
}

fn windows(p: &Problem, lambda: f64, a: f64, count: usize) -> Result<Vec<SolutionSampler>> {
    let spread = |cap: f64, t: f64| {
        p.integrate(lambda, &[t], |w, xi, l| {
            if w >= t {
                return Ok(0.0);
            }
            let y = lambda * xi;
            let low = select_local(l, y, Side::Lower)?;
            Ok(cost(xi, top(l, y, cap)? - low))
        })
        .map(|e| e.mean)
    };
    let mut cap = f64::INFINITY;
    let mut total = spread(cap, f64::INFINITY)?;
    if !total.is_finite() {
        cap = 1.0;
        loop {
            total = spread(cap, f64::INFINITY)?;
            if total >= a {
                break;
            }
            cap *= 4.0;
            if cap > 1e300 {
                return Err(Error::NotAGap(format!("cannot spend {a} above g(λ) at λ = {lambda}")));
            }
        }
    }
    if total < a * (1.0 - 1e-12) {
        return Err(Error::NotAGap(format!("jump of size {total} cannot absorb {a}")));
    }
    let (lo, hi) = match p.dist().support() {
        (l, h) if l.is_finite() && h.is_finite() => (l, h),
        _ => (-2.0 * NORMAL_SPAN, 2.0 * NORMAL_SPAN),
    };
    let failure: Cell<Option<Error>> = Cell::new(None);
    let level = |target: f64| -> Result<f64> {
        if target <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if target >= total {
            return Ok(f64::INFINITY);
        }
        let f = |t: f64| match spread(cap, t) {
            Ok(m) => m - target,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let t = bracketed_root(f, lo, hi, 1e-15, 1e-14 * total.max(1.0));
        match failure.take() {
            Some(e) => Err(e),
            None => Ok(t),
        }
    };
    let slack = total - a;
    let mut out = Vec::with_capacity(count);
    for n in 1..=count {
        let c = slack * (1.0 - 1.0 / n as f64);
        let t1 = level(c)?;
        let t2 = level(c + a)?;
        out.push(SolutionSampler::new(p, Plan::Window { lambda, cap, lo: t1, hi: t2 }));
    }
    Ok(out)
}

struct GapAtom {
    w: f64,
    weight: f64,
    low: f64,
    parts: Vec<(f64, f64)>,
}

fn atoms(p: &Problem, lambda: f64, a: f64, count: usize) -> Result<Vec<SolutionSampler>> {
    let StateDistribution::Discrete(list) = p.dist() else {
        unreachable!("atom allocation on a discrete state only")
    };
    let mut gaps = Vec::new();
    for (atom, (w, local)) in list.iter().zip(p.atom_locals()) {
        let xi = p.xi(w);
        let parts = maximizer_set(&local.env, lambda * xi)?;
        if parts.len() == 1 && parts[0].0 == parts[0].1 {
            continue;
        }
        gaps.push(GapAtom { w, weight: atom.prob * xi, low: parts[0].0, parts });
    }
    let combos: f64 = gaps.iter().map(|g| g.parts.len() as f64).product();
    if combos > MAX_COMBINATIONS {
        return Err(Error::AtomicGap(format!("{combos} combinations of atom choices")));
    }
    let tol = p.budget_tolerance(0.0);
    let mut choice = vec![0usize; gaps.len()];
    let mut found: Vec<Vec<(f64, f64)>> = Vec::new();
    'outer: loop {
        let (mut lsum, mut hsum) = (0.0, 0.0);
        for (g, &k) in gaps.iter().zip(&choice) {
            let (l, h) = g.parts[k];
            lsum += cost(g.weight, l - g.low);
            hsum += cost(g.weight, h - g.low);
        }
        if a >= lsum - tol && a <= hsum + tol {
            for reverse in [false, true] {
                let values = allocate(&gaps, &choice, a - lsum, reverse);
                if !found.iter().any(|f| same(f, &values)) {
                    found.push(values);
                    if found.len() >= count {
                        break 'outer;
                    }
                }
            }
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                break 'outer;
            }
            choice[i] += 1;
            if choice[i] < gaps[i].parts.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
    if found.is_empty() {
        return Err(Error::AtomicGap(format!(
            "no choice of maximizers at the atoms spends {a} above g(λ) at λ = {lambda}"
        )));
    }
    Ok(found
        .into_iter()
        .map(|values| SolutionSampler::new(p, Plan::Atoms { lambda, values }))
        .collect())
}

fn allocate(gaps: &[GapAtom], choice: &[usize], mut rest: f64, reverse: bool) -> Vec<(f64, f64)> {
    let mut values: Vec<(f64, f64)> = gaps.iter().zip(choice).map(|(g, &k)| (g.w, g.parts[k].0)).collect();
    let order: Vec<usize> = if reverse { (0..gaps.len()).rev().collect() } else { (0..gaps.len()).collect() };
    for i in order {
        if rest <= 0.0 {
            break;
        }
        let g = &gaps[i];
        let (l, h) = g.parts[choice[i]];
        let room = if h == f64::INFINITY { f64::INFINITY } else { g.weight * (h - l) };
        let take = rest.min(room);
        values[i].1 = l + take / g.weight;
        rest -= take;
    }
    values
}

fn same(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x.1 - y.1).abs() <= 1e-12 * x.1.abs().max(1.0))
}
