use std::sync::Arc;

use super::*;
use crate::statespace::{
    Atom, BenchmarkMap, ExpectationEngine, PiecewiseMap, PricingKernel, StateDistribution,
};
use crate::utility::{AffineFamily, Digital, SShaped, TwoPiece, UtilityFamily};

fn problem(
    dist: StateDistribution,
    kernel: PricingKernel,
    family: impl UtilityFamily + 'static,
    benchmark: BenchmarkMap,
    x0: f64,
) -> Problem {
    Problem::new(dist, kernel, Arc::new(family), benchmark, x0, ExpectationEngine::default()).unwrap()
}

fn two_piece(x0: f64) -> Problem {
    problem(
        StateDistribution::uniform(1.0, 2.0).unwrap(),
        PricingKernel::Identity,
        TwoPiece,
        BenchmarkMap::none(),
        x0,
    )
}

fn digital(x0: f64) -> Problem {
    problem(
        StateDistribution::StandardNormal,
        PricingKernel::Explicit(PiecewiseMap::constant(1.0)),
        Digital::default(),
        BenchmarkMap::constant(&[1.0]),
        x0,
    )
}

fn s_shaped(x0: f64) -> Problem {
    problem(
        StateDistribution::StandardNormal,
        PricingKernel::lognormal(0.03, 0.3, 10.0).unwrap(),
        SShaped::new(2.25, 0.5).unwrap(),
        BenchmarkMap::constant(&[60.0]),
        x0,
    )
}

#[test]
fn two_piece_g_curve() {
    let p = two_piece(1.0);
    assert_eq!(classify_case(&p), CaseInfo { case: 2, lambda0: 1.0 });
    for l in [1.0, 1.25, 1.5, 1.75, 2.0] {
        let g = eval_g(&p, l).unwrap();
        assert!((g - (4.0 - l * l) / (2.0 * l * l)).abs() < 1e-9, "λ={l} g={g}");
    }
    assert_eq!(eval_g(&p, 0.5).unwrap(), f64::INFINITY);
    assert_eq!(eval_g(&p, 3.0).unwrap(), 0.0);
    assert!((eval_j(&p, 1.5).unwrap() - 2.0 / 3.0).abs() < 1e-9);
    assert!(matches!(eval_g(&p, -1.0), Err(Error::NegativeDual(_))));
}

#[test]
fn two_piece_unique_root() {
    let rep = solve(&two_piece(7.0 / 18.0)).unwrap();
    assert_eq!(rep.classification, Classification::Unique);
    assert!((rep.lambda_star.unwrap() - 1.5).abs() < 1e-9);
    assert!((rep.optimal_value - 2.0 / 3.0).abs() < 1e-9);
    let s = rep.solution().unwrap();
    for w in [1.01, 1.2, 1.33, 1.34, 1.9] {
        let want = if w < 4.0 / 3.0 { 1.0 } else { 0.0 };
        assert_eq!(s.eval(w).unwrap(), want);
    }
}

#[test]
fn two_piece_unattainable_and_boundary() {
    let rep = solve(&two_piece(2.0)).unwrap();
    assert_eq!(rep.classification, Classification::Unattainable);
    assert!((rep.theta.unwrap() - 1.5).abs() < 1e-12);
    assert!((rep.optimal_value - 2.5).abs() < 1e-9);
    assert!(rep.value_is_bound && !rep.bound_exact);
    let rep = solve(&two_piece(0.0)).unwrap();
    assert_eq!(rep.classification, Classification::Boundary);
    assert_eq!(rep.solution().unwrap().eval(1.5).unwrap(), 0.0);
    let rep = solve(&two_piece(-0.1)).unwrap();
    assert_eq!(rep.classification, Classification::Infeasible);
}

#[test]
fn digital_gap_family() {
    let p = digital(0.4);
    let rep = solve(&p).unwrap();
    assert_eq!(rep.classification, Classification::NonUnique);
    assert_eq!(rep.lambda_star, Some(1.0));
    assert_eq!(rep.solutions.len(), 3);
    for s in &rep.solutions {
        assert!((s.budget().unwrap().mean - 0.4).abs() < 1e-8);
        assert!((s.value().unwrap().mean - 0.4).abs() < 1e-8);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(rep.solutions[i].disagreement(&rep.solutions[j]).unwrap() > 0.05);
        }
    }
    let top = construct_gap_family(&p, 1.0, 1.0, 1).unwrap();
    assert_eq!(top.plan(), &Plan::Selection { lambda: 1.0, side: Side::Upper });
    let bottom = construct_gap_family(&p, 1.0, 0.0, 2).unwrap();
    assert_eq!(bottom.plan(), &Plan::Selection { lambda: 1.0, side: Side::Lower });
    assert!(matches!(construct_gap_family(&p, 1.0, 1.5, 1), Err(Error::NotAGap(_))));
}

#[test]
fn digital_bliss_and_j() {
    let p = digital(1.0);
    assert_eq!(feasibility(&p).unwrap().status, FeasibilityStatus::BlissAvailable);
    let rep = solve(&p).unwrap();
    assert_eq!(rep.classification, Classification::Bliss);
    assert!((rep.optimal_value - 1.0).abs() < 1e-12);
    assert!((eval_j(&p, 0.5).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn affine_on_atoms() {
    let dist = StateDistribution::discrete(vec![
        Atom { value: 1.0, prob: 0.5 },
        Atom { value: 2.0, prob: 0.5 },
    ])
    .unwrap();
    let p = problem(
        dist,
        PricingKernel::Identity,
        AffineFamily { slope: 1.0, floor: 0.0 },
        BenchmarkMap::none(),
        1.0,
    );
    let rep = solve(&p).unwrap();
    assert_eq!(rep.lambda_star, Some(1.0));
    assert_eq!(rep.classification, Classification::Unique);
    let s = rep.solution().unwrap();
    assert_eq!(s.eval(1.0).unwrap(), 2.0);
    assert_eq!(s.eval(2.0).unwrap(), 0.0);
}

#[test]
fn affine_lognormal_is_infinite() {
    let p = problem(
        StateDistribution::StandardNormal,
        PricingKernel::lognormal(0.03, 0.3, 10.0).unwrap(),
        AffineFamily { slope: 1.0, floor: 0.0 },
        BenchmarkMap::none(),
        1.0,
    );
    assert_eq!(classify_case(&p).case, 3);
    let rep = solve(&p).unwrap();
    assert_eq!(rep.classification, Classification::Infinite);
    let l: Vec<f64> = rep.value_ladder.iter().map(|v| v.lower_bound).collect();
    assert!(l[0] < l[1] && l[1] < l[2]);
    for lam in [0.5, 5.0, 50.0] {
        assert_eq!(eval_g(&p, lam).unwrap(), f64::INFINITY);
    }
}

#[test]
fn s_shaped_case1_unique() {
    let p = s_shaped(30.0);
    assert_eq!(classify_case(&p), CaseInfo { case: 1, lambda0: 0.0 });
    let rep = solve(&p).unwrap();
    assert_eq!(rep.classification, Classification::Unique);
    assert!((rep.budget_used.unwrap() - 30.0).abs() < 1e-7);
    assert_eq!(solve(&s_shaped(-1.0)).unwrap().classification, Classification::Infeasible);
    let mut last = f64::INFINITY;
    for l in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
        let g = eval_g(&p, l).unwrap();
        assert!(g <= last);
        last = g;
    }
}

#[test]
fn case1_diagnostics() {
    assert!(check_case1_sufficient(&s_shaped(30.0)).holds);
    assert!(check_case1_sufficient(&digital(0.4)).holds);
    let affine = two_piece(1.0);
    let c = check_case1_sufficient(&affine);
    assert!(!c.holds);
    assert!(c.failing.unwrap().contains("witness"));
}

