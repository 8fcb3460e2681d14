mod common;

use std::sync::Arc;

use common::*;
use euopt::oracle::{brute_solve, grid_resolution, BruteMode, DiscreteInstance, Objective};
use euopt::solver::{solve, Problem};
use euopt::statespace::{Atom, BenchmarkMap, ExpectationEngine, PricingKernel, StateDistribution};
use euopt::utility::{Custom, Piece, PieceForm, PiecewiseUtility};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn root_utility() -> Custom {
    Custom(
        PiecewiseUtility::new(vec![Piece {
            start: 0.0,
            form: PieceForm::PowerUp { coef: 2.0, shift: 0.0, exponent: 0.5, offset: 0.0 },
        }])
        .unwrap(),
    )
}

fn concave_problem(rng: &mut StdRng) -> Problem {
    let n = rng.random_range(2..=5);
    let mut qs: Vec<u32> = (2..=8).collect();
    let mut atoms = Vec::new();
    for _ in 0..n {
        let q = qs.remove(rng.random_range(0..qs.len()));
        atoms.push(Atom { value: q as f64 / 4.0, prob: 1.0 / n as f64 });
    }
    Problem::new(
        StateDistribution::discrete(atoms).unwrap(),
        PricingKernel::Identity,
        Arc::new(root_utility()),
        BenchmarkMap::none(),
        rng.random_range(0.5..3.0),
        ExpectationEngine::default(),
    )
    .unwrap()
}

#[test]
fn concave_instances_match_solver() {
    let mut rng = StdRng::seed_from_u64(11);
    for trial in 0..50 {
        let p = concave_problem(&mut rng);
        let rep = solve(&p).unwrap();
        let sol = rep.solution().unwrap();
        let StateDistribution::Discrete(atoms) = p.dist() else { unreachable!() };
        let top = atoms.iter().map(|a| sol.eval(a.value).unwrap()).fold(0.0, f64::max);
        let grid: Vec<f64> = (0..=((top / 0.25).ceil() as usize + 1)).map(|j| j as f64 * 0.25).collect();
        let inst = DiscreteInstance::from_problem(&p, grid).unwrap();
        let u = root_utility();
        let brute = brute_solve(&inst, &u, Objective::Utility).unwrap();
        let res = grid_resolution(&inst, &u).unwrap();
        let slack = atoms.len() as f64 * res;
        assert!(brute.cost <= p.x0() + 1e-9, "trial {trial}");
        assert!(brute.value <= rep.optimal_value + 1e-9, "trial {trial}: {} > {}", brute.value, rep.optimal_value);
        assert!(
            rep.optimal_value - brute.value <= slack + 1e-9,
            "trial {trial}: solver {} brute {} slack {slack}",
            rep.optimal_value,
            brute.value
        );
    }
}

#[test]
fn nonconcave_relaxation_gap_within_one_step() {
    let mut rng = StdRng::seed_from_u64(29);
    for trial in 0..50 {
        let (inst, shape) = sshaped_instance(&mut rng);
        assert!(inst.atoms.len() >= 64);
        let r = brute_solve(&inst, &shape, Objective::Utility).unwrap();
        assert_eq!(r.mode, BruteMode::Lattice);
        relaxation_gap_check(&inst, &shape).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
    }
}
