mod common;

use common::*;
use euopt::solver::solve;
use euopt::Error;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (0.5..4.0f64, 0.2..0.8f64, 0.0..60.0f64).prop_map(|(k, p, b)| Shape::SShaped { k, p, b }),
        (0.5..4.0f64, 0.2..0.8f64, 0.0..200.0f64, 10.0..80.0f64, 0.1..0.9f64)
            .prop_map(|(k, p, mu, b1, f)| Shape::Modified { k, p, mu, b1, b2: f * b1 }),
        (0.1..5.0f64, 0.1..10.0f64).prop_map(|(height, b)| Shape::Digital { height, b }),
        (prop::collection::vec(0.0..3.0f64, 1..6), prop::collection::vec(0.0..1.0f64, 6))
            .prop_map(|(slopes, jumps)| Shape::Ramps { jumps: jumps[..slopes.len()].to_vec(), slopes }),
    ]
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        (0.5..4.0f64, 0.2..0.8f64, 5.0..80.0f64, 1.0..60.0f64)
            .prop_map(|(k, p, b, x0)| Scenario::Lognormal { k, p, b, x0 }),
        (0.01..1.5f64).prop_map(|x0| Scenario::TwoPiece { x0 }),
        (0.01..0.99f64).prop_map(|x0| Scenario::DigitalGap { x0 }),
        (
            prop::collection::vec(0.2..3.0f64, 2..6),
            prop::collection::vec(0.0..3.0f64, 1..5),
            prop::collection::vec(0.0..1.0f64, 5),
            0.0..4.0f64
        )
            .prop_map(|(mut xi, slopes, jumps, x0)| {
                xi.sort_by(f64::total_cmp);
                xi.dedup();
                Scenario::Atoms { xi, jumps: jumps[..slopes.len()].to_vec(), slopes, x0 }
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn envelope_is_chord_sup(s in shape(), probes in prop::collection::vec(0.0..1.0f64, 8)) {
        chord_sup_check(&s, &probes).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn selections_cross_monotone(s in shape(), y1 in 1e-4..20.0f64, y2 in 1e-4..20.0f64) {
        cross_monotone_check(&s, y1, y2).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn selection_limits(s in shape()) {
        limits_check(&s).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn g_nonincreasing(sc in scenario(), ls in prop::collection::vec(1e-3..5.0f64, 6)) {
        g_monotone_check(&sc.problem(), &ls).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn solutions_certified(sc in scenario()) {
        let rep = match solve(&sc.problem()) {
            Ok(r) => r,
            Err(Error::AtomicGap(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{sc:?}: {e}"))),
        };
        certificate_check(&rep).map_err(|e| TestCaseError::fail(format!("{sc:?}: {e}")))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_agrees(
        k in 0.5..4.0f64,
        p in 0.2..0.8f64,
        mu in 0.0..500.0f64,
        b1 in 5.0..100.0f64,
        f in 0.05..0.95f64,
        y in 1e-3..5.0f64,
    ) {
        closed_form_check(k, p, mu, b1, f * b1, y).map_err(TestCaseError::fail)?;
    }
}
