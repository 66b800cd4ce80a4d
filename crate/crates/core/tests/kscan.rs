//! The refined wavevector search agrees with a dense brute-force grid.

use rvlb::collision::{rate_ladder, trt1, trt2, RelaxationVector};
use rvlb::equilibrium::EquilibriumKind;
use rvlb::moments::{Family, MomentBasis};
use rvlb::stability::{KScan, ShiftPolicy, StabilityProblem};

fn problem(
    family: Family,
    alpha: f64,
    policy: ShiftPolicy,
    kind: EquilibriumKind,
    rates: RelaxationVector,
) -> StabilityProblem {
    StabilityProblem::unit(MomentBasis::new(family, alpha), kind, rates, policy, 0.0).unwrap()
}

fn ladder1(m: u32, n: u32) -> RelaxationVector {
    trt1(rate_ladder(m), rate_ladder(n)).unwrap()
}

fn ladder2(m: u32, n: u32) -> RelaxationVector {
    trt2(rate_ladder(m), rate_ladder(n)).unwrap()
}

#[test]
fn refined_search_matches_dense_grid() {
    let cases = [
        (problem(Family::B, -0.5, ShiftPolicy::EqualsV, EquilibriumKind::Truncated2, ladder1(0, 4)), 0.32),
        (problem(Family::B, 0.5, ShiftPolicy::Zero, EquilibriumKind::Product4, ladder2(4, 6)), 0.02),
        (problem(Family::A, 0.0, ShiftPolicy::Zero, EquilibriumKind::Truncated2, ladder1(7, 7)), 0.08),
    ];
    let refined = KScan::default();
    let dense = KScan::brute_force(256).unwrap();
    for (prob, expected) in cases {
        let a = refined.max_stable_speed(&prob, 0.01, 1.0).unwrap();
        let b = dense.max_stable_speed(&prob, 0.01, 1.0).unwrap();
        assert!((a - b).abs() < 1e-9, "refined {a} vs dense {b}");
        assert!((a - expected).abs() < 1e-9, "{a} vs {expected}");
    }
}

#[test]
fn coarse_grid_alone_overestimates() {
    // a 16-point grid without refinement steps over the narrow unstable band
    let prob = problem(Family::A, 0.0, ShiftPolicy::Zero, EquilibriumKind::Truncated2, ladder1(7, 7));
    let coarse = KScan::brute_force(16).unwrap().max_stable_speed(&prob, 0.01, 1.0).unwrap();
    let refined = KScan::default().max_stable_speed(&prob, 0.01, 1.0).unwrap();
    assert!(coarse > refined, "coarse {coarse} refined {refined}");
}
