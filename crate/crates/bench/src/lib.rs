//! Shared fixtures for the kernel benchmarks.

use rvlb::collision::{trt1, Collider, ShiftSolver, UtildePolicy};
use rvlb::equilibrium::{feq, EquilibriumKind, LatticeConstants};
use rvlb::lattice::{d2q9, Grid, Vec2, Vec9};
use rvlb::moments::{Family, MomentBasis};
use rvlb::sim::{init_kelvin_helmholtz, SchemeConfig, ShearLayer, Simulation};
use rvlb::stability::{ShiftPolicy, StabilityProblem};

/// Rates used throughout: bulk-like rate 1, shear rate close to 2.
pub const S_E: f64 = 1.0;
pub const S_NU: f64 = 1.9;

pub fn collider(policy: UtildePolicy, solver: ShiftSolver) -> Collider {
    let vset = d2q9(1.0).expect("unit lattice");
    Collider::new(
        MomentBasis::new(Family::A, 0.0),
        EquilibriumKind::Truncated2,
        trt1(S_E, S_NU).expect("valid rates"),
        policy,
        vset,
    )
    .expect("collider")
    .with_solver(solver)
}

/// A non-equilibrium population with density and velocity to collide.
pub fn sample_population() -> (Vec9, f64, Vec2) {
    let vset = d2q9(1.0).expect("unit lattice");
    let consts = LatticeConstants::d2q9(&vset);
    let u = Vec2::new(0.07, -0.03);
    let mut f = feq(EquilibriumKind::Truncated2, 1.0, u, &consts, &vset).expect("equilibrium");
    for (j, x) in f.iter_mut().enumerate() {
        *x += 1e-3 * (j as f64 - 4.0);
    }
    let (rho, u) = rvlb::equilibrium::macroscopic(&f, &vset);
    (f, rho, u)
}

/// Shear-layer simulation on an `n × n` unit-speed lattice.
pub fn shear_layer(n: usize, policy: UtildePolicy, solver: ShiftSolver) -> Simulation {
    let vset = d2q9(1.0).expect("unit lattice");
    let grid = Grid::square(n, 1.0).expect("grid");
    let cfg = SchemeConfig::new(
        MomentBasis::new(Family::A, 0.0),
        EquilibriumKind::Truncated2,
        trt1(S_E, S_NU).expect("valid rates"),
        policy,
        grid,
        vset.clone(),
    )
    .expect("scheme");
    let state = init_kelvin_helmholtz(&grid, &ShearLayer::from_mach(0.1, 1.0), cfg.kind, &cfg.consts(), &vset)
        .expect("initial state");
    Simulation::new(cfg, state).expect("simulation").with_solver(solver)
}

pub fn stability_problem(policy: ShiftPolicy) -> StabilityProblem {
    StabilityProblem::unit(
        MomentBasis::new(Family::A, 0.0),
        EquilibriumKind::Truncated2,
        trt1(S_E, S_NU).expect("valid rates"),
        policy,
        0.0,
    )
    .expect("problem")
}
