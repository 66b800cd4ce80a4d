//! Nonlinear D2Q9 time stepping on a periodic grid.
//!
//! Each step collides every cell in the frame chosen by the ũ policy and then
//! streams by pulling from upwind neighbours into a second buffer.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::collision::{Collider, RelaxationVector, ShiftSolver, UtildePolicy};
use crate::equilibrium::{feq, macroscopic, EquilibriumKind, LatticeConstants};
use crate::error::{Error, Result};
use crate::lattice::{wrap, Grid, Vec2, Vec9, VelocitySet, DIRECTIONS, Q};
use crate::moments::MomentBasis;

/// Blow-up threshold on `|u|` in units of the velocity scale.
pub const DEFAULT_SPEED_LIMIT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub basis: MomentBasis,
    pub kind: EquilibriumKind,
    pub rates: RelaxationVector,
    pub policy: UtildePolicy,
    pub grid: Grid,
    pub vset: VelocitySet,
}

impl SchemeConfig {
    pub fn new(
        basis: MomentBasis,
        kind: EquilibriumKind,
        rates: RelaxationVector,
        policy: UtildePolicy,
        grid: Grid,
        vset: VelocitySet,
    ) -> Result<Self> {
        if grid.dt * vset.lambda() != grid.dx {
            return Err(Error::invalid(format!(
                "grid (dx={}, dt={}) does not follow acoustic scaling for lambda={}",
                grid.dx,
                grid.dt,
                vset.lambda()
            )));
        }
        Ok(SchemeConfig {
            basis,
            kind,
            rates,
            policy,
            grid,
            vset,
        })
    }

    pub fn consts(&self) -> LatticeConstants {
        LatticeConstants::d2q9(&self.vset)
    }

    pub fn collider(&self) -> Result<Collider> {
        Collider::new(self.basis, self.kind, self.rates, self.policy, self.vset.clone())
    }
}

/// Distributions on every cell, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub f: Vec<Vec9>,
    pub t: f64,
    pub iteration: u64,
}

impl FieldState {
    pub fn uniform(grid: &Grid, f: Vec9) -> Self {
        FieldState {
            f: vec![f; grid.len()],
            t: 0.0,
            iteration: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn total_mass(&self) -> f64 {
        self.f.iter().map(|c| c.sum()).sum()
    }

    pub fn total_momentum(&self, vset: &VelocitySet) -> Vec2 {
        self.f
            .iter()
            .map(|c| macroscopic(c, vset).1)
            .fold(Vec2::zeros(), |a, b| a + b)
    }

    /// Per-cell `(ρ, u)`.
    pub fn macroscopic(&self, vset: &VelocitySet) -> Vec<(f64, Vec2)> {
        self.f
            .iter()
            .map(|c| {
                let (rho, q) = macroscopic(c, vset);
                (rho, q / rho)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlowUpReason {
    NonFinite,
    NonPositiveDensity,
    SpeedLimit,
}

impl fmt::Display for BlowUpReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowUpReason::NonFinite => "non-finite value",
            BlowUpReason::NonPositiveDensity => "density <= 0",
            BlowUpReason::SpeedLimit => "|u| above limit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    /// Iteration count of the state in which the failure was seen.
    pub iteration: u64,
    pub reason: BlowUpReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    Stable(u64),
    BlewUp { iteration: u64, reason: BlowUpReason },
}

impl RunOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, RunOutcome::Stable(_))
    }
}

/// Checks one pre-collision cell and returns `(ρ, u)` when admissible.
#[inline]
fn admissible(f: &Vec9, vset: &VelocitySet, speed_limit: f64) -> std::result::Result<(f64, Vec2), BlowUpReason> {
    let (rho, q) = macroscopic(f, vset);
    if !rho.is_finite() || !q.x.is_finite() || !q.y.is_finite() || f.iter().any(|x| !x.is_finite()) {
        return Err(BlowUpReason::NonFinite);
    }
    if rho <= 0.0 {
        return Err(BlowUpReason::NonPositiveDensity);
    }
    let u = q / rho;
    if u.norm() > speed_limit {
        return Err(BlowUpReason::SpeedLimit);
    }
    Ok((rho, u))
}

/// Owns a state and its stepping machinery.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SchemeConfig,
    collider: Collider,
    state: FieldState,
    scratch: Vec<Vec9>,
    /// Source cell of each (cell, direction) pair.
    sources: Vec<[u32; Q]>,
    speed_limit: f64,
}

impl Simulation {
    pub fn new(cfg: SchemeConfig, state: FieldState) -> Result<Self> {
        if state.f.len() != cfg.grid.len() {
            return Err(Error::invalid(format!(
                "state has {} cells, grid has {}",
                state.f.len(),
                cfg.grid.len()
            )));
        }
        let g = cfg.grid;
        let mut sources = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                sources.push(std::array::from_fn(|d| {
                    let [cx, cy] = DIRECTIONS[d];
                    let si = wrap(i as i64 - i64::from(cx), g.nx);
                    let sj = wrap(j as i64 - i64::from(cy), g.ny);
                    g.index(si, sj) as u32
                }));
            }
        }
        Ok(Simulation {
            collider: cfg.collider()?,
            speed_limit: DEFAULT_SPEED_LIMIT_FACTOR * cfg.vset.lambda(),
            scratch: vec![Vec9::zeros(); g.len()],
            cfg,
            state,
            sources,
        })
    }

    pub fn with_solver(mut self, solver: ShiftSolver) -> Self {
        self.collider = self.collider.with_solver(solver);
        self
    }

    pub fn with_speed_limit(mut self, speed_limit: f64) -> Self {
        self.speed_limit = speed_limit;
        self
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn into_state(self) -> FieldState {
        self.state
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Advances one time step, or reports why the current state is broken.
    pub fn step(&mut self) -> std::result::Result<(), BlowUp> {
        let vset = &self.cfg.vset;
        let fail = |reason| BlowUp {
            iteration: self.state.iteration,
            reason,
        };
        for cell in self.state.f.iter_mut() {
            let (rho, u) = admissible(cell, vset, self.speed_limit).map_err(fail)?;
            if !self.collider.collide(cell, rho, u) {
                return Err(fail(BlowUpReason::NonFinite));
            }
        }
        for (dst, src) in self.scratch.iter_mut().zip(&self.sources) {
            for d in 0..Q {
                dst[d] = self.state.f[src[d] as usize][d];
            }
        }
        std::mem::swap(&mut self.state.f, &mut self.scratch);
        self.state.iteration += 1;
        self.state.t = self.state.iteration as f64 * self.cfg.grid.dt;
        Ok(())
    }

    /// Checks every cell of the current state without stepping.
    pub fn check(&self) -> std::result::Result<(), BlowUp> {
        for cell in &self.state.f {
            admissible(cell, &self.cfg.vset, self.speed_limit).map_err(|reason| BlowUp {
                iteration: self.state.iteration,
                reason,
            })?;
        }
        Ok(())
    }

    /// Steps `n_iters` times or until the state breaks.
    pub fn run(&mut self, n_iters: u64) -> RunOutcome {
        for _ in 0..n_iters {
            if let Err(b) = self.step() {
                return RunOutcome::BlewUp {
                    iteration: b.iteration,
                    reason: b.reason,
                };
            }
        }
        match self.check() {
            Ok(()) => RunOutcome::Stable(n_iters),
            Err(b) => RunOutcome::BlewUp {
                iteration: b.iteration,
                reason: b.reason,
            },
        }
    }
}

/// One collision + transport step of `state`.
pub fn step(state: &FieldState, cfg: &SchemeConfig) -> Result<std::result::Result<FieldState, BlowUp>> {
    let mut sim = Simulation::new(cfg.clone(), state.clone())?;
    Ok(sim.step().map(|()| sim.into_state()))
}

/// Runs up to `n_iters` steps; a non-finite value, `ρ ≤ 0` or `|u| > u_max`
/// anywhere counts as a blow-up.
pub fn run_until(state: FieldState, cfg: &SchemeConfig, n_iters: u64, u_max: f64) -> Result<RunOutcome> {
    if n_iters == 0 {
        return Err(Error::invalid("need at least one iteration"));
    }
    let mut sim = Simulation::new(cfg.clone(), state)?.with_speed_limit(u_max);
    Ok(sim.run(n_iters))
}

/// Doubly periodic shear layers with a sinusoidal transverse perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearLayer {
    /// Shear speed `U`.
    pub speed: f64,
    /// Inverse layer width.
    pub k: f64,
    /// Relative amplitude of the perturbation.
    pub delta: f64,
}

impl ShearLayer {
    pub fn new(speed: f64) -> Self {
        ShearLayer {
            speed,
            k: 80.0,
            delta: 0.05,
        }
    }

    /// Shear speed for Mach number `ma` with sound speed `λ/√3`.
    pub fn from_mach(ma: f64, lambda: f64) -> Self {
        Self::new(ma * lambda / 3f64.sqrt())
    }

    pub fn velocity(&self, x: f64, y: f64) -> Vec2 {
        let ux = if y <= 0.5 {
            self.speed * (self.k * (y - 0.25)).tanh()
        } else {
            self.speed * (self.k * (0.75 - y)).tanh()
        };
        let uy = self.speed * self.delta * (TAU * (x + 0.25)).sin();
        Vec2::new(ux, uy)
    }
}

/// Equilibrium state at unit density with the shear-layer velocity sampled at
/// cell centers.
pub fn init_kelvin_helmholtz(
    grid: &Grid,
    layer: &ShearLayer,
    kind: EquilibriumKind,
    consts: &LatticeConstants,
    vset: &VelocitySet,
) -> Result<FieldState> {
    if !(layer.speed >= 0.0) {
        return Err(Error::invalid(format!("shear speed must be non-negative, got {}", layer.speed)));
    }
    let mut f = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.center(i, j);
            f.push(feq(kind, 1.0, layer.velocity(x, y), consts, vset)?);
        }
    }
    Ok(FieldState {
        f,
        t: 0.0,
        iteration: 0,
    })
}

/// `∂x uy − ∂y ux` by centered periodic differences.
pub fn vorticity(state: &FieldState, grid: &Grid, vset: &VelocitySet) -> Vec<f64> {
    let u: Vec<Vec2> = state.macroscopic(vset).into_iter().map(|(_, u)| u).collect();
    vorticity_of(&u, grid)
}

pub(crate) fn vorticity_of(u: &[Vec2], grid: &Grid) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let at = |i: usize, j: usize| u[grid.index(i, j)];
    let mut w = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let (ip, im) = ((i + 1) % nx, (i + nx - 1) % nx);
            let (jp, jm) = ((j + 1) % ny, (j + ny - 1) % ny);
            let duy_dx = (at(ip, j).y - at(im, j).y) / (2.0 * grid.dx);
            let dux_dy = (at(i, jp).x - at(i, jm).x) / (2.0 * grid.dx);
            w.push(duy_dx - dux_dy);
        }
    }
    w
}

/// Writes `x,y,rho,ux,uy,omega` rows, one per cell.
pub fn write_fields_csv(mut out: impl Write, state: &FieldState, grid: &Grid, vset: &VelocitySet) -> Result<()> {
    let mac = state.macroscopic(vset);
    let u: Vec<Vec2> = mac.iter().map(|&(_, u)| u).collect();
    let omega = vorticity_of(&u, grid);
    writeln!(out, "x,y,rho,ux,uy,omega")?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.index(i, j);
            let (x, y) = grid.center(i, j);
            let (rho, u) = mac[c];
            writeln!(out, "{x},{y},{rho},{},{},{}", u.x, u.y, omega[c])?;
        }
    }
    Ok(())
}

/// Field dump file name `{prefix}_t{iteration}.csv` inside `dir`.
pub fn dump_path(dir: &Path, prefix: &str, iteration: u64) -> std::path::PathBuf {
    dir.join(format!("{prefix}_t{iteration}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{bgk, trt1, trt2};
    use crate::lattice::d2q9;
    use crate::moments::Family;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(n: usize, rates: RelaxationVector, policy: UtildePolicy, alpha: f64) -> SchemeConfig {
        let vset = d2q9(1.0).unwrap();
        SchemeConfig::new(
            MomentBasis::new(Family::A, alpha),
            EquilibriumKind::Truncated2,
            rates,
            policy,
            Grid::square(n, 1.0).unwrap(),
            vset,
        )
        .unwrap()
    }

    fn noisy_state(cfg: &SchemeConfig, seed: u64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let consts = cfg.consts();
        let f = (0..cfg.grid.len())
            .map(|_| {
                let u = Vec2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
                feq(cfg.kind, 1.0, u, &consts, &cfg.vset).unwrap()
                    + Vec9::from_fn(|_, _| rng.gen_range(-1e-3..1e-3))
            })
            .collect();
        FieldState { f, t: 0.0, iteration: 0 }
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let cfg = config(8, trt1(1.2, 1.9).unwrap(), UtildePolicy::Fluid, 0.5);
        let rest = Vec9::from_column_slice(&cfg.consts().weights);
        let mut sim = Simulation::new(cfg, FieldState::uniform(&Grid::square(8, 1.0).unwrap(), rest)).unwrap();
        sim.run(5);
        for c in &sim.state().f {
            assert!((c - rest).amax() < 1e-15);
        }
        assert_eq!(sim.state().iteration, 5);
    }

    #[test]
    fn uniform_flow_is_preserved() {
        for policy in [UtildePolicy::Zero, UtildePolicy::Fluid] {
            let cfg = config(8, trt2(0.8, 1.7).unwrap(), policy, 1.0);
            let f0 = feq(cfg.kind, 1.0, Vec2::new(0.1, -0.05), &cfg.consts(), &cfg.vset).unwrap();
            let mut sim = Simulation::new(cfg.clone(), FieldState::uniform(&cfg.grid, f0)).unwrap();
            assert!(sim.run(10).is_stable());
            for c in &sim.state().f {
                assert!((c - f0).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn conserves_mass_and_momentum() {
        for policy in [UtildePolicy::Zero, UtildePolicy::Fluid, UtildePolicy::ScaledFluid(0.6)] {
            let cfg = config(16, trt1(1.1, 1.95).unwrap(), policy, 0.0);
            let state = noisy_state(&cfg, 3);
            let (m0, q0) = (state.total_mass(), state.total_momentum(&cfg.vset));
            let mut sim = Simulation::new(cfg.clone(), state).unwrap();
            assert_eq!(sim.run(100), RunOutcome::Stable(100));
            let (m1, q1) = (sim.state().total_mass(), sim.state().total_momentum(&cfg.vset));
            assert!((m1 - m0).abs() < 1e-10, "{policy}: mass drift {}", m1 - m0);
            assert!((q1 - q0).amax() < 1e-10, "{policy}: momentum drift {}", (q1 - q0).amax());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = config(16, trt1(1.1, 1.95).unwrap(), UtildePolicy::Fluid, 1.0);
        let a = run(&cfg, noisy_state(&cfg, 9), 20);
        let b = run(&cfg, noisy_state(&cfg, 9), 20);
        assert_eq!(a, b);
    }

    fn run(cfg: &SchemeConfig, state: FieldState, n: u64) -> FieldState {
        let mut sim = Simulation::new(cfg.clone(), state).unwrap();
        assert!(sim.run(n).is_stable());
        sim.into_state()
    }

    #[test]
    fn bgk_does_not_depend_on_the_frame() {
        let base = config(16, bgk(1.7).unwrap(), UtildePolicy::Zero, 0.0);
        let reference = run(&base, noisy_state(&base, 4), 20);
        for policy in [UtildePolicy::Fluid, UtildePolicy::ScaledFluid(0.5)] {
            let cfg = config(16, bgk(1.7).unwrap(), policy, 0.0);
            let other = run(&cfg, noisy_state(&cfg, 4), 20);
            for (a, b) in reference.f.iter().zip(&other.f) {
                assert!((a - b).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_streams_along_velocities() {
        // no relaxation: a lone population moves one cell per step
        let cfg = config(8, trt1(0.0, 0.0).unwrap(), UtildePolicy::Zero, 0.0);
        let rest = Vec9::from_column_slice(&cfg.consts().weights);
        let mut state = FieldState::uniform(&cfg.grid, rest);
        state.f[cfg.grid.index(7, 0)][5] += 0.01;
        let next = step(&state, &cfg).unwrap().unwrap();
        assert!((next.f[cfg.grid.index(0, 1)][5] - rest[5] - 0.01).abs() < 1e-15);
        assert_eq!(next.iteration, 1);
        assert!((next.t - cfg.grid.dt).abs() < 1e-18);
    }

    #[test]
    fn blow_up_is_detected() {
        let cfg = config(8, trt1(1.0, 1.0).unwrap(), UtildePolicy::Zero, 0.0);
        let rest = Vec9::from_column_slice(&cfg.consts().weights);
        let mut state = FieldState::uniform(&cfg.grid, rest);
        state.f[3] = -rest;
        let out = run_until(state.clone(), &cfg, 10, 10.0).unwrap();
        assert_eq!(
            out,
            RunOutcome::BlewUp { iteration: 0, reason: BlowUpReason::NonPositiveDensity }
        );
        state.f[3] = rest;
        state.f[3][1] = f64::NAN;
        assert!(matches!(run_until(state.clone(), &cfg, 10, 10.0).unwrap(), RunOutcome::BlewUp { reason: BlowUpReason::NonFinite, .. }));
        state.f[3] = rest;
        state.f[3][1] += 0.5;
        assert!(matches!(run_until(state, &cfg, 10, 0.1).unwrap(), RunOutcome::BlewUp { reason: BlowUpReason::SpeedLimit, .. }));
    }

    #[test]
    fn quiescent_run_survives() {
        let cfg = config(8, trt1(1.9, 1.99).unwrap(), UtildePolicy::Fluid, 0.0);
        let rest = Vec9::from_column_slice(&cfg.consts().weights);
        let out = run_until(FieldState::uniform(&cfg.grid, rest), &cfg, 2000, 10.0).unwrap();
        assert_eq!(out, RunOutcome::Stable(2000));
        assert!(run_until(FieldState::uniform(&cfg.grid, rest), &cfg, 0, 10.0).is_err());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let cfg = config(8, bgk(1.0).unwrap(), UtildePolicy::Zero, 0.0);
        let small = FieldState::uniform(&Grid::square(4, 1.0).unwrap(), Vec9::zeros());
        assert!(Simulation::new(cfg.clone(), small).is_err());
        let mut g = cfg.grid;
        g.dt *= 1.5;
        assert!(SchemeConfig::new(cfg.basis, cfg.kind, cfg.rates, cfg.policy, g, cfg.vset.clone()).is_err());
    }

    #[test]
    fn shear_layer_profile() {
        let layer = ShearLayer::from_mach(0.04, 25.0 * 3f64.sqrt());
        assert!((layer.speed - 1.0).abs() < 1e-12);
        let u = layer.velocity(0.0, 0.25);
        assert!(u.x.abs() < 1e-15);
        assert!((u.y - 0.05).abs() < 1e-15);
        assert!((layer.velocity(0.0, 0.5).x - 1.0).abs() < 1e-9);
        assert!((layer.velocity(0.0, 0.0).x + 1.0).abs() < 1e-9);
        assert!(layer.velocity(0.0, 0.75).x.abs() < 1e-15);
        assert!((layer.velocity(0.25, 0.3).y).abs() < 1e-15);
        assert!((layer.velocity(0.1, 0.5) - layer.velocity(1.1, 0.5)).amax() < 1e-14);
    }

    #[test]
    fn kelvin_helmholtz_initial_state() {
        let vset = d2q9(1.0).unwrap();
        let grid = Grid::square(32, 1.0).unwrap();
        let consts = LatticeConstants::d2q9(&vset);
        let layer = ShearLayer::from_mach(0.2, 1.0);
        let state = init_kelvin_helmholtz(&grid, &layer, EquilibriumKind::Truncated2, &consts, &vset).unwrap();
        let mac = state.macroscopic(&vset);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                let (rho, u) = mac[grid.index(i, j)];
                assert!((rho - 1.0).abs() < 1e-14);
                assert!((u - layer.velocity(x, y)).amax() < 1e-14);
            }
        }
        assert!(init_kelvin_helmholtz(&grid, &ShearLayer::new(-1.0), EquilibriumKind::Truncated2, &consts, &vset).is_err());
    }

    #[test]
    fn vorticity_of_simple_fields() {
        let grid = Grid::square(16, 1.0).unwrap();
        let uniform = vec![Vec2::new(0.3, -0.1); grid.len()];
        assert!(vorticity_of(&uniform, &grid).iter().all(|w| w.abs() < 1e-12));
        // u = (−sin 2πy, sin 2πx): ω = 2π(cos 2πx + cos 2πy) up to O(dx²)
        let mut u = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                u.push(Vec2::new(-(TAU * y).sin(), (TAU * x).sin()));
            }
        }
        let w = vorticity_of(&u, &grid);
        let h = TAU * grid.dx;
        let scale = h.sin() / h;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                let exact = TAU * ((TAU * x).cos() + (TAU * y).cos()) * scale;
                assert!((w[grid.index(i, j)] - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kelvin_helmholtz_vorticity_peaks_on_the_layers() {
        let vset = d2q9(1.0).unwrap();
        let grid = Grid::square(64, 1.0).unwrap();
        let consts = LatticeConstants::d2q9(&vset);
        let state = init_kelvin_helmholtz(&grid, &ShearLayer::new(0.1), EquilibriumKind::Truncated2, &consts, &vset).unwrap();
        let w = vorticity(&state, &grid, &vset);
        let col: Vec<f64> = (0..grid.ny).map(|j| w[grid.index(5, j)]).collect();
        let (jmin, _) = col.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (jmax, _) = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        // ω = −∂y ux: negative where ux rises (y = 1/4), positive where it falls
        assert!((grid.center(0, jmin).1 - 0.25).abs() <= grid.dx);
        assert!((grid.center(0, jmax).1 - 0.75).abs() <= grid.dx);
    }

    #[test]
    fn field_dump() {
        let vset = d2q9(1.0).unwrap();
        let grid = Grid::square(4, 1.0).unwrap();
        let consts = LatticeConstants::d2q9(&vset);
        let state = init_kelvin_helmholtz(&grid, &ShearLayer::new(0.1), EquilibriumKind::Product4, &consts, &vset).unwrap();
        let mut buf = Vec::new();
        write_fields_csv(&mut buf, &state, &grid, &vset).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,rho,ux,uy,omega");
        assert_eq!(lines.len(), 17);
        assert!(lines[1].starts_with("0.125,0.125,"));
        assert_eq!(dump_path(Path::new("out"), "kh", 40), Path::new("out/kh_t40.csv"));
    }
}
