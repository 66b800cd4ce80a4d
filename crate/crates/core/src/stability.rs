//! Linear (von Neumann) stability of the relative-velocity scheme.
//!
//! Linearizing the equilibrium around a uniform flow `V` turns one time step
//! into `f̂(k, t+dt) = L f̂(k, t)` with
//! `L = A (I + M(ũ)⁻¹ D M(ũ) (E − I))` and `A = diag(exp(i dt k·v_j))`.
//! Only `A` depends on the wavevector, so the relaxation part is built once
//! per linearization velocity.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::collision::RelaxationVector;
use crate::eigen;
use crate::equilibrium::{linearized_equilibrium, EquilibriumKind, LatticeConstants};
use crate::error::{Error, Result};
use crate::lattice::{Mat9, Vec2, VelocitySet, Q};
use crate::moments::{moment_matrix, MomentBasis};

pub type AmplificationMatrix = SMatrix<Complex64, Q, Q>;

/// Radius slack absorbing eigensolver noise around the unit circle.
pub const RADIUS_TOLERANCE: f64 = 1e-8;

/// Frame velocity at the linearization point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftPolicy {
    Zero,
    EqualsV,
    /// `c V`.
    ScaledV(f64),
    Fixed(Vec2),
}

impl ShiftPolicy {
    pub fn resolve(&self, v: Vec2) -> Vec2 {
        match *self {
            ShiftPolicy::Zero => Vec2::zeros(),
            ShiftPolicy::EqualsV => v,
            ShiftPolicy::ScaledV(c) => v * c,
            ShiftPolicy::Fixed(w) => w,
        }
    }
}

impl fmt::Display for ShiftPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftPolicy::Zero => f.write_str("zero"),
            ShiftPolicy::EqualsV => f.write_str("equals-v"),
            ShiftPolicy::ScaledV(c) => write!(f, "scaled:{c}"),
            ShiftPolicy::Fixed(w) => write!(f, "fixed:{}/{}", w.x, w.y),
        }
    }
}

impl FromStr for ShiftPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown linearization shift `{s}`"));
        match s {
            "zero" => Ok(ShiftPolicy::Zero),
            "equals-v" | "v" | "fluid" => Ok(ShiftPolicy::EqualsV),
            _ if s.starts_with("scaled:") => {
                let c = s["scaled:".len()..].trim().parse::<f64>().map_err(|_| bad())?;
                Ok(ShiftPolicy::ScaledV(c))
            }
            _ => {
                let w = s.strip_prefix("fixed:").ok_or_else(bad)?;
                let (a, b) = w.split_once('/').ok_or_else(bad)?;
                let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
                Ok(ShiftPolicy::Fixed(Vec2::new(num(a)?, num(b)?)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityProblem {
    pub basis: MomentBasis,
    pub kind: EquilibriumKind,
    pub rates: RelaxationVector,
    pub policy: ShiftPolicy,
    /// Direction of the linearization velocity, in `[0, 2π)`.
    pub theta: f64,
    pub vset: VelocitySet,
    pub dt: f64,
}

impl StabilityProblem {
    pub fn new(
        basis: MomentBasis,
        kind: EquilibriumKind,
        rates: RelaxationVector,
        policy: ShiftPolicy,
        theta: f64,
        vset: VelocitySet,
        dt: f64,
    ) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("linearization direction must be finite"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(StabilityProblem {
            basis,
            kind,
            rates,
            policy,
            theta: theta.rem_euclid(TAU),
            vset,
            dt,
        })
    }

    /// Unit-lattice problem (`λ = 1`, `dt = 1`) along `theta`.
    pub fn unit(
        basis: MomentBasis,
        kind: EquilibriumKind,
        rates: RelaxationVector,
        policy: ShiftPolicy,
        theta: f64,
    ) -> Result<Self> {
        Self::new(basis, kind, rates, policy, theta, crate::lattice::d2q9(1.0)?, 1.0)
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Linearization velocity of magnitude `speed` along `theta`.
    pub fn velocity(&self, speed: f64) -> Vec2 {
        self.direction() * speed
    }

    /// Period of the transport symbol in each wavevector component.
    pub fn k_period(&self) -> f64 {
        TAU / (self.vset.lambda() * self.dt)
    }

    pub fn linearize(&self, v: Vec2) -> Result<LinearizedStep> {
        let consts = LatticeConstants::d2q9(&self.vset);
        let e = linearized_equilibrium(self.kind, v, &consts, &self.vset);
        let m = moment_matrix(&self.basis, &self.vset, self.policy.resolve(v))?;
        let relax = Mat9::identity()
            + m.invert()? * self.rates.diagonal() * m.entries() * (e - Mat9::identity());
        Ok(LinearizedStep {
            relax,
            streams: self.vset.velocities().map(|vj| vj * self.dt),
        })
    }
}

/// One linearized time step with the wavevector left free.
#[derive(Debug, Clone)]
pub struct LinearizedStep {
    relax: Mat9,
    streams: [Vec2; Q],
}

impl LinearizedStep {
    pub fn relaxation(&self) -> &Mat9 {
        &self.relax
    }

    pub fn amplification(&self, k: Vec2) -> AmplificationMatrix {
        let phase: [Complex64; Q] = self.streams.map(|s| Complex64::cis(k.dot(&s)));
        AmplificationMatrix::from_fn(|j, l| phase[j] * self.relax[(j, l)])
    }

    pub fn radius(&self, k: Vec2) -> Result<f64> {
        spectral_radius(&self.amplification(k))
    }
}

/// `L = A (I + M⁻¹ D M (E − I))` at linearization velocity `v` and wavevector `k`.
pub fn amplification(prob: &StabilityProblem, v: Vec2, k: Vec2) -> Result<AmplificationMatrix> {
    Ok(prob.linearize(v)?.amplification(k))
}

pub fn spectral_radius(l: &AmplificationMatrix) -> Result<f64> {
    eigen::spectral_radius(l)
}

/// Wavevector search settings.
///
/// The coarse grid covers half of one period (`L(−k)` is the complex
/// conjugate of `L(k)`, so the radius is even in `k`). The best local maxima
/// of the grid are then climbed by a compass search, which resolves the
/// narrow instability bumps a uniform grid alone steps over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KScan {
    /// Points per axis of the coarse grid over one period.
    pub kgrid_n: usize,
    /// Number of coarse local maxima that get refined.
    pub starts: usize,
    /// Compass step halvings per start.
    pub refine_rounds: usize,
}

impl Default for KScan {
    fn default() -> Self {
        KScan {
            kgrid_n: 64,
            starts: 8,
            refine_rounds: 6,
        }
    }
}

const COMPASS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.0, -1.0),
    (-1.0, 1.0),
];

impl KScan {
    pub fn new(kgrid_n: usize) -> Result<Self> {
        if kgrid_n < 8 {
            return Err(Error::invalid(format!("k grid needs at least 8 points, got {kgrid_n}")));
        }
        Ok(KScan {
            kgrid_n,
            ..Default::default()
        })
    }

    /// Uniform grid only, no refinement.
    pub fn brute_force(kgrid_n: usize) -> Result<Self> {
        Ok(KScan {
            starts: 0,
            ..Self::new(kgrid_n)?
        })
    }

    /// Maximum spectral radius over the wavevector domain, or the first radius
    /// found above `stop_above` if that comes sooner.
    fn scan(&self, step: &LinearizedStep, period: f64, stop_above: f64) -> Result<f64> {
        let n = self.kgrid_n;
        let half = n / 2 + 1;
        let h = period / n as f64;
        // radius[b * n + a] at k = (a h, b h), b covering [0, period/2]
        let mut radius = vec![0.0; n * half];
        let mut best = f64::NEG_INFINITY;
        for b in 0..half {
            for a in 0..n {
                let r = step.radius(Vec2::new(a as f64 * h, b as f64 * h))?;
                if r > stop_above {
                    return Ok(r);
                }
                radius[b * n + a] = r;
                best = best.max(r);
            }
        }
        if self.starts == 0 {
            return Ok(best);
        }
        let at = |a: i64, b: i64| -> f64 {
            // fold (a, b) into the stored half domain via k → −k
            let (a, b) = (a.rem_euclid(n as i64), b.rem_euclid(n as i64));
            let (a, b) = if b as usize >= half {
                ((n as i64 - a) % n as i64, n as i64 - b)
            } else {
                (a, b)
            };
            radius[b as usize * n + a as usize]
        };
        let mut peaks: Vec<(f64, i64, i64)> = Vec::new();
        for b in 0..half as i64 {
            for a in 0..n as i64 {
                if a == 0 && b == 0 {
                    continue;
                }
                let r = at(a, b);
                let is_peak = COMPASS
                    .iter()
                    .all(|&(da, db)| at(a + da as i64, b + db as i64) <= r);
                if is_peak {
                    peaks.push((r, a, b));
                }
            }
        }
        peaks.sort_by(|x, y| y.0.total_cmp(&x.0));
        for &(r0, a, b) in peaks.iter().take(self.starts) {
            let mut k = Vec2::new(a as f64 * h, b as f64 * h);
            let mut r = r0;
            let mut spacing = h / 2.0;
            for _ in 0..self.refine_rounds {
                loop {
                    let mut moved = false;
                    for &(dx, dy) in &COMPASS {
                        let trial = k + Vec2::new(dx, dy) * spacing;
                        let rt = step.radius(trial)?;
                        if rt > stop_above {
                            return Ok(rt);
                        }
                        if rt > r {
                            r = rt;
                            k = trial;
                            moved = true;
                        }
                    }
                    if !moved {
                        break;
                    }
                }
                spacing /= 2.0;
            }
            best = best.max(r);
        }
        Ok(best)
    }

    pub fn max_radius(&self, prob: &StabilityProblem, v: Vec2) -> Result<f64> {
        self.scan(&prob.linearize(v)?, prob.k_period(), f64::INFINITY)
    }

    pub fn is_stable(&self, prob: &StabilityProblem, v: Vec2) -> Result<bool> {
        let limit = 1.0 + RADIUS_TOLERANCE;
        Ok(self.scan(&prob.linearize(v)?, prob.k_period(), limit)? <= limit)
    }

    /// Largest `|V|` along `prob.theta` before the first unstable value of a
    /// scan from zero in steps of `tol`, capped at `v_cap`.
    ///
    /// Returns `-tol` when `V = 0` is already unstable.
    pub fn max_stable_speed(&self, prob: &StabilityProblem, tol: f64, v_cap: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("speed resolution must be positive, got {tol}")));
        }
        let steps = (v_cap / tol + 1e-9).floor() as usize;
        let mut last = -tol;
        for i in 0..=steps {
            let speed = i as f64 * tol;
            if !self.is_stable(prob, prob.velocity(speed))? {
                break;
            }
            last = speed;
        }
        Ok(last)
    }
}

/// Maximum spectral radius over a `kgrid_n`-per-period wavevector grid with
/// local refinement of its best peaks.
pub fn max_radius_over_k(prob: &StabilityProblem, v: Vec2, kgrid_n: usize) -> Result<f64> {
    KScan::new(kgrid_n)?.max_radius(prob, v)
}

/// [`KScan::max_stable_speed`] with the default wavevector grid.
pub fn max_stable_speed(prob: &StabilityProblem, tol: f64, v_cap: f64) -> Result<f64> {
    KScan::default().max_stable_speed(prob, tol, v_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{bgk, rate_ladder, trt1, trt2};
    use crate::moments::Family;
    use std::f64::consts::FRAC_PI_2;

    fn problem(family: Family, alpha: f64, rates: RelaxationVector, policy: ShiftPolicy, theta: f64) -> StabilityProblem {
        StabilityProblem::unit(MomentBasis::new(family, alpha), EquilibriumKind::Truncated2, rates, policy, theta).unwrap()
    }

    #[test]
    fn conserved_modes_at_zero_wavevector() {
        for policy in [ShiftPolicy::Zero, ShiftPolicy::EqualsV] {
            let prob = problem(Family::B, 0.7, trt2(1.3, 1.9).unwrap(), policy, 0.4);
            let l = amplification(&prob, prob.velocity(0.2), Vec2::zeros()).unwrap();
            let eig = eigen::eigenvalues(&l).unwrap();
            let ones = eig.iter().filter(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-6).count();
            assert!(ones >= 3, "{eig:?}");
        }
    }

    #[test]
    fn pure_transport_is_neutral() {
        let prob = problem(Family::A, 0.0, trt1(0.0, 0.0).unwrap(), ShiftPolicy::Zero, 0.0);
        let step = prob.linearize(prob.velocity(0.3)).unwrap();
        for k in [Vec2::new(0.3, 1.1), Vec2::new(2.0, -0.5), Vec2::new(3.1, 3.1)] {
            assert!((step.radius(k).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radius_is_even_and_periodic_in_k() {
        let prob = problem(Family::A, 1.0, trt1(1.6, 1.9).unwrap(), ShiftPolicy::EqualsV, 0.3);
        let step = prob.linearize(prob.velocity(0.25)).unwrap();
        let p = prob.k_period();
        for k in [Vec2::new(0.7, 2.2), Vec2::new(-1.3, 0.4)] {
            let r = step.radius(k).unwrap();
            assert!((r - step.radius(-k).unwrap()).abs() < 1e-12);
            assert!((r - step.radius(k + Vec2::new(p, 0.0)).unwrap()).abs() < 1e-10);
            assert!((r - step.radius(k + Vec2::new(0.0, -p)).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn bgk_radius_is_frame_independent() {
        let a = problem(Family::A, 0.5, bgk(1.8).unwrap(), ShiftPolicy::Zero, 0.2);
        let b = problem(Family::A, 0.5, bgk(1.8).unwrap(), ShiftPolicy::EqualsV, 0.2);
        let (sa, sb) = (a.linearize(a.velocity(0.3)).unwrap(), b.linearize(b.velocity(0.3)).unwrap());
        for k in [Vec2::new(0.5, 1.5), Vec2::new(2.5, 0.1), Vec2::new(4.0, 5.0)] {
            assert!((sa.radius(k).unwrap() - sb.radius(k).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn family_a_radius_is_alpha_independent_at_rest_frame() {
        let rates = trt2(1.5, 1.9).unwrap();
        let k = Vec2::new(1.2, 2.7);
        let r0 = problem(Family::A, 0.0, rates, ShiftPolicy::Zero, 0.0).linearize(Vec2::new(0.2, 0.0)).unwrap().radius(k).unwrap();
        for alpha in [-1.0, 0.5, 1.0] {
            let r = problem(Family::A, alpha, rates, ShiftPolicy::Zero, 0.0).linearize(Vec2::new(0.2, 0.0)).unwrap().radius(k).unwrap();
            assert!((r - r0).abs() < 1e-10);
        }
    }

    #[test]
    fn quarter_turn_symmetry() {
        let scan = KScan::brute_force(32).unwrap();
        let rates = trt1(1.4, 1.95).unwrap();
        let a = problem(Family::A, 0.5, rates, ShiftPolicy::EqualsV, 0.3);
        let b = problem(Family::A, 0.5, rates, ShiftPolicy::EqualsV, 0.3 + FRAC_PI_2);
        let ra = scan.max_radius(&a, a.velocity(0.35)).unwrap();
        let rb = scan.max_radius(&b, b.velocity(0.35)).unwrap();
        assert!((ra - rb).abs() < 1e-9, "{ra} vs {rb}");
    }

    #[test]
    fn lattice_units_do_not_matter() {
        let rates = trt1(1.0, 1.9).unwrap();
        let unit = problem(Family::A, 0.0, rates, ShiftPolicy::Zero, 0.0);
        let scaled = StabilityProblem::new(
            unit.basis,
            unit.kind,
            rates,
            unit.policy,
            0.0,
            crate::lattice::d2q9(4.0).unwrap(),
            1.0 / 64.0,
        )
        .unwrap();
        let scan = KScan::brute_force(16).unwrap();
        let a = scan.max_radius(&unit, Vec2::new(0.2, 0.0)).unwrap();
        let b = scan.max_radius(&scaled, Vec2::new(0.8, 0.0)).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn refinement_never_lowers_the_coarse_maximum() {
        let prob = problem(Family::A, 0.0, trt1(rate_ladder(4), rate_ladder(6)).unwrap(), ShiftPolicy::Zero, 0.0);
        let v = prob.velocity(0.15);
        let coarse = KScan::brute_force(32).unwrap().max_radius(&prob, v).unwrap();
        let refined = KScan::new(32).unwrap().max_radius(&prob, v).unwrap();
        assert!(refined >= coarse);
    }

    #[test]
    fn max_stable_speed_of_the_simplest_scheme() {
        let prob = problem(Family::A, 0.0, trt1(rate_ladder(0), rate_ladder(0)).unwrap(), ShiftPolicy::Zero, 0.0);
        let scan = KScan::default();
        assert!(scan.is_stable(&prob, prob.velocity(0.40)).unwrap());
        assert!(!scan.is_stable(&prob, prob.velocity(0.44)).unwrap());
        let v = scan.max_stable_speed(&prob, 0.01, 1.0).unwrap();
        assert!((v - 0.42).abs() < 0.011, "{v}");
    }

    #[test]
    fn speed_search_limits() {
        let prob = problem(Family::A, 0.0, trt1(1.0, 1.0).unwrap(), ShiftPolicy::Zero, 0.0);
        let scan = KScan::default();
        assert_eq!(scan.max_stable_speed(&prob, 0.05, 0.0).unwrap(), 0.0);
        assert!(scan.max_stable_speed(&prob, 0.0, 1.0).is_err());
        assert!(KScan::new(4).is_err());
    }

    #[test]
    fn non_finite_matrices_are_rejected() {
        let mut l = AmplificationMatrix::identity();
        l[(2, 3)] = Complex64::new(f64::NAN, 0.0);
        assert!(spectral_radius(&l).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("zero".parse::<ShiftPolicy>().unwrap(), ShiftPolicy::Zero);
        assert_eq!("equals-v".parse::<ShiftPolicy>().unwrap(), ShiftPolicy::EqualsV);
        assert_eq!("scaled:0.5".parse::<ShiftPolicy>().unwrap(), ShiftPolicy::ScaledV(0.5));
        assert_eq!("fixed:0.1/-0.2".parse::<ShiftPolicy>().unwrap(), ShiftPolicy::Fixed(Vec2::new(0.1, -0.2)));
        for p in [ShiftPolicy::Zero, ShiftPolicy::EqualsV, ShiftPolicy::ScaledV(0.8)] {
            assert_eq!(p.to_string().parse::<ShiftPolicy>().unwrap(), p);
        }
        assert!("sideways".parse::<ShiftPolicy>().is_err());
    }
}
