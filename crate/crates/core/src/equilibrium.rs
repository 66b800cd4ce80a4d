//! Second-order truncated and product equilibria, plus their linearization.
//!
//! Both are written `feq_j(ρ, u) = ρ g_j(u)`, so the linearization around a
//! base velocity does not depend on the base density.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Mat9, Vec2, Vec9, VelocitySet, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumKind {
    /// Second-order truncated Maxwellian.
    Truncated2,
    /// Fourth-order product form with the `d_j ux² uy²` correction.
    Product4,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquilibriumKind::Truncated2 => f.write_str("truncated2"),
            EquilibriumKind::Product4 => f.write_str("product4"),
        }
    }
}

impl FromStr for EquilibriumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "truncated2" | "truncated" | "t2" => Ok(EquilibriumKind::Truncated2),
            "product4" | "product" | "p4" => Ok(EquilibriumKind::Product4),
            other => Err(Error::Config(format!("unknown equilibrium `{other}`"))),
        }
    }
}

/// D2Q9 weights, sound speed and product-equilibrium coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConstants {
    pub weights: [f64; Q],
    /// Squared sound speed, `λ²/3`.
    pub c0_sq: f64,
    pub d: [f64; Q],
}

const W0: f64 = 4.0 / 9.0;
const W1: f64 = 1.0 / 9.0;
const W2: f64 = 1.0 / 36.0;

impl LatticeConstants {
    pub fn d2q9(vset: &VelocitySet) -> Self {
        let l = vset.lambda();
        LatticeConstants {
            weights: [W0, W1, W1, W1, W1, W2, W2, W2, W2],
            c0_sq: l * l / 3.0,
            d: [-0.25, 0.5, 0.5, 0.5, 0.5, -1.0, -1.0, -1.0, -1.0],
        }
    }

    pub fn c0(&self) -> f64 {
        self.c0_sq.sqrt()
    }
}

/// `g_j(u)`, the equilibrium per unit density.
#[inline]
pub(crate) fn unit_equilibrium(
    kind: EquilibriumKind,
    u: Vec2,
    consts: &LatticeConstants,
    vset: &VelocitySet,
) -> Vec9 {
    let c2 = consts.c0_sq;
    let c4 = c2 * c2;
    let usq = u.norm_squared();
    let mut g = Vec9::zeros();
    for (j, v) in vset.velocities().iter().enumerate() {
        let a = u.dot(v);
        let mut p = 1.0 + a / c2 + a * a / (2.0 * c4) - usq / (2.0 * c2);
        if kind == EquilibriumKind::Product4 {
            p += a * a * a / (6.0 * c4 * c2) - usq * a / (2.0 * c4)
                + consts.d[j] * u.x * u.x * u.y * u.y / c4;
        }
        g[j] = consts.weights[j] * p;
    }
    g
}

/// Gradient of each `g_j` with respect to `u`.
pub(crate) fn unit_equilibrium_gradient(
    kind: EquilibriumKind,
    u: Vec2,
    consts: &LatticeConstants,
    vset: &VelocitySet,
) -> [Vec2; Q] {
    let c2 = consts.c0_sq;
    let c4 = c2 * c2;
    let usq = u.norm_squared();
    let mut out = [Vec2::zeros(); Q];
    for (j, v) in vset.velocities().iter().enumerate() {
        let a = u.dot(v);
        let mut grad = v / c2 + v * (a / c4) - u / c2;
        if kind == EquilibriumKind::Product4 {
            grad += v * (a * a / (2.0 * c4 * c2)) - (u * (2.0 * a) + v * usq) / (2.0 * c4)
                + Vec2::new(2.0 * u.x * u.y * u.y, 2.0 * u.x * u.x * u.y) * (consts.d[j] / c4);
        }
        out[j] = grad * consts.weights[j];
    }
    out
}

/// Equilibrium distribution for density `rho` and velocity `u`.
pub fn feq(
    kind: EquilibriumKind,
    rho: f64,
    u: Vec2,
    consts: &LatticeConstants,
    vset: &VelocitySet,
) -> Result<Vec9> {
    if rho < 0.0 || rho.is_nan() {
        return Err(Error::invalid(format!("density must be non-negative, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(Vec9::zeros());
    }
    Ok(unit_equilibrium(kind, u, consts, vset) * rho)
}

/// Matrix `E` with `feq ≈ E f` near the state `(ρ, q) = (1, V)`:
/// `E[j][l] = g_j(V) − ∇g_j(V)·V + ∇g_j(V)·v_l`.
pub fn linearized_equilibrium(
    kind: EquilibriumKind,
    base_velocity: Vec2,
    consts: &LatticeConstants,
    vset: &VelocitySet,
) -> Mat9 {
    let g = unit_equilibrium(kind, base_velocity, consts, vset);
    let grad = unit_equilibrium_gradient(kind, base_velocity, consts, vset);
    Mat9::from_fn(|j, l| g[j] - grad[j].dot(&base_velocity) + grad[j].dot(&vset.velocity(l)))
}

/// Density and momentum of a distribution.
#[inline]
pub fn macroscopic(f: &Vec9, vset: &VelocitySet) -> (f64, Vec2) {
    let rho = f.sum();
    let q = vset
        .velocities()
        .iter()
        .zip(f.iter())
        .fold(Vec2::zeros(), |acc, (v, fj)| acc + v * *fj);
    (rho, q)
}
