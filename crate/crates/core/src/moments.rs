//! Polynomial moment families and the velocity-shifted moment matrix.
//!
//! Row `k`, column `j` of the moment matrix is `P_k(v_j - ũ)`. Because the
//! shifted polynomials expand into the unshifted family plus lower-order terms,
//! `M(ũ) = T(ũ) M(0)` with `T(ũ)` unit lower triangular; [`ShiftFactorization`]
//! exploits that to invert `M(ũ)` without a fresh pivoted factorization.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Mat9, Vec2, Vec9, VelocitySet, Q};

/// Default bound on the 1-norm condition estimate of a moment matrix.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `1, X, Y, X²+Y², X²−Y², XY, X(αX²+Y²), Y(X²+αY²), (α/2)(X⁴+Y⁴)+X²Y²`
    A,
    /// `1, X, Y, X²+Y², X²−Y², XY, XY²+α(X²+Y²), YX²+α(X²+Y²), X²Y²`
    B,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => f.write_str("A"),
            Family::B => f.write_str("B"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            other => Err(Error::Config(format!("unknown moment family `{other}`"))),
        }
    }
}

/// A moment family together with its parameter α.
///
/// Family A with α = 0 is the cascaded (central-moment) basis and α = 1 the
/// classical d'Humières basis; family B with α = 0 coincides with A at α = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBasis {
    pub family: Family,
    pub alpha: f64,
}

impl MomentBasis {
    pub fn new(family: Family, alpha: f64) -> Self {
        MomentBasis { family, alpha }
    }

    pub fn cascaded() -> Self {
        Self::new(Family::A, 0.0)
    }

    /// The nine polynomials evaluated at `p`.
    #[inline]
    pub fn eval(&self, p: Vec2) -> Vec9 {
        let (x, y, a) = (p.x, p.y, self.alpha);
        let (x2, y2) = (x * x, y * y);
        let (p6, p7, p8) = match self.family {
            Family::A => (
                x * (a * x2 + y2),
                y * (x2 + a * y2),
                0.5 * a * (x2 * x2 + y2 * y2) + x2 * y2,
            ),
            Family::B => (
                x * y2 + a * (x2 + y2),
                y * x2 + a * (x2 + y2),
                x2 * y2,
            ),
        };
        Vec9::from([1.0, x, y, x2 + y2, x2 - y2, x * y, p6, p7, p8])
    }

    /// Analytic gradients of the nine polynomials at `p`.
    pub fn gradient(&self, p: Vec2) -> [Vec2; Q] {
        let (x, y, a) = (p.x, p.y, self.alpha);
        let (x2, y2) = (x * x, y * y);
        let (g6, g7, g8) = match self.family {
            Family::A => (
                Vec2::new(3.0 * a * x2 + y2, 2.0 * x * y),
                Vec2::new(2.0 * x * y, x2 + 3.0 * a * y2),
                Vec2::new(2.0 * a * x2 * x + 2.0 * x * y2, 2.0 * a * y2 * y + 2.0 * x2 * y),
            ),
            Family::B => (
                Vec2::new(y2 + 2.0 * a * x, 2.0 * x * y + 2.0 * a * y),
                Vec2::new(2.0 * x * y + 2.0 * a * x, x2 + 2.0 * a * y),
                Vec2::new(2.0 * x * y2, 2.0 * x2 * y),
            ),
        };
        [
            Vec2::zeros(),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0 * x, 2.0 * y),
            Vec2::new(2.0 * x, -2.0 * y),
            Vec2::new(y, x),
            g6,
            g7,
            g8,
        ]
    }
}

/// Evaluates the basis at a point: `(P_0(p), ..., P_8(p))`.
pub fn eval_basis(basis: &MomentBasis, point: Vec2) -> Vec9 {
    basis.eval(point)
}

/// Raw entries `P_k(v_j - ũ)` without any conditioning check.
#[inline]
pub fn shifted_entries(basis: &MomentBasis, vset: &VelocitySet, utilde: Vec2) -> Mat9 {
    let mut m = Mat9::zeros();
    for (j, v) in vset.velocities().iter().enumerate() {
        m.set_column(j, &basis.eval(v - utilde));
    }
    m
}

/// Moment matrix `M(ũ)` with its inverse, validated at construction.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    entries: Mat9,
    inverse: Mat9,
    utilde: Vec2,
    condition: f64,
}

/// Builds `M(ũ)` and checks that it can be inverted reliably.
pub fn moment_matrix(basis: &MomentBasis, vset: &VelocitySet, utilde: Vec2) -> Result<MomentMatrix> {
    MomentMatrix::with_condition_limit(basis, vset, utilde, DEFAULT_CONDITION_LIMIT)
}

/// `M⁻¹` of a validated moment matrix.
pub fn invert(m: &MomentMatrix) -> Result<Mat9> {
    m.invert()
}

impl MomentMatrix {
    pub fn with_condition_limit(
        basis: &MomentBasis,
        vset: &VelocitySet,
        utilde: Vec2,
        limit: f64,
    ) -> Result<Self> {
        let entries = shifted_entries(basis, vset, utilde);
        let degenerate = |condition| Error::DegenerateShift {
            ux: utilde.x,
            uy: utilde.y,
            condition,
        };
        let inverse = entries
            .lu()
            .try_inverse()
            .ok_or_else(|| degenerate(f64::INFINITY))?;
        let condition = norm1(&entries) * norm1(&inverse);
        if !condition.is_finite() || condition > limit {
            return Err(degenerate(condition));
        }
        Ok(MomentMatrix {
            entries,
            inverse,
            utilde,
            condition,
        })
    }

    pub fn entries(&self) -> &Mat9 {
        &self.entries
    }

    pub fn utilde(&self) -> Vec2 {
        self.utilde
    }

    /// 1-norm condition number `‖M‖₁ ‖M⁻¹‖₁`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn invert(&self) -> Result<Mat9> {
        Ok(self.inverse)
    }

    pub fn into_parts(self) -> (Mat9, Mat9) {
        (self.entries, self.inverse)
    }
}

/// Max column sum.
pub(crate) fn norm1(m: &Mat9) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Shift factorization `M(ũ) = T(ũ) M(0)` with `M(0)⁻¹` cached.
///
/// The strict lower triangle of `T(ũ)` is also kept as polynomials of degree
/// at most four in `ũ`, so a cell can build it without touching `M(ũ)`.
#[derive(Debug, Clone)]
pub struct ShiftFactorization {
    basis: MomentBasis,
    vset: VelocitySet,
    m0: Mat9,
    m0_inv: Mat9,
    terms: Vec<TransferTerm>,
}

/// `coef · ũx^a ũy^b` contributing to `T[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TransferTerm {
    row: u8,
    col: u8,
    monomial: u8,
    coef: f64,
}

/// Exponents of the bivariate monomials of degree ≤ 4.
const MONOMIALS: [(i32, i32); 15] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

#[inline]
fn monomials(u: Vec2) -> [f64; 15] {
    let (x, y) = (u.x, u.y);
    let (x2, y2) = (x * x, y * y);
    [
        1.0,
        x,
        y,
        x2,
        x * y,
        y2,
        x2 * x,
        x2 * y,
        x * y2,
        y2 * y,
        x2 * x2,
        x2 * x * y,
        x2 * y2,
        x * y2 * y,
        y2 * y2,
    ]
}

/// Fits every strict-lower entry of `T(ũ)` on a 5×5 grid of shifts, which is
/// unisolvent for degree four, and keeps the non-negligible coefficients.
fn fit_transfer(basis: &MomentBasis, vset: &VelocitySet, m0_inv: &Mat9) -> Result<Vec<TransferTerm>> {
    let h = 0.5 * vset.lambda();
    let samples: Vec<Vec2> = (-2..=2)
        .flat_map(|i| (-2..=2).map(move |j| Vec2::new(i as f64 * h, j as f64 * h)))
        .collect();
    let scaled = |u: Vec2| monomials(u / h);
    let vander = nalgebra::DMatrix::from_fn(samples.len(), 15, |r, c| scaled(samples[r])[c]);
    let pinv = vander
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::invalid(format!("transfer fit failed: {e}")))?;
    let transfers: Vec<Mat9> = samples
        .iter()
        .map(|&u| shifted_entries(basis, vset, u) * m0_inv)
        .collect();
    let mut terms = Vec::new();
    for row in 1..Q {
        for col in 0..row {
            let values = nalgebra::DVector::from_iterator(samples.len(), transfers.iter().map(|t| t[(row, col)]));
            let scale = values.amax().max(1.0);
            let coefs = &pinv * values;
            for (monomial, &c) in coefs.iter().enumerate() {
                if c.abs() > 1e-12 * scale {
                    let (a, b) = MONOMIALS[monomial];
                    terms.push(TransferTerm {
                        row: row as u8,
                        col: col as u8,
                        monomial: monomial as u8,
                        coef: c / h.powi(a + b),
                    });
                }
            }
        }
    }
    Ok(terms)
}

impl ShiftFactorization {
    pub fn new(basis: MomentBasis, vset: VelocitySet) -> Result<Self> {
        let m0 = moment_matrix(&basis, &vset, Vec2::zeros())?;
        let m0_inv = m0.invert()?;
        let terms = fit_transfer(&basis, &vset, &m0_inv)?;
        Ok(ShiftFactorization {
            basis,
            m0: *m0.entries(),
            m0_inv,
            vset,
            terms,
        })
    }

    pub fn basis(&self) -> &MomentBasis {
        &self.basis
    }

    pub fn m0_inverse(&self) -> &Mat9 {
        &self.m0_inv
    }

    /// `T(ũ) = M(ũ) M(0)⁻¹`.
    pub fn transfer(&self, utilde: Vec2) -> Mat9 {
        shifted_entries(&self.basis, &self.vset, utilde) * self.m0_inv
    }

    /// Strict lower triangle of `T(ũ)` from the fitted polynomials.
    #[inline]
    pub fn transfer_lower(&self, utilde: Vec2) -> Mat9 {
        let mono = monomials(utilde);
        let mut t = Mat9::zeros();
        for term in &self.terms {
            t[(term.row as usize, term.col as usize)] += term.coef * mono[term.monomial as usize];
        }
        t
    }

    /// `M(ũ)⁻¹ diag(s) M(ũ) g` without forming `M(ũ)`.
    #[inline]
    pub fn relax_moments(&self, utilde: Vec2, rates: &[f64; Q], g: &Vec9) -> Vec9 {
        let t = self.transfer_lower(utilde);
        let m0g = self.m0 * g;
        let mut y = Vec9::zeros();
        for k in 0..Q {
            let mut moment = m0g[k];
            for l in 0..k {
                moment += t[(k, l)] * m0g[l];
            }
            let mut acc = rates[k] * moment;
            for l in 0..k {
                acc -= t[(k, l)] * y[l];
            }
            y[k] = acc;
        }
        self.m0_inv * y
    }

    /// Solves `M(ũ) x = b` given `M(ũ)` through the triangular factor.
    ///
    /// Only the lower triangle of `T(ũ)` is formed; the strict upper part
    /// vanishes identically.
    #[inline]
    pub fn solve_with(&self, m: &Mat9, b: &Vec9) -> Vec9 {
        let mut y = Vec9::zeros();
        for k in 0..Q {
            let mut acc = b[k];
            for l in 0..k {
                let t_kl = (0..Q).map(|j| m[(k, j)] * self.m0_inv[(j, l)]).sum::<f64>();
                acc -= t_kl * y[l];
            }
            y[k] = acc;
        }
        self.m0_inv * y
    }

    /// `M(ũ)⁻¹ = M(0)⁻¹ T(ũ)⁻¹`.
    pub fn inverse(&self, utilde: Vec2) -> Mat9 {
        let m = shifted_entries(&self.basis, &self.vset, utilde);
        let mut inv = Mat9::zeros();
        for c in 0..Q {
            let mut e = Vec9::zeros();
            e[c] = 1.0;
            inv.set_column(c, &self.solve_with(&m, &e));
        }
        inv
    }
}
