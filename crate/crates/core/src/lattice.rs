//! D2Q9 geometry and the periodic grid.
//!
//! Velocity numbering is a frozen contract shared by the weights, the `d`
//! coefficients of the product equilibrium and every moment matrix:
//!
//! ```text
//!   6   2   5
//!    \  |  /
//!   3 - 0 - 1
//!    /  |  \
//!   7   4   8
//! ```

use nalgebra::{SMatrix, SVector, Vector2};

use crate::error::{Error, Result};

/// Number of discrete velocities.
pub const Q: usize = 9;

pub type Vec2 = Vector2<f64>;
pub type Vec9 = SVector<f64, Q>;
pub type Mat9 = SMatrix<f64, Q, Q>;

/// Integer directions in lattice units, in canonical order.
pub const DIRECTIONS: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

/// Index of the opposite velocity.
pub const OPPOSITE: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySet {
    lambda: f64,
    velocities: [Vec2; Q],
}

/// Builds the D2Q9 velocity set scaled by `lambda`.
pub fn d2q9(lambda: f64) -> Result<VelocitySet> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "velocity scale must be positive and finite, got {lambda}"
        )));
    }
    let velocities =
        DIRECTIONS.map(|[cx, cy]| Vec2::new(f64::from(cx) * lambda, f64::from(cy) * lambda));
    Ok(VelocitySet { lambda, velocities })
}

impl VelocitySet {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn velocities(&self) -> &[Vec2; Q] {
        &self.velocities
    }

    pub fn velocity(&self, j: usize) -> Vec2 {
        self.velocities[j]
    }

    /// Position of `v` in the set, if it is one of the nine velocities.
    pub fn index_of(&self, v: Vec2) -> Option<usize> {
        let tol = 1e-12 * self.lambda;
        self.velocities
            .iter()
            .position(|w| (w - v).amax() <= tol)
    }
}

/// Periodic cell grid on the unit square with acoustic time scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dt: f64,
}

impl Grid {
    /// Grid of `nx × ny` cells with `dx = 1/nx` and `dt = dx/lambda`.
    ///
    /// `dx` is recomputed as `dt * lambda` so that the acoustic relation holds
    /// bit for bit; it differs from `1/nx` by at most one ulp.
    pub fn new(nx: usize, ny: usize, lambda: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::invalid(format!(
                "grid needs at least 4 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "velocity scale must be positive, got {lambda}"
            )));
        }
        let dt = (1.0 / nx as f64) / lambda;
        Ok(Grid {
            nx,
            ny,
            dx: dt * lambda,
            dt,
        })
    }

    pub fn square(n: usize, lambda: f64) -> Result<Self> {
        Self::new(n, n, lambda)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear storage index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Cell-center coordinates.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dx)
    }

    /// Source cell of the transport along `v`: `cell - v dt/dx`, wrapped.
    pub fn periodic_shift(&self, cell: (usize, usize), v: Vec2) -> Result<(usize, usize)> {
        let (ci, cj) = cell;
        if ci >= self.nx || cj >= self.ny {
            return Err(Error::invalid(format!(
                "cell ({ci}, {cj}) outside {}x{} grid",
                self.nx, self.ny
            )));
        }
        let step = |c: f64| -> Result<i64> {
            let hops = c * self.dt / self.dx;
            let r = hops.round();
            if (hops - r).abs() > 1e-9 || r.abs() > 1.0 {
                return Err(Error::invalid(format!(
                    "velocity ({}, {}) is not a lattice velocity of this grid",
                    v.x, v.y
                )));
            }
            Ok(r as i64)
        };
        let (sx, sy) = (step(v.x)?, step(v.y)?);
        Ok((
            wrap(ci as i64 - sx, self.nx),
            wrap(cj as i64 - sy, self.ny),
        ))
    }
}

#[inline]
pub(crate) fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}
