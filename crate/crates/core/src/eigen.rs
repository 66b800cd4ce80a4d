//! Eigenvalues of small dense complex matrices.
//!
//! Householder reduction to upper Hessenberg form followed by Wilkinson-shifted
//! QR sweeps with Givens rotations. Only eigenvalues are produced, so each
//! sweep touches the active diagonal block alone.

#![allow(clippy::needless_range_loop)]

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const ITERATIONS_PER_EIGENVALUE: usize = 40;

/// All eigenvalues of `a`, in no particular order.
///
/// Falls back to a diagonally balanced copy if the first attempt does not
/// converge.
pub fn eigenvalues<const N: usize>(a: &SMatrix<C, N, N>) -> Result<[C; N]> {
    let mut h = to_rows(a);
    match hessenberg_qr(&mut h) {
        Ok(ev) => Ok(ev),
        Err(_) => {
            let mut h = to_rows(a);
            balance(&mut h);
            hessenberg_qr(&mut h)
        }
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<const N: usize>(a: &SMatrix<C, N, N>) -> Result<f64> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn to_rows<const N: usize>(a: &SMatrix<C, N, N>) -> [[C; N]; N] {
    let mut h = [[C::new(0.0, 0.0); N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = a[(i, j)];
        }
    }
    h
}

/// Power-of-two diagonal scaling that evens out row and column norms.
fn balance<const N: usize>(h: &mut [[C; N]; N]) {
    for _ in 0..20 {
        let mut done = true;
        for i in 0..N {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..N).filter(|&j| j != i) {
                c += h[j][i].l1_norm();
                r += h[i][j].l1_norm();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c > r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if f != 1.0 {
                done = false;
                for j in 0..N {
                    h[i][j] /= f;
                    h[j][i] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn reduce_to_hessenberg<const N: usize>(h: &mut [[C; N]; N]) {
    for k in 0..N.saturating_sub(2) {
        let alpha: f64 = (k + 1..N).map(|i| h[i][k].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[k + 1][k];
        let phase = if x0.norm() == 0.0 { C::new(1.0, 0.0) } else { x0 / x0.norm() };
        // v = x + phase·α e1, reflector I − 2 v v* / (v* v)
        let mut v = [C::new(0.0, 0.0); N];
        for i in k + 1..N {
            v[i] = h[i][k];
        }
        v[k + 1] += phase * alpha;
        let vnorm2: f64 = (k + 1..N).map(|i| v[i].norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // left: H ← (I − β v v*) H
        for j in 0..N {
            let mut s = C::new(0.0, 0.0);
            for i in k + 1..N {
                s += v[i].conj() * h[i][j];
            }
            s *= beta;
            for i in k + 1..N {
                h[i][j] -= v[i] * s;
            }
        }
        // right: H ← H (I − β v v*)
        for row in h.iter_mut() {
            let mut s = C::new(0.0, 0.0);
            for j in k + 1..N {
                s += row[j] * v[j];
            }
            s *= beta;
            for j in k + 1..N {
                row[j] -= s * v[j].conj();
            }
        }
        for row in h.iter_mut().skip(k + 2) {
            row[k] = C::new(0.0, 0.0);
        }
    }
}

/// Eigenvalue of the trailing 2×2 block closest to its last diagonal entry.
fn wilkinson_shift(a: C, b: C, c: C, d: C) -> C {
    let tr_half = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (tr_half * tr_half - det).sqrt();
    let (l1, l2) = (tr_half + disc, tr_half - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_qr<const N: usize>(h: &mut [[C; N]; N]) -> Result<[C; N]> {
    let mut ev = [C::new(0.0, 0.0); N];
    if N == 0 {
        return Ok(ev);
    }
    reduce_to_hessenberg(h);
    // a subdiagonal below ε‖H‖ is rounding noise for the whole problem; the
    // local test alone stalls on clusters of tiny (defective) eigenvalues
    let floor = f64::EPSILON * h.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let max_iter = ITERATIONS_PER_EIGENVALUE * N;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = N - 1;
    let mut rot = [(0.0f64, C::new(0.0, 0.0)); N];
    while hi > 0 {
        // locate the start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let scale = h[lo - 1][lo - 1].l1_norm() + h[lo][lo].l1_norm();
            let sub = h[lo][lo - 1].l1_norm();
            if sub <= f64::EPSILON * scale || sub <= floor || sub < f64::MIN_POSITIVE {
                h[lo][lo - 1] = C::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            ev[hi] = h[hi][hi];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence { iterations: total });
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[hi][hi] + C::new(0.75 * h[hi][hi - 1].norm(), 0.5 * h[hi][hi - 1].norm())
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        for (i, row) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
            row[i] -= mu;
        }
        // H − μI = QR with Q = G_lo* ... G_{hi−1}*
        for i in lo..hi {
            let (a, b) = (h[i][i], h[i + 1][i]);
            let r = a.norm().hypot(b.norm());
            let (c, s) = if r == 0.0 {
                (1.0, C::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (0.0, C::new(1.0, 0.0))
            } else {
                let c = a.norm() / r;
                (c, (a / a.norm()) * b.conj() / r)
            };
            rot[i] = (c, s);
            for j in i..=hi {
                let (x, y) = (h[i][j], h[i + 1][j]);
                h[i][j] = x * c + s * y;
                h[i + 1][j] = -s.conj() * x + y * c;
            }
        }
        // RQ
        for i in lo..hi {
            let (c, s) = rot[i];
            for row in h.iter_mut().take((i + 2).min(hi) + 1).skip(lo) {
                let (x, y) = (row[i], row[i + 1]);
                row[i] = x * c + y * s.conj();
                row[i + 1] = -x * s + y * c;
            }
        }
        for (i, row) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
            row[i] += mu;
        }
    }
    ev[0] = h[0][0];
    Ok(ev)
}
