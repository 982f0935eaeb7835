//! Restarted Arnoldi minimal-residual solver for real sparse systems.
//!
//! Each cycle builds an orthonormal Krylov basis from the current residual,
//! stops early on a small subdiagonal Hessenberg entry (breakdown) or once
//! the least-squares residual estimate drops below tolerance, and updates
//! the iterate from the Hessenberg least-squares problem. Acceptance is
//! decided on the true residual in the max norm.

use super::CsrMatrix;
use crate::error::{OddsError, Result};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Accept once `max |b - A x| <= residual_tol`.
    pub residual_tol: f64,
    /// A subdiagonal Hessenberg entry below this ends the current cycle.
    pub breakdown_tol: f64,
    /// Krylov dimension per cycle; `None` means `min(n, 200)`.
    pub max_krylov_dim: Option<usize>,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { residual_tol: 1e-5, breakdown_tol: 1e-4, max_krylov_dim: None, max_restarts: 50 }
    }
}

impl SolverOptions {
    pub fn with_tolerance(residual_tol: f64) -> Self {
        SolverOptions { residual_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || !(self.breakdown_tol > 0.0) {
            return Err(OddsError::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_krylov_dim == Some(0) {
            return Err(OddsError::InvalidParameter("Krylov dimension must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums let the compiler vectorise the loop.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn residual_into<A: LinearOperator + ?Sized>(op: &A, b: &[f64], x: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

pub fn krylov_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    x0: &[f64],
    opts: &SolverOptions,
) -> Result<KrylovSolution> {
    opts.validate()?;
    let n = op.dim();
    crate::error::ensure_len(n, b.len())?;
    crate::error::ensure_len(n, x0.len())?;
    let m = opts.max_krylov_dim.unwrap_or(200).min(n).max(1);

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual_into(op, b, &x, &mut r);
    let mut res = max_abs(&r);

    // Basis vectors stored back to back, grown as the cycle needs them.
    let mut basis = vec![0.0; n];
    // Column-major Hessenberg after Givens rotation: hess[j * (m + 1) + i] = R(i, j).
    let mut hess: Vec<f64> = Vec::new();
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut iterations = 0;

    for restart in 0..=opts.max_restarts {
        if res <= opts.residual_tol {
            return Ok(KrylovSolution { x, iterations, restarts: restart, residual: res });
        }
        if restart == opts.max_restarts || !res.is_finite() {
            break;
        }

        let beta = norm(&r);
        for (v, ri) in basis[..n].iter_mut().zip(&r) {
            *v = ri / beta;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k = 0;
        for j in 0..m {
            op.apply(&basis[j * n..(j + 1) * n], &mut w);
            iterations += 1;
            if hess.len() < (j + 1) * (m + 1) {
                hess.resize((j + 1) * (m + 1), 0.0);
            }
            let h = &mut hess[j * (m + 1)..(j + 1) * (m + 1)];
            for (i, v) in basis[..(j + 1) * n].chunks_exact(n).enumerate() {
                let hij = dot(v, &w);
                h[i] = hij;
                for (wl, vl) in w.iter_mut().zip(v) {
                    *wl -= hij * vl;
                }
            }
            let sub = norm(&w);
            h[j + 1] = sub;

            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = h[j].hypot(h[j + 1]);
            if rho == 0.0 {
                // Column is identically zero: the operator is singular on
                // this Krylov space.
                break;
            }
            cs[j] = h[j] / rho;
            sn[j] = h[j + 1] / rho;
            h[j] = rho;
            h[j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k = j + 1;

            if sub < opts.breakdown_tol || g[j + 1].abs() <= opts.residual_tol || j + 1 == m {
                break;
            }
            if basis.len() < (j + 2) * n {
                basis.resize((j + 2) * n, 0.0);
            }
            for (v, wl) in basis[(j + 1) * n..(j + 2) * n].iter_mut().zip(&w) {
                *v = wl / sub;
            }
        }

        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= hess[l * (m + 1) + i] * y[l];
            }
            y[i] = s / hess[i * (m + 1) + i];
        }
        for (v, yi) in basis.chunks_exact(n).zip(&y[..k]) {
            for (xl, vl) in x.iter_mut().zip(v) {
                *xl += yi * vl;
            }
        }
        residual_into(op, b, &x, &mut r);
        res = max_abs(&r);
        if res > opts.residual_tol && (k == 0 || norm(&r) >= beta * (1.0 - 1e-12)) {
            // A full cycle made no progress; restarting would repeat it.
            return Err(OddsError::SolverFailure { residual: res, restarts: restart + 1 });
        }
    }

    Err(OddsError::SolverFailure { residual: res, restarts: opts.max_restarts })
}
