//! Crank–Nicolson step for `i u_t = u_xx` in real block form.
//!
//! With `u = p + i q` on the interior nodes and the stacked unknown
//! `U = [q; p]`, one step reads
//!
//! ```text
//! (A ⊗ B + C) U^{n+1} = (-A ⊗ B + C) U^n + F
//! A = diag(-tau/2, tau/2),  C = [[0, I], [I, 0]]
//! ```
//!
//! where `B` is the interior block of the assembled second-derivative matrix
//! and `F` carries the Dirichlet data through the two boundary columns.

use super::krylov::{krylov_solve, LinearOperator, SolverOptions};
use super::CsrMatrix;
use crate::error::{ensure_len, OddsError, Result};
use crate::mesh::InteriorSplit;
use num_complex::Complex64 as C64;

/// Dirichlet values at both ends, at the old and the new time level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryPair {
    pub left_old: C64,
    pub left_new: C64,
    pub right_old: C64,
    pub right_new: C64,
}

impl BoundaryPair {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone)]
pub struct CnSystem {
    tau: f64,
    interior: usize,
    b: CsrMatrix,
    left_col: Vec<f64>,
    right_col: Vec<f64>,
}

/// `G = sign * (A ⊗ B) + C` acting on `[q; p]`.
#[derive(Debug, Clone, Copy)]
pub struct KronOperator<'a> {
    b: &'a CsrMatrix,
    half_tau: f64,
    sign: f64,
}

impl LinearOperator for KronOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.b.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.b.rows();
        let (q, p) = x.split_at(n);
        let (top, bottom) = y.split_at_mut(n);
        let s = self.sign * self.half_tau;
        // Rows of G: top = -s B q + p, bottom = s B p + q.
        self.b.mul_vec_pair_into(q, p, top, bottom);
        for (f, pv) in top.iter_mut().zip(p) {
            *f = -s * *f + pv;
        }
        for (g, qv) in bottom.iter_mut().zip(q) {
            *g = s * *g + qv;
        }
    }
}

impl CnSystem {
    pub fn new(split: &InteriorSplit, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(OddsError::InvalidParameter("time step must be finite".into()));
        }
        let interior = split.interior.rows();
        ensure_len(interior, split.left_col.len())?;
        ensure_len(interior, split.right_col.len())?;
        Ok(CnSystem {
            tau,
            interior,
            b: split.interior.clone(),
            left_col: split.left_col.clone(),
            right_col: split.right_col.clone(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of interior nodes; the real system has twice this size.
    pub fn interior_len(&self) -> usize {
        self.interior
    }

    pub fn interior_matrix(&self) -> &CsrMatrix {
        &self.b
    }

    /// Left matrix `A ⊗ B + C`.
    pub fn lhs(&self) -> KronOperator<'_> {
        KronOperator { b: &self.b, half_tau: 0.5 * self.tau, sign: 1.0 }
    }

    /// Right matrix `-A ⊗ B + C`.
    pub fn rhs(&self) -> KronOperator<'_> {
        KronOperator { sign: -1.0, ..self.lhs() }
    }

    /// Boundary vector `F` in `[q; p]` equation order.
    pub fn boundary_vector(&self, bc: &BoundaryPair) -> Vec<f64> {
        let n = self.interior;
        let mut f = vec![0.0; 2 * n];
        if bc.is_zero() {
            return f;
        }
        let left = bc.left_old + bc.left_new;
        let right = bc.right_old + bc.right_new;
        let h = 0.5 * self.tau;
        for i in 0..n {
            let c = self.left_col[i] * left + self.right_col[i] * right;
            // p-equation picks up the q boundary terms and vice versa.
            f[i] = h * c.im;
            f[n + i] = -h * c.re;
        }
        f
    }

    /// Right-hand side `G' U + F`.
    pub fn step_rhs(&self, stacked: &[f64], bc: &BoundaryPair) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.interior];
        self.rhs().apply(stacked, &mut out);
        for (o, f) in out.iter_mut().zip(self.boundary_vector(bc)) {
            *o += f;
        }
        out
    }

    /// Solves one step for the stacked unknown, starting from `stacked`.
    pub fn solve_stacked(&self, stacked: &[f64], bc: &BoundaryPair, opts: &SolverOptions) -> Result<Vec<f64>> {
        ensure_len(2 * self.interior, stacked.len())?;
        let rhs = self.step_rhs(stacked, bc);
        Ok(krylov_solve(&self.lhs(), &rhs, stacked, opts)?.x)
    }

    /// Advances the interior values in place.
    pub fn step_interior(&self, interior: &mut [C64], bc: &BoundaryPair, opts: &SolverOptions) -> Result<()> {
        ensure_len(self.interior, interior.len())?;
        let stacked = stack(interior);
        let next = self.solve_stacked(&stacked, bc, opts)?;
        unstack(&next, interior);
        Ok(())
    }
}

/// `u = p + i q` to `[q; p]`.
pub fn stack(u: &[C64]) -> Vec<f64> {
    u.iter().map(|z| z.im).chain(u.iter().map(|z| z.re)).collect()
}

pub fn unstack(stacked: &[f64], out: &mut [C64]) {
    let n = out.len();
    for (i, z) in out.iter_mut().enumerate() {
        *z = C64::new(stacked[n + i], stacked[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble_global, build_mesh, split_interior_boundary};

    fn system(m: usize, j: usize, tau: f64) -> CnSystem {
        let mesh = build_mesh((-1.0, 1.0), m, j).unwrap();
        let split = split_interior_boundary(&assemble_global(&mesh, 2).unwrap());
        CnSystem::new(&split, tau).unwrap()
    }

    fn dense(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
        let n = op.dim();
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let mut col = vec![0.0; n];
                op.apply(&e, &mut col);
                col
            })
            .collect()
    }

    #[test]
    fn single_interior_node_matrix_by_hand() {
        // M = 1, J = 2 on [-1, 1]: dx = 2, D2 = [[1,-2,1]] in every row,
        // so the only interior entry is B11 = -2.
        let tau = 0.3;
        let sys = system(1, 2, tau);
        assert_eq!(sys.interior_len(), 1);
        let b11 = sys.interior_matrix().get(0, 0);
        assert!((b11 + 2.0).abs() < 1e-14);
        let cols = dense(&sys.lhs());
        // G = [[-tau/2 B11, 1], [1, tau/2 B11]], stored by columns here.
        let expected = [[-0.5 * tau * b11, 1.0], [1.0, 0.5 * tau * b11]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((cols[c][r] - expected[r][c]).abs() < 1e-15);
            }
        }
        let rhs = dense(&sys.rhs());
        assert!((rhs[0][0] - 0.5 * tau * b11).abs() < 1e-15);
        assert!((rhs[1][1] + 0.5 * tau * b11).abs() < 1e-15);
    }

    #[test]
    fn zero_boundary_gives_zero_vector() {
        let sys = system(3, 6, 0.1);
        assert!(sys.boundary_vector(&BoundaryPair::zero()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_time_step_is_identity() {
        let sys = system(2, 6, 0.0);
        let mut u: Vec<C64> =
            (0..sys.interior_len()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let before = u.clone();
        sys.step_interior(&mut u, &BoundaryPair::zero(), &SolverOptions::default()).unwrap();
        assert_eq!(u, before);
    }

    #[test]
    fn stacking_order_is_imaginary_first() {
        let u = [C64::new(1.0, 2.0), C64::new(3.0, 4.0)];
        assert_eq!(stack(&u), vec![2.0, 4.0, 1.0, 3.0]);
        let mut back = [C64::default(); 2];
        unstack(&stack(&u), &mut back);
        assert_eq!(back, u);
    }
}
