//! Finite-difference reference schemes on uniform grids: a box-type
//! multi-symplectic scheme and a splitting Crank–Nicolson scheme.
//!
//! Both solve their implicit stages by fixed-point iteration; each iteration
//! solves a linear system with the same restarted Krylov solver the main
//! scheme uses, warm-started from the previous iterate.

use crate::error::{ensure_len, OddsError, Result};
use crate::linalg::{krylov_solve, CsrMatrix, LinearOperator, SolverOptions};
use crate::observables::{apply_complex, LineQuadrature, Quadrature, TensorQuadrature2D};
use crate::stepper::{Boundary1D, Boundary2D, Integrator, ProblemSpec};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    x_left: f64,
    x_right: f64,
    nodes: Vec<f64>,
}

impl UniformGrid {
    /// `intervals + 1` equally spaced nodes including both ends.
    pub fn new(domain: (f64, f64), intervals: usize) -> Result<Self> {
        let (lo, hi) = domain;
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(OddsError::InvalidParameter(format!(
                "domain [{lo}, {hi}] must be a finite, non-empty interval"
            )));
        }
        if intervals < 2 {
            return Err(OddsError::InvalidParameter("a uniform grid needs at least two intervals".into()));
        }
        let h = (hi - lo) / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| lo + h * i as f64).collect();
        nodes[intervals] = hi;
        Ok(UniformGrid { x_left: lo, x_right: hi, nodes })
    }

    /// Grid with spacing as close to `h` as divides the domain.
    pub fn with_spacing(domain: (f64, f64), h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(OddsError::InvalidParameter("grid spacing must be positive".into()));
        }
        Self::new(domain, ((domain.1 - domain.0) / h).round() as usize)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_right - self.x_left) / (self.nodes.len() - 1) as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Second-order differences: centred inside, one-sided at the ends.
    pub fn first_difference(&self) -> CsrMatrix {
        let n = self.len();
        let c = 1.0 / (2.0 * self.spacing());
        let rows = (0..n)
            .map(|i| {
                if i == 0 {
                    vec![(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
                } else if i + 1 == n {
                    vec![(n - 3, c), (n - 2, -4.0 * c), (n - 1, 3.0 * c)]
                } else {
                    vec![(i - 1, -c), (i + 1, c)]
                }
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    pub fn quadrature(&self) -> LineQuadrature {
        LineQuadrature::new(&self.nodes, self.first_difference()).expect("sizes agree")
    }
}

/// `(R + i I)` acting on complex vectors stored as `[re; im]`.
struct ComplexOperator {
    re: CsrMatrix,
    im: CsrMatrix,
}

impl LinearOperator for ComplexOperator {
    fn dim(&self) -> usize {
        2 * self.re.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.re.rows();
        let (xr, xi) = x.split_at(n);
        let (yr, yi) = y.split_at_mut(n);
        let mut t = vec![0.0; n];
        self.re.mul_vec_into(xr, yr);
        self.im.mul_vec_into(xi, &mut t);
        yr.iter_mut().zip(&t).for_each(|(a, b)| *a -= b);
        self.im.mul_vec_into(xr, yi);
        self.re.mul_vec_into(xi, &mut t);
        yi.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
    }
}

fn split(u: &[C64]) -> Vec<f64> {
    u.iter().map(|z| z.re).chain(u.iter().map(|z| z.im)).collect()
}

fn join(x: &[f64]) -> Vec<C64> {
    let n = x.len() / 2;
    (0..n).map(|i| C64::new(x[i], x[n + i])).collect()
}

fn max_abs(u: &[C64]) -> f64 {
    u.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Inner linear-solve accuracy, relative to the right-hand side.
const INNER_TOL: f64 = 1e-13;

fn complex_solve(op: &ComplexOperator, rhs: &[C64], guess: &[C64], base: &SolverOptions) -> Result<Vec<C64>> {
    let opts = SolverOptions { residual_tol: INNER_TOL * max_abs(rhs).max(1.0), ..*base };
    Ok(join(&krylov_solve(op, &split(rhs), &split(guess), &opts)?.x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tolerance: 1e-12, max_iterations: 50 }
    }
}

/// Interior/boundary bookkeeping for a grid flattened to one index.
#[derive(Debug, Clone)]
struct Restriction {
    interior: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl Restriction {
    fn new(full_len: usize, is_interior: impl Fn(usize) -> bool) -> Self {
        let mut position = vec![None; full_len];
        let mut interior = Vec::new();
        for (k, p) in position.iter_mut().enumerate() {
            if is_interior(k) {
                *p = Some(interior.len());
                interior.push(k);
            }
        }
        Restriction { interior, position }
    }

    fn restrict(&self, m: &CsrMatrix) -> CsrMatrix {
        let rows = self
            .interior
            .iter()
            .map(|&r| m.row(r).filter_map(|(c, v)| self.position[c].map(|p| (p, v))).collect())
            .collect();
        CsrMatrix::from_rows(self.interior.len(), rows)
    }

    fn gather(&self, full: &[C64]) -> Vec<C64> {
        self.interior.iter().map(|&k| full[k]).collect()
    }

    fn scatter(&self, interior: &[C64], full: &mut [C64]) {
        for (&k, v) in self.interior.iter().zip(interior) {
            full[k] = *v;
        }
    }

    fn boundary_only(&self, full: &[C64]) -> Vec<C64> {
        full.iter().zip(&self.position).map(|(v, p)| if p.is_some() { C64::new(0.0, 0.0) } else { *v }).collect()
    }
}

fn scaled_sum(a: &CsrMatrix, sa: f64, b: &CsrMatrix, sb: f64) -> CsrMatrix {
    let rows = (0..a.rows())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = a.row(i).map(|(j, v)| (j, sa * v)).collect();
            for (j, v) in b.row(i) {
                match row.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += sb * v,
                    None => row.push((j, sb * v)),
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    CsrMatrix::from_rows(a.cols(), rows)
}

fn scaled(a: &CsrMatrix, s: f64) -> CsrMatrix {
    let rows = (0..a.rows()).map(|i| a.row(i).map(|(j, v)| (j, s * v)).collect()).collect();
    CsrMatrix::from_rows(a.cols(), rows)
}

/// 1D three-point stencils on the full grid; boundary rows are empty.
fn stencil_1d(n: usize, weights: [f64; 3]) -> CsrMatrix {
    let rows = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                Vec::new()
            } else {
                vec![(i - 1, weights[0]), (i, weights[1]), (i + 1, weights[2])]
            }
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// Same stencil along one axis of an `nx x ny` grid (x fastest).
fn stencil_2d(nx: usize, ny: usize, weights: [f64; 3], along_x: bool) -> CsrMatrix {
    let rows = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                return Vec::new();
            }
            let step = if along_x { 1 } else { nx };
            vec![(k - step, weights[0]), (k, weights[1]), (k + step, weights[2])]
        })
        .collect();
    CsrMatrix::from_rows(nx * ny, rows)
}

fn check_finite(u: &[C64]) -> Result<()> {
    if u.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(OddsError::FixedPointFailure { iterations: 0, update: f64::NAN })
    }
}

/// Fixed-point loop `v <- solve(rhs(v))` with the update measured in max norm.
fn fixed_point(
    mut v: Vec<C64>,
    opts: &FixedPointOptions,
    mut next: impl FnMut(&[C64]) -> Result<Vec<C64>>,
) -> Result<Vec<C64>> {
    let mut update = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let w = next(&v)?;
        check_finite(&w)?;
        update = w.iter().zip(&v).fold(0.0, |m, (a, b)| m.max((a - b).norm()));
        v = w;
        if update <= opts.tolerance * max_abs(&v).max(1.0) {
            return Ok(v);
        }
    }
    Err(OddsError::FixedPointFailure { iterations: opts.max_iterations, update })
}

/// Box scheme in the eliminated three-point form
///
/// ```text
/// i M (u^{n+1} - u^n)/tau = D v + 1/2 (N_{j-1/2} + N_{j+1/2}),  v = (u^n + u^{n+1})/2
/// ```
///
/// with `M = [1 2 1]/4`, `D` the standard second difference and
/// `N_c = (lambda |v_c|^2 + eps dW_c / tau) v_c` at cell midpoints
/// `v_c = (v_j + v_{j+1})/2`, `dW_c` the mean of the two nodal increments.
/// It conserves `h sum_c |u_c|^2` exactly for zero Dirichlet data.
pub struct Smm1D {
    problem: ProblemSpec,
    boundary: Boundary1D,
    grid: UniformGrid,
    mass: CsrMatrix,
    lap: CsrMatrix,
    restriction: Restriction,
    op: ComplexOperator,
    quadrature: LineQuadrature,
    solver: SolverOptions,
    fixed_point: FixedPointOptions,
}

impl Smm1D {
    pub fn new(
        problem: ProblemSpec,
        boundary: Boundary1D,
        grid: UniformGrid,
        solver: SolverOptions,
        fixed_point: FixedPointOptions,
    ) -> Result<Self> {
        problem.validate()?;
        solver.validate()?;
        let n = grid.len();
        let h2 = grid.spacing().powi(2);
        let mass = stencil_1d(n, [0.25, 0.5, 0.25]);
        let lap = stencil_1d(n, [1.0 / h2, -2.0 / h2, 1.0 / h2]);
        let restriction = Restriction::new(n, |k| k > 0 && k + 1 < n);
        let m_int = restriction.restrict(&mass);
        let l_int = restriction.restrict(&lap);
        let op = ComplexOperator { re: scaled(&l_int, -1.0), im: scaled(&m_int, 2.0 / problem.tau) };
        Ok(Smm1D {
            quadrature: grid.quadrature(),
            problem,
            boundary,
            grid,
            mass,
            lap,
            restriction,
            op,
            solver,
            fixed_point,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    /// `h sum_c |(u_j + u_{j+1})/2|^2`
    pub fn half_node_charge(&self, u: &[C64]) -> f64 {
        let h = self.grid.spacing();
        u.windows(2).map(|w| (0.5 * (w[0] + w[1])).norm_sqr()).sum::<f64>() * h
    }

    fn nonlinear(&self, v: &[C64], dw: Option<&[f64]>) -> Vec<C64> {
        let (lambda, eps, tau) = (self.problem.lambda, self.problem.eps, self.problem.tau);
        let cells: Vec<C64> = (0..v.len() - 1)
            .map(|c| {
                let vc = 0.5 * (v[c] + v[c + 1]);
                let w = dw.map_or(0.0, |w| 0.5 * (w[c] + w[c + 1]));
                vc * (lambda * vc.norm_sqr() + eps * w / tau)
            })
            .collect();
        let n = v.len();
        (0..n)
            .map(|j| if j == 0 || j + 1 == n { C64::new(0.0, 0.0) } else { 0.5 * (cells[j - 1] + cells[j]) })
            .collect()
    }
}

impl Integrator for Smm1D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        self.grid.len()
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let n = self.grid.len();
        ensure_len(n, u.len())?;
        if let Some(w) = dw {
            ensure_len(n, w.len())?;
        }
        let tau = self.problem.tau;
        let bc = self.boundary.pair(t, t + tau);
        let mut full = u.to_vec();
        full[0] = 0.5 * (bc.left_old + bc.left_new);
        full[n - 1] = 0.5 * (bc.right_old + bc.right_new);
        let boundary = self.restriction.boundary_only(&full);
        // Known part: (2i/tau) M u^n minus the boundary columns of L.
        let mu = apply_complex(&self.mass, u);
        let mb = apply_complex(&self.mass, &boundary);
        let lb = apply_complex(&self.lap, &boundary);
        let i2t = C64::new(0.0, 2.0 / tau);
        let known: Vec<C64> = (0..n).map(|k| i2t * (mu[k] - mb[k]) + lb[k]).collect();

        let r = &self.restriction;
        let v0 = r.gather(&full);
        let v = fixed_point(v0, &self.fixed_point, |v| {
            r.scatter(v, &mut full);
            let nl = self.nonlinear(&full, dw);
            let rhs: Vec<C64> = r.interior.iter().map(|&k| known[k] + nl[k]).collect();
            complex_solve(&self.op, &rhs, v, &self.solver)
        })?;
        r.scatter(&v, &mut full);
        for k in 1..n - 1 {
            u[k] = 2.0 * full[k] - u[k];
        }
        u[0] = bc.left_new;
        u[n - 1] = bc.right_new;
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

/// Nonlinear Crank–Nicolson stage followed by the exact noise phase:
///
/// ```text
/// u* = u^n - i tau (D w + lambda/2 (|u^n|^2 + |u*|^2) w),  w = (u^n + u*)/2
/// u^{n+1} = exp(-i eps dW) u*
/// ```
pub struct Fdscn1D {
    problem: ProblemSpec,
    boundary: Boundary1D,
    grid: UniformGrid,
    lap: CsrMatrix,
    restriction: Restriction,
    op: ComplexOperator,
    quadrature: LineQuadrature,
    solver: SolverOptions,
    fixed_point: FixedPointOptions,
}

impl Fdscn1D {
    pub fn new(
        problem: ProblemSpec,
        boundary: Boundary1D,
        grid: UniformGrid,
        solver: SolverOptions,
        fixed_point: FixedPointOptions,
    ) -> Result<Self> {
        problem.validate()?;
        solver.validate()?;
        let n = grid.len();
        let h2 = grid.spacing().powi(2);
        let lap = stencil_1d(n, [1.0 / h2, -2.0 / h2, 1.0 / h2]);
        let restriction = Restriction::new(n, |k| k > 0 && k + 1 < n);
        let l_int = restriction.restrict(&lap);
        let op = ComplexOperator { re: CsrMatrix::identity(l_int.rows()), im: scaled(&l_int, 0.5 * problem.tau) };
        Ok(Fdscn1D {
            quadrature: grid.quadrature(),
            problem,
            boundary,
            grid,
            lap,
            restriction,
            op,
            solver,
            fixed_point,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }
}

/// Shared nonlinear CN stage along the stencil `lap`.
#[allow(clippy::too_many_arguments)]
fn nonlinear_cn_stage(
    u: &[C64],
    boundary_new: &[C64],
    lap: &CsrMatrix,
    restriction: &Restriction,
    op: &ComplexOperator,
    tau: f64,
    lambda: f64,
    solver: &SolverOptions,
    fixed_point_opts: &FixedPointOptions,
) -> Result<Vec<C64>> {
    let r = restriction;
    let ih = C64::new(0.0, 0.5 * tau);
    // u^n - i tau/2 D u^n - i tau/2 D(boundary of u*)
    let lu = apply_complex(lap, u);
    let lb = apply_complex(lap, &r.boundary_only(boundary_new));
    let known: Vec<C64> = r.interior.iter().map(|&k| u[k] - ih * (lu[k] + lb[k])).collect();
    let un = r.gather(u);
    let star = fixed_point(un.clone(), fixed_point_opts, |s| {
        let rhs: Vec<C64> = known
            .iter()
            .zip(&un)
            .zip(s)
            .map(|((k, a), b)| {
                let w = 0.5 * (a + b);
                k - C64::new(0.0, tau * 0.5 * lambda * (a.norm_sqr() + b.norm_sqr())) * w
            })
            .collect();
        complex_solve(op, &rhs, s, solver)
    })?;
    let mut out = boundary_new.to_vec();
    r.scatter(&star, &mut out);
    Ok(out)
}

fn noise_phase(u: &mut [C64], eps: f64, dw: Option<&[f64]>) {
    if let Some(w) = dw {
        for (z, w) in u.iter_mut().zip(w) {
            let theta = eps * w;
            *z *= C64::new(theta.cos(), -theta.sin());
        }
    }
}

impl Integrator for Fdscn1D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        self.grid.len()
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let n = self.grid.len();
        ensure_len(n, u.len())?;
        if let Some(w) = dw {
            ensure_len(n, w.len())?;
        }
        let tau = self.problem.tau;
        let bc = self.boundary.pair(t, t + tau);
        let mut bnew = vec![C64::new(0.0, 0.0); n];
        bnew[0] = bc.left_new;
        bnew[n - 1] = bc.right_new;
        let mut star = nonlinear_cn_stage(
            u,
            &bnew,
            &self.lap,
            &self.restriction,
            &self.op,
            tau,
            self.problem.lambda,
            &self.solver,
            &self.fixed_point,
        )?;
        noise_phase(&mut star, self.problem.eps, dw);
        u.copy_from_slice(&star);
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid2D {
    pub x: UniformGrid,
    pub y: UniformGrid,
}

impl UniformGrid2D {
    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    fn restriction(&self) -> Restriction {
        let (nx, ny) = self.shape();
        Restriction::new(nx * ny, |k| {
            let (i, j) = (k % nx, k / nx);
            i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
        })
    }

    fn boundary_values(&self, bc: &Boundary2D, t: f64) -> Vec<C64> {
        let (nx, ny) = self.shape();
        let mut out = vec![C64::new(0.0, 0.0); nx * ny];
        for (i, &x) in self.x.nodes().iter().enumerate() {
            out[i] = (bc.y_bottom)(t, x);
            out[(ny - 1) * nx + i] = (bc.y_top)(t, x);
        }
        for (j, &y) in self.y.nodes().iter().enumerate() {
            out[j * nx] = (bc.x_left)(t, y);
            out[j * nx + nx - 1] = (bc.x_right)(t, y);
        }
        out
    }
}

/// Two-dimensional box-type scheme: five-point Laplacian and the mass
/// operator `S = (M_x + M_y)/2`, with the nodal nonlinearity weighted by `S`.
pub struct Smm2D {
    problem: ProblemSpec,
    boundary: Boundary2D,
    grid: UniformGrid2D,
    mass: CsrMatrix,
    lap: CsrMatrix,
    restriction: Restriction,
    op: ComplexOperator,
    quadrature: TensorQuadrature2D,
    solver: SolverOptions,
    fixed_point: FixedPointOptions,
}

impl Smm2D {
    pub fn new(
        problem: ProblemSpec,
        boundary: Boundary2D,
        grid: UniformGrid2D,
        solver: SolverOptions,
        fixed_point: FixedPointOptions,
    ) -> Result<Self> {
        problem.validate()?;
        solver.validate()?;
        let (nx, ny) = grid.shape();
        let (hx2, hy2) = (grid.x.spacing().powi(2), grid.y.spacing().powi(2));
        let mx = stencil_2d(nx, ny, [0.125, 0.25, 0.125], true);
        let my = stencil_2d(nx, ny, [0.125, 0.25, 0.125], false);
        let mass = scaled_sum(&mx, 1.0, &my, 1.0);
        let lx = stencil_2d(nx, ny, [1.0 / hx2, -2.0 / hx2, 1.0 / hx2], true);
        let ly = stencil_2d(nx, ny, [1.0 / hy2, -2.0 / hy2, 1.0 / hy2], false);
        let lap = scaled_sum(&lx, 1.0, &ly, 1.0);
        let restriction = grid.restriction();
        let m_int = restriction.restrict(&mass);
        let l_int = restriction.restrict(&lap);
        let op = ComplexOperator { re: scaled(&l_int, -1.0), im: scaled(&m_int, 2.0 / problem.tau) };
        let quadrature = TensorQuadrature2D::new(&grid.x.quadrature(), &grid.y.quadrature());
        Ok(Smm2D { problem, boundary, grid, mass, lap, restriction, op, quadrature, solver, fixed_point })
    }
}

impl Integrator for Smm2D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        let (nx, ny) = self.grid.shape();
        nx * ny
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let len = self.grid_len();
        ensure_len(len, u.len())?;
        if let Some(w) = dw {
            ensure_len(len, w.len())?;
        }
        let (tau, lambda, eps) = (self.problem.tau, self.problem.lambda, self.problem.eps);
        let old = self.grid.boundary_values(&self.boundary, t);
        let new = self.grid.boundary_values(&self.boundary, t + tau);
        let r = &self.restriction;
        let mut full = u.to_vec();
        let mid: Vec<C64> = old.iter().zip(&new).map(|(a, b)| 0.5 * (a + b)).collect();
        let boundary = r.boundary_only(&mid);
        let mu = apply_complex(&self.mass, u);
        let mb = apply_complex(&self.mass, &boundary);
        let lb = apply_complex(&self.lap, &boundary);
        let i2t = C64::new(0.0, 2.0 / tau);
        let known: Vec<C64> = (0..len).map(|k| i2t * (mu[k] - mb[k]) + lb[k]).collect();
        for (k, b) in boundary.iter().enumerate() {
            if r.position[k].is_none() {
                full[k] = *b;
            }
        }
        let v0 = r.gather(&full);
        let v = fixed_point(v0, &self.fixed_point, |v| {
            r.scatter(v, &mut full);
            let nodal: Vec<C64> = full
                .iter()
                .enumerate()
                .map(|(k, z)| z * (lambda * z.norm_sqr() + eps * dw.map_or(0.0, |w| w[k]) / tau))
                .collect();
            let sn = apply_complex(&self.mass, &nodal);
            let rhs: Vec<C64> = r.interior.iter().map(|&k| known[k] + sn[k]).collect();
            complex_solve(&self.op, &rhs, v, &self.solver)
        })?;
        r.scatter(&v, &mut full);
        for &k in &r.interior {
            u[k] = 2.0 * full[k] - u[k];
        }
        for (k, b) in new.iter().enumerate() {
            if r.position[k].is_none() {
                u[k] = *b;
            }
        }
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

/// Dimension-split variant: nonlinear CN along `x`, linear CN along `y`,
/// then the noise phase.
pub struct Fdscn2D {
    problem: ProblemSpec,
    boundary: Boundary2D,
    grid: UniformGrid2D,
    lap_x: CsrMatrix,
    lap_y: CsrMatrix,
    restriction: Restriction,
    op_x: ComplexOperator,
    op_y: ComplexOperator,
    quadrature: TensorQuadrature2D,
    solver: SolverOptions,
    fixed_point: FixedPointOptions,
}

impl Fdscn2D {
    pub fn new(
        problem: ProblemSpec,
        boundary: Boundary2D,
        grid: UniformGrid2D,
        solver: SolverOptions,
        fixed_point: FixedPointOptions,
    ) -> Result<Self> {
        problem.validate()?;
        solver.validate()?;
        let (nx, ny) = grid.shape();
        let (hx2, hy2) = (grid.x.spacing().powi(2), grid.y.spacing().powi(2));
        let lap_x = stencil_2d(nx, ny, [1.0 / hx2, -2.0 / hx2, 1.0 / hx2], true);
        let lap_y = stencil_2d(nx, ny, [1.0 / hy2, -2.0 / hy2, 1.0 / hy2], false);
        let restriction = grid.restriction();
        let cn = |l: &CsrMatrix| {
            let li = restriction.restrict(l);
            ComplexOperator { re: CsrMatrix::identity(li.rows()), im: scaled(&li, 0.5 * problem.tau) }
        };
        let op_x = cn(&lap_x);
        let op_y = cn(&lap_y);
        let quadrature = TensorQuadrature2D::new(&grid.x.quadrature(), &grid.y.quadrature());
        Ok(Fdscn2D { problem, boundary, grid, lap_x, lap_y, restriction, op_x, op_y, quadrature, solver, fixed_point })
    }
}

impl Integrator for Fdscn2D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        let (nx, ny) = self.grid.shape();
        nx * ny
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let len = self.grid_len();
        ensure_len(len, u.len())?;
        if let Some(w) = dw {
            ensure_len(len, w.len())?;
        }
        let tau = self.problem.tau;
        let new = self.grid.boundary_values(&self.boundary, t + tau);
        let star = nonlinear_cn_stage(
            u,
            &new,
            &self.lap_x,
            &self.restriction,
            &self.op_x,
            tau,
            self.problem.lambda,
            &self.solver,
            &self.fixed_point,
        )?;
        // Linear sweep is the same stage with no nonlinearity.
        let mut out = nonlinear_cn_stage(
            &star,
            &new,
            &self.lap_y,
            &self.restriction,
            &self.op_y,
            tau,
            0.0,
            &self.solver,
            &self.fixed_point,
        )?;
        noise_phase(&mut out, self.problem.eps, dw);
        u.copy_from_slice(&out);
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(lambda: f64, eps: f64, tau: f64) -> ProblemSpec {
        ProblemSpec { lambda, eps, tau, final_time: tau }
    }

    fn bump(grid: &UniformGrid) -> Vec<C64> {
        let (lo, hi) = grid.domain();
        grid.nodes()
            .iter()
            .map(|&x| {
                let s = (x - lo) / (hi - lo);
                C64::new((std::f64::consts::PI * s).sin(), 0.3 * (2.0 * std::f64::consts::PI * s).sin())
            })
            .collect()
    }

    #[test]
    fn grid_spacing_and_ends() {
        let g = UniformGrid::with_spacing((-20.0, 100.0), 0.2).unwrap();
        assert_eq!(g.len(), 601);
        assert!((g.spacing() - 0.2).abs() < 1e-14);
        assert_eq!(g.nodes()[600], 100.0);
        assert!(UniformGrid::new((0.0, 1.0), 1).is_err());
    }

    #[test]
    fn constant_state_is_fixed_without_forcing() {
        // Interior constant with matching constant boundary data.
        let g = UniformGrid::new((0.0, 1.0), 10).unwrap();
        let c = C64::new(0.7, -0.2);
        let bc = Boundary1D { left: std::sync::Arc::new(move |_| c), right: std::sync::Arc::new(move |_| c) };
        let p = problem(0.0, 0.0, 0.01);
        let smm = Smm1D::new(p, bc.clone(), g.clone(), SolverOptions::default(), FixedPointOptions::default()).unwrap();
        let mut u = vec![c; g.len()];
        smm.step(&mut u, 0.0, None).unwrap();
        assert!(u.iter().all(|z| (z - c).norm() < 1e-12));
        let fd = Fdscn1D::new(p, bc, g.clone(), SolverOptions::default(), FixedPointOptions::default()).unwrap();
        let mut u = vec![c; g.len()];
        fd.step(&mut u, 0.0, None).unwrap();
        assert!(u.iter().all(|z| (z - c).norm() < 1e-12));
    }

    #[test]
    fn smm_conserves_half_node_charge() {
        let g = UniformGrid::new((0.0, 4.0), 40).unwrap();
        let p = problem(1.0, 0.5, 0.05);
        let smm = Smm1D::new(p, Boundary1D::zero(), g.clone(), SolverOptions::default(), FixedPointOptions::default())
            .unwrap();
        let mut u = bump(&g);
        let q0 = smm.half_node_charge(&u);
        let dw: Vec<f64> = g.nodes().iter().map(|x| 0.1 * (3.0 * x).sin()).collect();
        for n in 0..10 {
            smm.step(&mut u, n as f64 * 0.05, Some(&dw)).unwrap();
        }
        assert!((smm.half_node_charge(&u) - q0).abs() < 1e-11 * q0);
    }

    #[test]
    fn fdscn_phase_stage_keeps_modulus() {
        let g = UniformGrid::new((0.0, 1.0), 12).unwrap();
        let p = problem(0.0, 2.0, 0.01);
        let fd = Fdscn1D::new(p, Boundary1D::zero(), g.clone(), SolverOptions::default(), FixedPointOptions::default())
            .unwrap();
        let mut a = bump(&g);
        let mut b = a.clone();
        let dw: Vec<f64> = (0..g.len()).map(|i| 0.3 * i as f64).collect();
        fd.step(&mut a, 0.0, None).unwrap();
        fd.step(&mut b, 0.0, Some(&dw)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.norm() - y.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_failure_is_reported() {
        let opts = FixedPointOptions { tolerance: 1e-12, max_iterations: 3 };
        let err = fixed_point(vec![C64::new(1.0, 0.0)], &opts, |v| Ok(vec![v[0] * 2.0])).unwrap_err();
        assert!(matches!(err, OddsError::FixedPointFailure { iterations: 3, .. }));
    }

    #[test]
    fn two_dimensional_schemes_preserve_zero_and_stay_finite() {
        let grid = UniformGrid2D {
            x: UniformGrid::new((-1.0, 1.0), 8).unwrap(),
            y: UniformGrid::new((-1.0, 1.0), 6).unwrap(),
        };
        let p = problem(1.0, 0.0, 0.01);
        let (nx, ny) = grid.shape();
        let smm =
            Smm2D::new(p, Boundary2D::zero(), grid.clone(), SolverOptions::default(), FixedPointOptions::default())
                .unwrap();
        let fd =
            Fdscn2D::new(p, Boundary2D::zero(), grid.clone(), SolverOptions::default(), FixedPointOptions::default())
                .unwrap();
        let mut zero = vec![C64::new(0.0, 0.0); nx * ny];
        smm.step(&mut zero, 0.0, None).unwrap();
        fd.step(&mut zero, 0.0, None).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
        let mut u: Vec<C64> = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(1.0, 0.5)
                }
            })
            .collect();
        let mut w = u.clone();
        smm.step(&mut u, 0.0, None).unwrap();
        fd.step(&mut w, 0.0, None).unwrap();
        assert!(u.iter().chain(&w).all(|z| z.norm().is_finite()));
    }
}
