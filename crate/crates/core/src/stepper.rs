//! Lie splitting of the stochastic NLS: the exact nonlinear stochastic phase
//! flow followed by a Crank–Nicolson step for the linear part, in 1D and,
//! through locally one-dimensional sweeps, in 2D.

use crate::error::{ensure_len, OddsError, Result};
use crate::linalg::{BoundaryPair, CnSystem, SolverOptions};
use crate::mesh::{assemble_global, build_mesh, split_interior_boundary, OverlapMesh1D};
use crate::noise::{NoisePath, WienerIncrement};
use crate::observables::{LineQuadrature, Quadrature, TensorQuadrature2D};
use num_complex::Complex64 as C64;
use std::sync::Arc;

/// Dirichlet data `t -> u(t, end)`.
pub type TimeFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
/// Dirichlet data `(t, s) -> u` along one side of a rectangle.
pub type SideFn = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct Boundary1D {
    pub left: TimeFn,
    pub right: TimeFn,
}

impl Boundary1D {
    pub fn zero() -> Self {
        let z: TimeFn = Arc::new(|_| C64::new(0.0, 0.0));
        Boundary1D { left: z.clone(), right: z }
    }

    pub fn pair(&self, t_old: f64, t_new: f64) -> BoundaryPair {
        BoundaryPair {
            left_old: (self.left)(t_old),
            left_new: (self.left)(t_new),
            right_old: (self.right)(t_old),
            right_new: (self.right)(t_new),
        }
    }
}

/// `x_left(t, y)`, `x_right(t, y)`, `y_bottom(t, x)`, `y_top(t, x)`.
#[derive(Clone)]
pub struct Boundary2D {
    pub x_left: SideFn,
    pub x_right: SideFn,
    pub y_bottom: SideFn,
    pub y_top: SideFn,
}

impl Boundary2D {
    pub fn zero() -> Self {
        let z: SideFn = Arc::new(|_, _| C64::new(0.0, 0.0));
        Boundary2D { x_left: z.clone(), x_right: z.clone(), y_bottom: z.clone(), y_top: z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub lambda: f64,
    pub eps: f64,
    pub tau: f64,
    pub final_time: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OddsError::InvalidParameter(msg));
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("noise amplitude must be >= 0, got {}", self.eps));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("time step must be positive, got {}", self.tau));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad(format!("final time must be positive, got {}", self.final_time));
        }
        let ratio = self.final_time / self.tau;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("final time {} is not a whole number of steps of {}", self.final_time, self.tau));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.final_time / self.tau).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub values: Vec<C64>,
    pub time: f64,
}

/// Tensor-grid state, row-major with `x` fastest: `values[j * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField2D {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<C64>,
    pub time: f64,
}

/// `u_j <- exp(-i (tau lambda |u_j|^2 + eps dW_j)) u_j`
pub fn nonlinear_flow(values: &mut [C64], tau: f64, lambda: f64, eps: f64, dw: Option<&[f64]>) -> Result<()> {
    match dw {
        Some(dw) => {
            ensure_len(values.len(), dw.len())?;
            for (u, w) in values.iter_mut().zip(dw) {
                let theta = tau * lambda * u.norm_sqr() + eps * w;
                *u *= C64::new(theta.cos(), -theta.sin());
            }
        }
        None => {
            for u in values.iter_mut() {
                let theta = tau * lambda * u.norm_sqr();
                *u *= C64::new(theta.cos(), -theta.sin());
            }
        }
    }
    Ok(())
}

/// One Lie step on an overlapping-element grid.
pub fn odds_step_1d(
    state: &mut StateField,
    problem: &ProblemSpec,
    boundary: &Boundary1D,
    system: &CnSystem,
    dw: Option<&WienerIncrement>,
    opts: &SolverOptions,
) -> Result<()> {
    let n = state.values.len();
    ensure_len(system.interior_len() + 2, n)?;
    let tau = system.tau();
    nonlinear_flow(&mut state.values, tau, problem.lambda, problem.eps, dw.map(|w| w.values.as_slice()))?;
    let t_new = state.time + tau;
    // The linear sub-step starts from the flowed state, boundary slots included.
    let bc =
        BoundaryPair { left_old: state.values[0], right_old: state.values[n - 1], ..boundary.pair(state.time, t_new) };
    system.step_interior(&mut state.values[1..n - 1], &bc, opts)?;
    state.values[0] = bc.left_new;
    state.values[n - 1] = bc.right_new;
    state.time = t_new;
    Ok(())
}

fn refresh_boundary_2d(state: &mut StateField2D, xs: &[f64], ys: &[f64], bc: &Boundary2D, t: f64) {
    let (nx, ny) = (state.nx, state.ny);
    for (i, &x) in xs.iter().enumerate() {
        state.values[i] = (bc.y_bottom)(t, x);
        state.values[(ny - 1) * nx + i] = (bc.y_top)(t, x);
    }
    for (j, &y) in ys.iter().enumerate() {
        state.values[j * nx] = (bc.x_left)(t, y);
        state.values[j * nx + nx - 1] = (bc.x_right)(t, y);
    }
}

/// The two 1D systems of a tensor grid plus node coordinates.
pub struct LodSystems<'a> {
    pub x_nodes: &'a [f64],
    pub y_nodes: &'a [f64],
    pub x: &'a CnSystem,
    pub y: &'a CnSystem,
}

/// One step of the 2D scheme: nonlinear flow on the whole grid, then a CN
/// sweep along every interior row, then along every interior column.
pub fn odds_step_2d(
    state: &mut StateField2D,
    problem: &ProblemSpec,
    boundary: &Boundary2D,
    systems: &LodSystems<'_>,
    dw: Option<&WienerIncrement>,
    opts: &SolverOptions,
) -> Result<()> {
    let (nx, ny) = (state.nx, state.ny);
    ensure_len(systems.x_nodes.len(), nx)?;
    ensure_len(systems.y_nodes.len(), ny)?;
    ensure_len(systems.x.interior_len() + 2, nx)?;
    ensure_len(systems.y.interior_len() + 2, ny)?;
    ensure_len(nx * ny, state.values.len())?;
    let tau = systems.x.tau();
    nonlinear_flow(&mut state.values, tau, problem.lambda, problem.eps, dw.map(|w| w.values.as_slice()))?;
    let t_new = state.time + tau;

    // The x sweep also runs along the bottom and top rows so the y sweep
    // starts from boundary values at the same intermediate stage.
    let mut edges = [state.values[1..nx - 1].to_vec(), state.values[(ny - 1) * nx + 1..ny * nx - 1].to_vec()];
    for j in 0..ny {
        let y = systems.y_nodes[j];
        let bc = BoundaryPair {
            left_old: state.values[j * nx],
            left_new: (boundary.x_left)(t_new, y),
            right_old: state.values[j * nx + nx - 1],
            right_new: (boundary.x_right)(t_new, y),
        };
        let row = match j {
            0 => &mut edges[0][..],
            j if j == ny - 1 => &mut edges[1][..],
            j => &mut state.values[j * nx + 1..(j + 1) * nx - 1],
        };
        systems.x.step_interior(row, &bc, opts)?;
    }
    refresh_boundary_2d(state, systems.x_nodes, systems.y_nodes, boundary, t_new);

    let mut column = vec![C64::new(0.0, 0.0); ny - 2];
    for i in 1..nx - 1 {
        let x = systems.x_nodes[i];
        let bc = BoundaryPair {
            left_old: edges[0][i - 1],
            left_new: (boundary.y_bottom)(t_new, x),
            right_old: edges[1][i - 1],
            right_new: (boundary.y_top)(t_new, x),
        };
        for (j, c) in column.iter_mut().enumerate() {
            *c = state.values[(j + 1) * nx + i];
        }
        systems.y.step_interior(&mut column, &bc, opts)?;
        for (j, c) in column.iter().enumerate() {
            state.values[(j + 1) * nx + i] = *c;
        }
    }
    refresh_boundary_2d(state, systems.x_nodes, systems.y_nodes, boundary, t_new);
    state.time = t_new;
    Ok(())
}

/// A time integrator on a fixed grid, stepping flattened complex states.
pub trait Integrator: Sync {
    fn tau(&self) -> f64;
    fn grid_len(&self) -> usize;
    /// Advances `u` from `t` to `t + tau` using the noise increment `dw`
    /// (`None` means no noise).
    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()>;
    fn quadrature(&self) -> &dyn Quadrature;
}

pub struct Odds1D {
    problem: ProblemSpec,
    boundary: Boundary1D,
    mesh: OverlapMesh1D,
    system: CnSystem,
    quadrature: LineQuadrature,
    opts: SolverOptions,
}

impl Odds1D {
    pub fn new(problem: ProblemSpec, boundary: Boundary1D, mesh: OverlapMesh1D, opts: SolverOptions) -> Result<Self> {
        problem.validate()?;
        opts.validate()?;
        let split = split_interior_boundary(&assemble_global(&mesh, 2)?);
        let system = CnSystem::new(&split, problem.tau)?;
        let quadrature = LineQuadrature::from_mesh(&mesh)?;
        Ok(Odds1D { problem, boundary, mesh, system, quadrature, opts })
    }

    pub fn mesh(&self) -> &OverlapMesh1D {
        &self.mesh
    }

    pub fn system(&self) -> &CnSystem {
        &self.system
    }
}

impl Integrator for Odds1D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        self.mesh.len()
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let mut state = StateField { values: u.to_vec(), time: t };
        let inc = dw.map(|w| WienerIncrement { values: w.to_vec(), t_from: t, t_to: t + self.problem.tau });
        odds_step_1d(&mut state, &self.problem, &self.boundary, &self.system, inc.as_ref(), &self.opts)?;
        u.copy_from_slice(&state.values);
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

pub struct Odds2D {
    problem: ProblemSpec,
    boundary: Boundary2D,
    mesh_x: OverlapMesh1D,
    mesh_y: OverlapMesh1D,
    system_x: CnSystem,
    system_y: CnSystem,
    quadrature: TensorQuadrature2D,
    opts: SolverOptions,
}

impl Odds2D {
    pub fn new(
        problem: ProblemSpec,
        boundary: Boundary2D,
        mesh_x: OverlapMesh1D,
        mesh_y: OverlapMesh1D,
        opts: SolverOptions,
    ) -> Result<Self> {
        problem.validate()?;
        opts.validate()?;
        let sx = split_interior_boundary(&assemble_global(&mesh_x, 2)?);
        let sy = split_interior_boundary(&assemble_global(&mesh_y, 2)?);
        let quadrature = TensorQuadrature2D::from_meshes(&mesh_x, &mesh_y)?;
        Ok(Odds2D {
            problem,
            boundary,
            system_x: CnSystem::new(&sx, problem.tau)?,
            system_y: CnSystem::new(&sy, problem.tau)?,
            mesh_x,
            mesh_y,
            quadrature,
            opts,
        })
    }

    /// Square tensor mesh with the same partition on both axes.
    pub fn square(
        problem: ProblemSpec,
        boundary: Boundary2D,
        domain: (f64, f64),
        elements: usize,
        degree: usize,
        opts: SolverOptions,
    ) -> Result<Self> {
        let mesh = build_mesh(domain, elements, degree)?;
        Self::new(problem, boundary, mesh.clone(), mesh, opts)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mesh_x.len(), self.mesh_y.len())
    }

    pub fn mesh_x(&self) -> &OverlapMesh1D {
        &self.mesh_x
    }

    pub fn mesh_y(&self) -> &OverlapMesh1D {
        &self.mesh_y
    }

    pub fn systems(&self) -> LodSystems<'_> {
        LodSystems { x_nodes: self.mesh_x.nodes(), y_nodes: self.mesh_y.nodes(), x: &self.system_x, y: &self.system_y }
    }
}

impl Integrator for Odds2D {
    fn tau(&self) -> f64 {
        self.problem.tau
    }

    fn grid_len(&self) -> usize {
        self.mesh_x.len() * self.mesh_y.len()
    }

    fn step(&self, u: &mut [C64], t: f64, dw: Option<&[f64]>) -> Result<()> {
        let (nx, ny) = self.shape();
        let mut state = StateField2D { nx, ny, values: u.to_vec(), time: t };
        let inc = dw.map(|w| WienerIncrement { values: w.to_vec(), t_from: t, t_to: t + self.problem.tau });
        odds_step_2d(&mut state, &self.problem, &self.boundary, &self.systems(), inc.as_ref(), &self.opts)?;
        u.copy_from_slice(&state.values);
        Ok(())
    }

    fn quadrature(&self) -> &dyn Quadrature {
        &self.quadrature
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory: u64,
    /// Times at which charge and energy were recorded.
    pub times: Vec<f64>,
    pub charge: Vec<f64>,
    pub energy: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub snapshot_times: Vec<f64>,
    /// Record observables every this many steps (and at the final time);
    /// zero disables the series.
    pub observe_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshot_times: Vec::new(), observe_every: 1 }
    }
}

fn snapshot_steps(times: &[f64], tau: f64, steps: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let s = t / tau;
        let n = s.round();
        if !(n >= 0.0) || (s - n).abs() > 1e-6 || n as usize > steps {
            return Err(OddsError::InvalidParameter(format!(
                "snapshot time {t} is not a step time in [0, {}]",
                steps as f64 * tau
            )));
        }
        out.push(n as usize);
    }
    Ok(out)
}

/// Runs `problem.steps()` steps from `initial`. With `eps == 0` the noise
/// path is never touched.
pub fn run_trajectory(
    integrator: &dyn Integrator,
    problem: &ProblemSpec,
    initial: Vec<C64>,
    mut noise: Option<&mut NoisePath<'_>>,
    trajectory: u64,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    problem.validate()?;
    ensure_len(integrator.grid_len(), initial.len())?;
    let tau = integrator.tau();
    if (tau - problem.tau).abs() > 1e-15 * tau {
        return Err(OddsError::InvalidParameter(format!(
            "integrator step {tau} differs from problem step {}",
            problem.tau
        )));
    }
    let steps = problem.steps();
    let snap_at = snapshot_steps(&opts.snapshot_times, tau, steps)?;
    let noisy = problem.eps != 0.0;
    if noisy && noise.is_none() {
        return Err(OddsError::Precondition("noise amplitude is positive but no noise path was given".into()));
    }

    let quad = integrator.quadrature();
    let mut rec = TrajectoryRecord {
        trajectory,
        times: Vec::new(),
        charge: Vec::new(),
        energy: Vec::new(),
        snapshots: Vec::new(),
        final_state: Vec::new(),
    };
    let mut u = initial;
    let observe = |n: usize, u: &[C64], rec: &mut TrajectoryRecord| {
        let t = n as f64 * tau;
        if opts.observe_every > 0 && (n % opts.observe_every == 0 || n == steps) {
            rec.times.push(t);
            rec.charge.push(crate::observables::discrete_charge(u, quad));
            rec.energy.push(crate::observables::discrete_energy(u, quad));
        }
        for (k, &s) in snap_at.iter().enumerate() {
            if s == n {
                rec.snapshots.push(Snapshot { time: opts.snapshot_times[k], values: u.to_vec() });
            }
        }
    };
    observe(0, &u, &mut rec);
    for n in 0..steps {
        let t = n as f64 * tau;
        let dw = if noisy {
            let path = noise.as_deref_mut().expect("checked above");
            Some(path.increment(t, t + tau).map_err(|e| e.at_step(n))?)
        } else {
            None
        };
        integrator.step(&mut u, t, dw.as_ref().map(|w| w.values.as_slice())).map_err(|e| e.at_step(n))?;
        if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(OddsError::SolverFailure { residual: f64::NAN, restarts: 0 }.at_step(n));
        }
        observe(n + 1, &u, &mut rec);
    }
    rec.final_state = u;
    Ok(rec)
}
