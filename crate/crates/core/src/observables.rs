//! Charge, energy, averaged-energy fits, strong errors and order fits.

use crate::error::{ensure_len, OddsError, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{assemble_global, OverlapMesh1D};
use num_complex::Complex64 as C64;

/// Quadrature weights and a discrete gradient on a fixed grid.
pub trait Quadrature: Send + Sync {
    fn weights(&self) -> &[f64];
    /// `|grad u|^2` at every node.
    fn gradient_norm_sq(&self, u: &[C64]) -> Vec<f64>;
}

/// Trapezoid weights on a strictly increasing node set.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { nodes[0] } else { nodes[i - 1] };
            let hi = if i + 1 == n { nodes[n - 1] } else { nodes[i + 1] };
            0.5 * (hi - lo)
        })
        .collect()
}

pub(crate) fn apply_complex(m: &CsrMatrix, u: &[C64]) -> Vec<C64> {
    (0..m.rows()).map(|i| m.row(i).map(|(j, v)| u[j] * v).sum()).collect()
}

/// Trapezoid rule plus a first-derivative matrix on a 1D grid.
#[derive(Debug, Clone)]
pub struct LineQuadrature {
    weights: Vec<f64>,
    d1: CsrMatrix,
}

impl LineQuadrature {
    pub fn new(nodes: &[f64], d1: CsrMatrix) -> Result<Self> {
        ensure_len(nodes.len(), d1.rows())?;
        ensure_len(nodes.len(), d1.cols())?;
        Ok(LineQuadrature { weights: trapezoid_weights(nodes), d1 })
    }

    pub fn from_mesh(mesh: &OverlapMesh1D) -> Result<Self> {
        let d1 = assemble_global(mesh, 1)?;
        Self::new(mesh.nodes(), d1.matrix().clone())
    }

    pub fn derivative(&self) -> &CsrMatrix {
        &self.d1
    }
}

impl Quadrature for LineQuadrature {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn gradient_norm_sq(&self, u: &[C64]) -> Vec<f64> {
        apply_complex(&self.d1, u).iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Tensor-product trapezoid rule; fields are row-major with `x` fastest.
#[derive(Debug, Clone)]
pub struct TensorQuadrature2D {
    nx: usize,
    ny: usize,
    weights: Vec<f64>,
    dx: CsrMatrix,
    dy: CsrMatrix,
}

impl TensorQuadrature2D {
    pub fn new(x: &LineQuadrature, y: &LineQuadrature) -> Self {
        let (nx, ny) = (x.weights.len(), y.weights.len());
        let mut weights = Vec::with_capacity(nx * ny);
        for wy in &y.weights {
            weights.extend(x.weights.iter().map(|wx| wx * wy));
        }
        TensorQuadrature2D { nx, ny, weights, dx: x.d1.clone(), dy: y.d1.clone() }
    }

    pub fn from_meshes(x: &OverlapMesh1D, y: &OverlapMesh1D) -> Result<Self> {
        Ok(Self::new(&LineQuadrature::from_mesh(x)?, &LineQuadrature::from_mesh(y)?))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
}

impl Quadrature for TensorQuadrature2D {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn gradient_norm_sq(&self, u: &[C64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            let ux = apply_complex(&self.dx, &u[j * nx..(j + 1) * nx]);
            for (i, z) in ux.iter().enumerate() {
                out[j * nx + i] = z.norm_sqr();
            }
        }
        let mut col = vec![C64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for (j, c) in col.iter_mut().enumerate() {
                *c = u[j * nx + i];
            }
            for (j, z) in apply_complex(&self.dy, &col).iter().enumerate() {
                out[j * nx + i] += z.norm_sqr();
            }
        }
        out
    }
}

/// `sum_j w_j |u_j|^2`
pub fn discrete_charge(u: &[C64], quad: &dyn Quadrature) -> f64 {
    u.iter().zip(quad.weights()).map(|(z, w)| w * z.norm_sqr()).sum()
}

/// `H(u) = 1/2 int |grad u|^2 - 1/4 int |u|^4`
pub fn discrete_energy(u: &[C64], quad: &dyn Quadrature) -> f64 {
    let g = quad.gradient_norm_sq(u);
    u.iter().zip(&g).zip(quad.weights()).map(|((z, g), w)| w * (0.5 * g - 0.25 * z.norm_sqr() * z.norm_sqr())).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub trajectory: u64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn validate(&self) -> Result<()> {
        ensure_len(self.times.len(), self.values.len())?;
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OddsError::Precondition("series times must increase".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(OddsError::Precondition("series has non-finite values".into()));
        }
        Ok(())
    }

    /// `max_t |v(t) - v(0)| / |v(0)|`
    pub fn relative_drift(&self) -> f64 {
        let v0 = self.values.first().copied().unwrap_or(0.0);
        self.values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max) / v0.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    ensure_len(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(OddsError::Precondition("a line fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(OddsError::Precondition("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Pointwise mean over trajectories, summed in trajectory order.
pub fn trajectory_mean(series: &[ObservableSeries]) -> Result<ObservableSeries> {
    let first = series.first().ok_or_else(|| OddsError::Precondition("no trajectories to average".into()))?;
    let mut sorted: Vec<&ObservableSeries> = series.iter().collect();
    sorted.sort_by_key(|s| s.trajectory);
    let mut values = vec![0.0; first.times.len()];
    for s in &sorted {
        s.validate()?;
        if s.times != first.times {
            return Err(OddsError::Precondition(format!("trajectory {} has a different time grid", s.trajectory)));
        }
        values.iter_mut().zip(&s.values).for_each(|(a, v)| *a += v);
    }
    let p = series.len() as f64;
    values.iter_mut().for_each(|v| *v /= p);
    Ok(ObservableSeries { trajectory: u64::MAX, times: first.times.clone(), values })
}

/// Least-squares line through the trajectory-averaged energy.
pub fn averaged_energy_growth(series: &[ObservableSeries]) -> Result<LinearFit> {
    let mean = trajectory_mean(series)?;
    if mean.times.len() < 2 {
        return Err(OddsError::Precondition("energy growth needs at least two time points".into()));
    }
    fit_line(&mean.times, &mean.values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub trajectory: u64,
    pub values: Vec<C64>,
}

/// `sqrt(1/P sum_p sum_j w_j |u_p - v_p|^2)` over trajectories paired by id.
pub fn mean_square_error(coarse: &[Terminal], reference: &[Terminal], weights: &[f64]) -> Result<f64> {
    if coarse.is_empty() {
        return Err(OddsError::Precondition("no trajectories to compare".into()));
    }
    ensure_len(reference.len(), coarse.len())?;
    let mut acc = 0.0;
    for (c, r) in coarse.iter().zip(reference) {
        if c.trajectory != r.trajectory {
            return Err(OddsError::Precondition(format!(
                "trajectory {} paired with reference trajectory {}",
                c.trajectory, r.trajectory
            )));
        }
        ensure_len(weights.len(), c.values.len())?;
        ensure_len(weights.len(), r.values.len())?;
        acc += c.values.iter().zip(&r.values).zip(weights).map(|((a, b), w)| w * (a - b).norm_sqr()).sum::<f64>();
    }
    Ok((acc / coarse.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    /// `log(E_i / E_{i+1}) / log(tau_i / tau_{i+1})`, one per refinement.
    pub per_level: Vec<f64>,
    /// Slope of `log E` against `log tau`.
    pub global: f64,
}

pub fn fit_order(table: &ErrorTable) -> Result<OrderFit> {
    ensure_len(table.taus.len(), table.errors.len())?;
    if table.taus.len() < 2 {
        return Err(OddsError::Precondition("order fit needs at least two rows".into()));
    }
    if table.taus.windows(2).any(|w| !(w[1] < w[0])) || table.taus.iter().any(|t| !(*t > 0.0)) {
        return Err(OddsError::Precondition("step sizes must be positive and strictly decreasing".into()));
    }
    if let Some(e) = table.errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(OddsError::Precondition(format!("errors must be positive for an order fit, got {e}")));
    }
    let per_level = table
        .taus
        .windows(2)
        .zip(table.errors.windows(2))
        .map(|(t, e)| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        .collect();
    let lt: Vec<f64> = table.taus.iter().map(|t| t.ln()).collect();
    let le: Vec<f64> = table.errors.iter().map(|e| e.ln()).collect();
    let global = fit_line(&lt, &le)?.slope;
    Ok(OrderFit { per_level, global })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn uniform(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let w = trapezoid_weights(&[0.0, 0.1, 0.5, 1.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], 0.05);
    }

    #[test]
    fn charge_of_constants_and_sine() {
        let mesh = build_mesh((0.0, 1.0), 4, 8).unwrap();
        let q = LineQuadrature::from_mesh(&mesh).unwrap();
        let ones = vec![C64::new(1.0, 0.0); mesh.len()];
        assert!((discrete_charge(&ones, &q) - 1.0).abs() < 1e-14);
        let zeros = vec![C64::new(0.0, 0.0); mesh.len()];
        assert_eq!(discrete_charge(&zeros, &q), 0.0);
        assert_eq!(discrete_energy(&zeros, &q), 0.0);

        let fine = build_mesh((0.0, 1.0), 20, 16).unwrap();
        let qf = LineQuadrature::from_mesh(&fine).unwrap();
        let s: Vec<C64> = fine.nodes().iter().map(|x| C64::new((std::f64::consts::PI * x).sin(), 0.0)).collect();
        assert!((discrete_charge(&s, &qf) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn energy_of_constant_and_plane_wave() {
        let mesh = build_mesh((0.0, 1.0), 3, 6).unwrap();
        let q = LineQuadrature::from_mesh(&mesh).unwrap();
        let c = C64::new(0.6, -0.8) * 1.5;
        let u = vec![c; mesh.len()];
        let expected = -0.25 * c.norm_sqr() * c.norm_sqr();
        assert!((discrete_energy(&u, &q) - expected).abs() < 1e-10);

        let two_pi = 2.0 * std::f64::consts::PI;
        let mesh = build_mesh((0.0, two_pi), 16, 16).unwrap();
        let q = LineQuadrature::from_mesh(&mesh).unwrap();
        let u: Vec<C64> = mesh.nodes().iter().map(|x| C64::new(0.0, *x).exp()).collect();
        assert!((discrete_energy(&u, &q) - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn tensor_quadrature_integrates_products() {
        let mx = build_mesh((0.0, 2.0), 2, 6).unwrap();
        let my = build_mesh((-1.0, 1.0), 3, 5).unwrap();
        let q = TensorQuadrature2D::from_meshes(&mx, &my).unwrap();
        let ones = vec![C64::new(1.0, 0.0); mx.len() * my.len()];
        assert!((discrete_charge(&ones, &q) - 4.0).abs() < 1e-13);
        // u = x + 2 i y has |grad u|^2 = 1 + 4.
        let mut u = Vec::new();
        for y in my.nodes() {
            for x in mx.nodes() {
                u.push(C64::new(*x, 2.0 * y));
            }
        }
        for g in q.gradient_norm_sq(&u) {
            assert!((g - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_line_fit() {
        let t = uniform(11, 0.0, 2.0);
        let h: Vec<f64> = t.iter().map(|t| 1.0 + 3.0 * t).collect();
        let fit = fit_line(&t, &h).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-13);
        assert!((fit.intercept - 1.0).abs() < 1e-13);
        assert!((fit.r_squared - 1.0).abs() < 1e-13);
        assert!(fit_line(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn averaged_growth_over_trajectories() {
        let times = uniform(5, 0.0, 1.0);
        let series: Vec<ObservableSeries> = (0..3)
            .map(|p| ObservableSeries {
                trajectory: p,
                times: times.clone(),
                values: times.iter().map(|t| p as f64 + 2.0 * t).collect(),
            })
            .collect();
        let fit = averaged_energy_growth(&series).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-13);
        assert!((fit.intercept - 1.0).abs() < 1e-13);
        let short = ObservableSeries { trajectory: 0, times: vec![0.0], values: vec![1.0] };
        assert!(averaged_energy_growth(&[short]).is_err());
    }

    #[test]
    fn mean_square_error_cases() {
        let w = vec![0.5, 1.0, 0.5];
        let a = Terminal { trajectory: 3, values: vec![C64::new(1.0, 2.0); 3] };
        assert_eq!(mean_square_error(&[a.clone()], &[a.clone()], &w).unwrap(), 0.0);
        let delta = C64::new(0.3, -0.4);
        let b = Terminal { trajectory: 3, values: a.values.iter().map(|v| v + delta).collect() };
        let err = mean_square_error(&[b.clone()], &[a.clone()], &w).unwrap();
        assert!((err - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        let other = Terminal { trajectory: 4, ..a.clone() };
        assert!(mean_square_error(&[b], &[other], &w).is_err());
    }

    #[test]
    fn order_fit_on_power_laws() {
        let taus: Vec<f64> = (4..10).map(|k| 2f64.powi(-k)).collect();
        let lin = ErrorTable { taus: taus.clone(), errors: taus.iter().map(|t| 3.0 * t).collect() };
        let fit = fit_order(&lin).unwrap();
        assert!(fit.per_level.iter().all(|o| (o - 1.0).abs() < 1e-12));
        assert!((fit.global - 1.0).abs() < 1e-12);
        let half = ErrorTable { taus: taus.clone(), errors: taus.iter().map(|t| 0.2 * t.sqrt()).collect() };
        let fit = fit_order(&half).unwrap();
        assert!(fit.per_level.iter().all(|o| (o - 0.5).abs() < 1e-12));
    }

    #[test]
    fn order_fit_on_published_column() {
        let table = ErrorTable {
            taus: (4..10).map(|k| 2f64.powi(-k)).collect(),
            errors: vec![5.1163e-1, 2.6093e-1, 1.2133e-1, 7.0089e-2, 5.2949e-2, 2.7614e-2],
        };
        let fit = fit_order(&table).unwrap();
        let expected = [0.97, 1.10, 0.79, 0.40, 0.93];
        for (o, e) in fit.per_level.iter().zip(expected) {
            assert!((o - e).abs() < 0.01, "{o} vs {e}");
        }
        assert!(fit.global > 0.4 && fit.global < 1.2);
    }

    #[test]
    fn order_fit_rejects_bad_tables() {
        let bad = ErrorTable { taus: vec![0.1, 0.05], errors: vec![1.0, 0.0] };
        assert!(fit_order(&bad).is_err());
        let unsorted = ErrorTable { taus: vec![0.05, 0.1], errors: vec![1.0, 0.5] };
        assert!(fit_order(&unsorted).is_err());
    }
}
