//! Truncated Karhunen–Loève sampling of the Q-Wiener process.
//!
//! 1D: `dW(x) = sum_k sqrt(2/L) k^{-3/2} sin(k pi (x - x_L)/L) xi_k`
//! 2D: `dW(x,y) = sum_{k1,k2} 2/(k1^2+k2^2) / sqrt(Lx Ly) sin(..x..) sin(..y..) xi_{k1,k2}`
//!
//! with `xi ~ N(0, t_to - t_from)` i.i.d. Draws live on a fixed clock of
//! width `base_dt`: every slot has its own ChaCha stream keyed by
//! `(seed, trajectory)` and indexed by the slot number, so the increment
//! over any aligned interval is the sum of its slots regardless of the
//! order in which intervals are requested.

use crate::error::{OddsError, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// `sin(k pi s)` for `s` in `[0, 1]`, evaluated from the nearer end so
/// that both endpoints give exactly zero.
fn end_exact_sine(k: usize, s: f64) -> f64 {
    if s <= 0.5 {
        (k as f64 * PI * s).sin()
    } else {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sign * (k as f64 * PI * (1.0 - s)).sin()
    }
}

fn check_grid(domain: (f64, f64), grid: &[f64]) -> Result<f64> {
    let (lo, hi) = domain;
    if !(hi > lo) {
        return Err(OddsError::InvalidParameter(format!("noise domain [{lo}, {hi}] is empty")));
    }
    let slack = 1e-12 * (hi - lo);
    if let Some(x) = grid.iter().find(|&&x| !(x >= lo - slack && x <= hi + slack)) {
        return Err(OddsError::InvalidParameter(format!("grid point {x} outside noise domain [{lo}, {hi}]")));
    }
    Ok(hi - lo)
}

/// Anything that turns one vector of mode coefficients into nodal values.
pub trait QWienerField: Send + Sync {
    fn modes(&self) -> usize;
    fn grid_len(&self) -> usize;
    /// `out_j = sum_k sqrt(eta_k) e_k(x_j) xi_k`
    fn synthesize(&self, xi: &[f64], out: &mut [f64]);
    /// Pointwise variance per unit time, `sum_k eta_k e_k(x_j)^2`.
    fn variance(&self) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct NoiseModel1D {
    domain: (f64, f64),
    modes: usize,
    grid_len: usize,
    /// Row-major `grid_len x modes`: `sqrt(eta_k) e_k(x_j)`.
    basis: Vec<f64>,
}

impl NoiseModel1D {
    pub fn new(domain: (f64, f64), modes: usize, grid: &[f64]) -> Result<Self> {
        if modes == 0 {
            return Err(OddsError::InvalidParameter("noise needs at least one mode".into()));
        }
        let length = check_grid(domain, grid)?;
        let amp = (2.0 / length).sqrt();
        let mut basis = Vec::with_capacity(grid.len() * modes);
        for &x in grid {
            let s = ((x - domain.0) / length).clamp(0.0, 1.0);
            for k in 1..=modes {
                basis.push(Self::eigenvalue(k).sqrt() * amp * end_exact_sine(k, s));
            }
        }
        Ok(NoiseModel1D { domain, modes, grid_len: grid.len(), basis })
    }

    pub fn eigenvalue(k: usize) -> f64 {
        1.0 / (k as f64).powi(3)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

impl QWienerField for NoiseModel1D {
    fn modes(&self) -> usize {
        self.modes
    }

    fn grid_len(&self) -> usize {
        self.grid_len
    }

    fn synthesize(&self, xi: &[f64], out: &mut [f64]) {
        for (row, o) in self.basis.chunks_exact(self.modes).zip(out.iter_mut()) {
            *o = row.iter().zip(xi).map(|(b, z)| b * z).sum();
        }
    }

    fn variance(&self) -> Vec<f64> {
        self.basis.chunks_exact(self.modes).map(|row| row.iter().map(|b| b * b).sum()).collect()
    }
}

/// Tensor-grid model; field values are stored row-major with `x` fastest.
#[derive(Debug, Clone)]
pub struct NoiseModel2D {
    modes_per_axis: usize,
    nx: usize,
    ny: usize,
    /// `nx x K` sines in x.
    sin_x: Vec<f64>,
    /// `ny x K` sines in y.
    sin_y: Vec<f64>,
    /// `K x K` amplitudes `2/(k1^2+k2^2)/sqrt(Lx Ly)`, index `k1 * K + k2`.
    amplitude: Vec<f64>,
}

impl NoiseModel2D {
    pub fn new(
        x_domain: (f64, f64),
        y_domain: (f64, f64),
        modes_per_axis: usize,
        x_grid: &[f64],
        y_grid: &[f64],
    ) -> Result<Self> {
        if modes_per_axis == 0 {
            return Err(OddsError::InvalidParameter("noise needs at least one mode".into()));
        }
        let lx = check_grid(x_domain, x_grid)?;
        let ly = check_grid(y_domain, y_grid)?;
        let sines = |grid: &[f64], lo: f64, len: f64| -> Vec<f64> {
            grid.iter()
                .flat_map(|&x| {
                    let s = ((x - lo) / len).clamp(0.0, 1.0);
                    (1..=modes_per_axis).map(move |k| end_exact_sine(k, s))
                })
                .collect()
        };
        let norm = 1.0 / (lx * ly).sqrt();
        let mut amplitude = Vec::with_capacity(modes_per_axis * modes_per_axis);
        for k1 in 1..=modes_per_axis {
            for k2 in 1..=modes_per_axis {
                amplitude.push(2.0 * Self::eigenvalue(k1, k2).sqrt() * norm);
            }
        }
        Ok(NoiseModel2D {
            modes_per_axis,
            nx: x_grid.len(),
            ny: y_grid.len(),
            sin_x: sines(x_grid, x_domain.0, lx),
            sin_y: sines(y_grid, y_domain.0, ly),
            amplitude,
        })
    }

    pub fn eigenvalue(k1: usize, k2: usize) -> f64 {
        let s = (k1 * k1 + k2 * k2) as f64;
        1.0 / (s * s)
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
}

impl QWienerField for NoiseModel2D {
    fn modes(&self) -> usize {
        self.modes_per_axis * self.modes_per_axis
    }

    fn grid_len(&self) -> usize {
        self.nx * self.ny
    }

    fn synthesize(&self, xi: &[f64], out: &mut [f64]) {
        let k = self.modes_per_axis;
        // t[k1][j] = sum_k2 a[k1][k2] xi[k1][k2] sin_y[j][k2]
        let mut t = vec![0.0; k * self.ny];
        for k1 in 0..k {
            let coeff: Vec<f64> = (0..k).map(|k2| self.amplitude[k1 * k + k2] * xi[k1 * k + k2]).collect();
            for j in 0..self.ny {
                let sy = &self.sin_y[j * k..(j + 1) * k];
                t[k1 * self.ny + j] = sy.iter().zip(&coeff).map(|(a, b)| a * b).sum();
            }
        }
        for j in 0..self.ny {
            for i in 0..self.nx {
                let sx = &self.sin_x[i * k..(i + 1) * k];
                out[j * self.nx + i] = sx.iter().enumerate().map(|(k1, s)| s * t[k1 * self.ny + j]).sum();
            }
        }
    }

    fn variance(&self) -> Vec<f64> {
        let k = self.modes_per_axis;
        let mut out = vec![0.0; self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let mut v = 0.0;
                for k1 in 0..k {
                    for k2 in 0..k {
                        let e = self.amplitude[k1 * k + k2] * self.sin_x[i * k + k1] * self.sin_y[j * k + k2];
                        v += e * e;
                    }
                }
                out[j * self.nx + i] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub values: Vec<f64>,
    pub t_from: f64,
    pub t_to: f64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha key for one trajectory.
pub fn trajectory_key(seed: u64, trajectory: u64) -> [u8; 32] {
    let mut state = seed ^ splitmix64(&mut trajectory.wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// One trajectory's Brownian path, sampled lazily on a fixed slot clock.
pub struct NoisePath<'a> {
    field: &'a dyn QWienerField,
    key: [u8; 32],
    base_dt: f64,
    slots_drawn: u64,
}

impl<'a> NoisePath<'a> {
    pub fn new(field: &'a dyn QWienerField, seed: u64, trajectory: u64, base_dt: f64) -> Result<Self> {
        if !(base_dt > 0.0 && base_dt.is_finite()) {
            return Err(OddsError::InvalidParameter(format!("noise clock width must be positive, got {base_dt}")));
        }
        Ok(NoisePath { field, key: trajectory_key(seed, trajectory), base_dt, slots_drawn: 0 })
    }

    pub fn base_dt(&self) -> f64 {
        self.base_dt
    }

    /// Number of clock slots drawn so far.
    pub fn slots_drawn(&self) -> u64 {
        self.slots_drawn
    }

    fn slot_of(&self, t: f64) -> Result<u64> {
        let s = t / self.base_dt;
        let r = s.round();
        if r < 0.0 || (s - r).abs() > 1e-6 {
            return Err(OddsError::Precondition(format!(
                "time {t} is not on the noise clock of width {}",
                self.base_dt
            )));
        }
        Ok(r as u64)
    }

    /// Standard-normal mode coefficients for one slot, unscaled.
    pub fn slot_normals(&mut self, slot: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(slot);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        self.slots_drawn += 1;
    }

    /// Mode coefficients `xi_k` of `W(t_to) - W(t_from)`.
    pub fn coefficients(&mut self, t_from: f64, t_to: f64) -> Result<Vec<f64>> {
        if !(t_to > t_from) {
            return Err(OddsError::Precondition(format!("increment interval ({t_from}, {t_to}] is empty")));
        }
        let (a, b) = (self.slot_of(t_from)?, self.slot_of(t_to)?);
        if b <= a {
            return Err(OddsError::Precondition(format!("interval ({t_from}, {t_to}] is shorter than one noise slot")));
        }
        let modes = self.field.modes();
        let mut xi = vec![0.0; modes];
        let mut slot = vec![0.0; modes];
        for s in a..b {
            self.slot_normals(s, &mut slot);
            for (x, z) in xi.iter_mut().zip(&slot) {
                *x += z;
            }
        }
        let scale = self.base_dt.sqrt();
        xi.iter_mut().for_each(|x| *x *= scale);
        Ok(xi)
    }

    pub fn increment(&mut self, t_from: f64, t_to: f64) -> Result<WienerIncrement> {
        let xi = self.coefficients(t_from, t_to)?;
        let mut values = vec![0.0; self.field.grid_len()];
        self.field.synthesize(&xi, &mut values);
        Ok(WienerIncrement { values, t_from, t_to })
    }
}

pub fn sample_increment(path: &mut NoisePath<'_>, t_from: f64, t_to: f64) -> Result<WienerIncrement> {
    path.increment(t_from, t_to)
}
