//! Chebyshev–Gauss–Lobatto nodes and spectral differentiation matrices on
//! the reference element `[-1, 1]`.
//!
//! Nodes are stored in ascending order, `eta_j = cos((J - j) pi / J)`, so the
//! first row of every matrix belongs to `-1`. The classical descending-order
//! formulas are sign-flipped accordingly. Off-diagonal entries follow the
//! barycentric form
//!
//! ```text
//! D1[i][j] = (w_j / w_i) / (eta_i - eta_j)
//! Dr[i][j] = r / (eta_i - eta_j) * ((w_j / w_i) * D(r-1)[i][i] - D(r-1)[i][j])
//! ```
//!
//! with Lobatto weights `w_j = (-1)^(J-j)`, halved at both ends. Diagonal
//! entries are always the negative sum of the off-diagonal row.

use crate::error::{OddsError, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceNodes {
    degree: usize,
    nodes: Vec<f64>,
}

impl ReferenceNodes {
    pub fn degree(&self) -> usize {
        self.degree
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

    /// Barycentric weights of the Lobatto grid, up to a common factor.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        let j_max = self.degree;
        (0..=j_max)
            .map(|j| {
                let sign = if (j_max - j) % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == j_max {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect()
    }

    /// `eta_i - eta_j` through a product formula, which avoids the
    /// cancellation of subtracting two nearby cosines.
    fn gap(&self, i: usize, j: usize) -> f64 {
        let n = self.degree as f64;
        let (i, j) = (i as f64, j as f64);
        2.0 * (PI * (i + j - n) / (2.0 * n)).cos() * (PI * (i - j) / (2.0 * n)).sin()
    }
}

pub fn reference_nodes(degree: usize) -> Result<ReferenceNodes> {
    if degree == 0 {
        return Err(OddsError::InvalidParameter("Chebyshev degree must be at least 1".into()));
    }
    let n = degree as f64;
    // sin form is exactly odd-symmetric about the midpoint and hits 0 exactly.
    let nodes = (0..=degree).map(|j| (PI * (2.0 * j as f64 - n) / (2.0 * n)).sin()).collect();
    Ok(ReferenceNodes { degree, nodes })
}

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffMatrix {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl DiffMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.dim, "vector length must match matrix size");
        (0..self.dim).map(|i| self.row(i).iter().zip(f).map(|(a, b)| a * b).sum()).collect()
    }

    /// Entry-wise scaled copy, used for the chain rule of the affine map.
    pub fn scaled(&self, factor: f64) -> DiffMatrix {
        DiffMatrix { order: self.order, dim: self.dim, entries: self.entries.iter().map(|v| v * factor).collect() }
    }

    pub fn max_abs_diff(&self, other: &DiffMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Plain matrix product, for comparing `D^(r)` with powers of `D^(1)`.
    pub fn matmul(&self, other: &DiffMatrix) -> DiffMatrix {
        let n = self.dim;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    entries[i * n + j] += a * other.get(k, j);
                }
            }
        }
        DiffMatrix { order: self.order + other.order, dim: n, entries }
    }

    fn fill_diagonal_by_row_sum(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| self.get(i, j)).sum();
            self.entries[i * n + i] = -off;
        }
    }
}

pub fn diff_matrix_first(degree: usize) -> Result<DiffMatrix> {
    let nodes = reference_nodes(degree)?;
    Ok(first_from_nodes(&nodes))
}

fn first_from_nodes(nodes: &ReferenceNodes) -> DiffMatrix {
    let n = nodes.len();
    let w = nodes.barycentric_weights();
    let mut d = DiffMatrix { order: 1, dim: n, entries: vec![0.0; n * n] };
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d.entries[i * n + j] = (w[j] / w[i]) / nodes.gap(i, j);
            }
        }
    }
    d.fill_diagonal_by_row_sum();
    d
}

/// `r`-th derivative matrix via the barycentric recursion.
pub fn diff_matrix_higher(degree: usize, order: usize) -> Result<DiffMatrix> {
    if order == 0 || order > degree {
        return Err(OddsError::InvalidParameter(format!("derivative order {order} must lie in 1..={degree}")));
    }
    let nodes = reference_nodes(degree)?;
    let w = nodes.barycentric_weights();
    let n = nodes.len();
    let mut d = first_from_nodes(&nodes);
    for r in 2..=order {
        let mut next = DiffMatrix { order: r, dim: n, entries: vec![0.0; n * n] };
        for i in 0..n {
            let dii = d.get(i, i);
            for j in 0..n {
                if i != j {
                    next.entries[i * n + j] = r as f64 / nodes.gap(i, j) * ((w[j] / w[i]) * dii - d.get(i, j));
                }
            }
        }
        next.fill_diagonal_by_row_sum();
        d = next;
    }
    Ok(d)
}
