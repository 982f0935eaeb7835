//! Overlapping element partition of an interval and the assembled global
//! differentiation matrices.
//!
//! Consecutive elements share two nodes: the last two Lobatto nodes of
//! element `m` are the first two of element `m + 1`. All elements have the
//! same width `dx`, and element `m` (0-based) starts at
//! `x_L + m * dx * (1 + cos(pi/J)) / 2`. Local node `j` of element `m` has
//! global index `m (J - 1) + j`, giving `M (J - 1) + 2` global nodes.

use crate::chebyshev::{diff_matrix_higher, reference_nodes};
use crate::error::{OddsError, Result};
use crate::linalg::CsrMatrix;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMesh1D {
    x_left: f64,
    x_right: f64,
    elements: usize,
    degree: usize,
    dx: f64,
    shift: f64,
    nodes: Vec<f64>,
}

/// Element width from the overlap constraint.
pub fn element_width(domain: (f64, f64), elements: usize, degree: usize) -> f64 {
    let (xl, xr) = domain;
    let m = elements as f64;
    (xr - xl) / (m + (1.0 - m) * (1.0 - (PI / degree as f64).cos()) / 2.0)
}

pub fn build_mesh(domain: (f64, f64), elements: usize, degree: usize) -> Result<OverlapMesh1D> {
    let (xl, xr) = domain;
    if !(xl.is_finite() && xr.is_finite() && xr > xl) {
        return Err(OddsError::InvalidParameter(format!("domain [{xl}, {xr}] must be a finite, non-empty interval")));
    }
    if elements == 0 || degree < 2 {
        return Err(OddsError::InvalidParameter(format!(
            "need at least one element of degree >= 2 (got M={elements}, J={degree})"
        )));
    }
    let count = elements * (degree - 1) + 2;
    if count < 3 {
        return Err(OddsError::InvalidParameter("mesh has no interior node".into()));
    }

    let dx = element_width(domain, elements, degree);
    let shift = dx * (1.0 + (PI / degree as f64).cos()) / 2.0;
    let eta = reference_nodes(degree)?;
    let mut nodes = vec![0.0; count];
    nodes[0] = xl;
    for m in 0..elements {
        let base = m * (degree - 1);
        // Nodes 0 and 1 of later elements were already placed by the
        // previous element; keep them bit-identical.
        let start = nodes[base];
        let first_new = if m == 0 { 1 } else { 2 };
        for j in first_new..=degree {
            nodes[base + j] = start + 0.5 * dx * (1.0 + eta.nodes()[j]);
        }
    }
    nodes[count - 1] = xr;

    Ok(OverlapMesh1D { x_left: xl, x_right: xr, elements, degree, dx, shift, nodes })
}

impl OverlapMesh1D {
    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Offset between the left ends of consecutive elements.
    pub fn shift(&self) -> f64 {
        self.shift
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

    pub fn interior_len(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn to_global(&self, element: usize, local: usize) -> usize {
        debug_assert!(element < self.elements && local <= self.degree);
        element * (self.degree - 1) + local
    }

    pub fn element_nodes(&self, element: usize) -> &[f64] {
        let base = self.to_global(element, 0);
        &self.nodes[base..=base + self.degree]
    }

    /// `[x_L^m, x_R^m]`, read off the shared node storage.
    pub fn element_bounds(&self, element: usize) -> (f64, f64) {
        let nodes = self.element_nodes(element);
        (nodes[0], nodes[self.degree])
    }

    /// Maps a physical point of element `m` to `[-1, 1]`.
    pub fn affine_to_reference(&self, element: usize, y: f64) -> Result<f64> {
        if element >= self.elements {
            return Err(OddsError::InvalidParameter(format!("element {element} out of range 0..{}", self.elements)));
        }
        let (lo, hi) = self.element_bounds(element);
        let slack = 1e-12 * (hi - lo);
        if !(y >= lo - slack && y <= hi + slack) {
            return Err(OddsError::Precondition(format!("point {y} lies outside element {element} = [{lo}, {hi}]")));
        }
        Ok(2.0 * (y - lo) / (hi - lo) - 1.0)
    }

    pub fn affine_from_reference(&self, element: usize, eta: f64) -> f64 {
        let (lo, hi) = self.element_bounds(element);
        0.5 * (hi - lo) * eta + 0.5 * (hi + lo)
    }

    /// Writes the global nodes as a one-column CSV, for debugging meshes.
    pub fn write_nodes_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x"])?;
        for (i, x) in self.nodes.iter().enumerate() {
            w.write_record([i.to_string(), format!("{x:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDiffMatrix {
    order: usize,
    matrix: CsrMatrix,
}

impl GlobalDiffMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(f)
    }
}

/// Block assembly: node rows come from the element in which the node is
/// interior, except the two domain ends which come from the first and last
/// element. Every block is scaled by `(2/dx)^r`.
pub fn assemble_global(mesh: &OverlapMesh1D, order: usize) -> Result<GlobalDiffMatrix> {
    if order == 0 || order > 2 {
        return Err(OddsError::InvalidParameter(format!(
            "global assembly supports derivative orders 1 and 2, got {order}"
        )));
    }
    let degree = mesh.degree();
    let local = diff_matrix_higher(degree, order)?;
    let scale = (2.0 / mesh.dx()).powi(order as i32);
    let n = mesh.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for m in 0..mesh.elements() {
        let first = if m == 0 { 0 } else { 1 };
        let last = if m + 1 == mesh.elements() { degree } else { degree - 1 };
        let base = mesh.to_global(m, 0);
        for j in first..=last {
            rows[base + j] = local.row(j).iter().enumerate().map(|(k, v)| (base + k, scale * v)).collect();
        }
    }
    Ok(GlobalDiffMatrix { order, matrix: CsrMatrix::from_rows(n, rows) })
}

/// Interior block and the two boundary columns restricted to interior rows.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorSplit {
    pub interior: CsrMatrix,
    pub left_col: Vec<f64>,
    pub right_col: Vec<f64>,
}

pub fn split_interior_boundary(global: &GlobalDiffMatrix) -> InteriorSplit {
    let n = global.dim();
    let m = global.matrix();
    InteriorSplit {
        interior: m.submatrix(1..n - 1, 1..n - 1),
        left_col: m.column(0, 1..n - 1),
        right_col: m.column(n - 1, 1..n - 1),
    }
}
