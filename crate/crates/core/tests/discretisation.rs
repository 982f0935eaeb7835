use nalgebra::DMatrix;
use odds_core::chebyshev::{diff_matrix_first, diff_matrix_higher, reference_nodes};
use odds_core::mesh::{assemble_global, build_mesh, element_width, split_interior_boundary};
use proptest::prelude::*;
use std::f64::consts::PI;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

#[test]
fn monomials_are_differentiated_exactly() {
    for j in [2usize, 4, 8, 16, 32] {
        let eta = reference_nodes(j).unwrap();
        let d1 = diff_matrix_first(j).unwrap();
        let d2 = diff_matrix_higher(j, 2).unwrap();
        for s in 0..=j as i32 {
            let f: Vec<f64> = eta.nodes().iter().map(|x| x.powi(s)).collect();
            let df: Vec<f64> =
                eta.nodes().iter().map(|x| if s == 0 { 0.0 } else { s as f64 * x.powi(s - 1) }).collect();
            let ddf: Vec<f64> =
                eta.nodes().iter().map(|x| if s < 2 { 0.0 } else { (s * (s - 1)) as f64 * x.powi(s - 2) }).collect();
            let e1 = max_abs(d1.apply(&f).iter().zip(&df).map(|(a, b)| a - b));
            let e2 = max_abs(d2.apply(&f).iter().zip(&ddf).map(|(a, b)| a - b));
            assert!(e1 <= 1e-9 * max_abs(df.iter().copied()).max(1.0), "J={j} s={s} D1 {e1}");
            assert!(e2 <= 1e-9 * max_abs(ddf.iter().copied()).max(1.0), "J={j} s={s} D2 {e2}");
        }
    }
}

#[test]
fn second_order_matrix_is_square_of_first_by_dense_product() {
    for j in [3usize, 7, 12] {
        let d1 = diff_matrix_first(j).unwrap();
        let n = j + 1;
        let a = DMatrix::from_row_slice(n, n, d1.entries());
        let sq = &a * &a;
        let d2 = diff_matrix_higher(j, 2).unwrap();
        let b = DMatrix::from_row_slice(n, n, d2.entries());
        assert!((sq - b).abs().max() < 1e-9 * (j * j * j * j) as f64);
    }
}

/// Width solving `x_L + (M - 1) s(dx) + dx = x_R` by bisection, independent
/// of the closed form.
fn width_by_bisection(len: f64, m: usize, j: usize) -> f64 {
    let c = (1.0 + (PI / j as f64).cos()) / 2.0;
    let cover = |dx: f64| (m as f64 - 1.0) * c * dx + dx - len;
    let (mut lo, mut hi) = (0.0, 2.0 * len);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cover(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn element_width_matches_overlap_constraint() {
    for m in 1..=20 {
        for j in 2..=40 {
            let dx = element_width((-3.0, 4.5), m, j);
            let oracle = width_by_bisection(7.5, m, j);
            assert!((dx - oracle).abs() <= 1e-13 * 7.5, "M={m} J={j}");
            let mesh = build_mesh((-3.0, 4.5), m, j).unwrap();
            let (_, right) = mesh.element_bounds(m - 1);
            assert!((right - 4.5).abs() <= 1e-12);
        }
        let dx2 = element_width((-3.0, 4.5), m, 2);
        assert!((dx2 - 2.0 * 7.5 / (m as f64 + 1.0)).abs() <= 1e-13);
    }
}

#[test]
fn shared_nodes_are_bitwise_identical() {
    for (m, j) in [(2, 2), (5, 7), (10, 30), (20, 40)] {
        let mesh = build_mesh((-20.0, 100.0), m, j).unwrap();
        for e in 0..m - 1 {
            let a = mesh.element_nodes(e);
            let b = mesh.element_nodes(e + 1);
            assert_eq!(a[j - 1].to_bits(), b[0].to_bits());
            assert_eq!(a[j].to_bits(), b[1].to_bits());
        }
        assert!(mesh.nodes().windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn assembled_operators_on_polynomials() {
    for (m, j) in [(1, 4), (3, 6), (10, 30)] {
        let mesh = build_mesh((-2.0, 5.0), m, j).unwrap();
        let d2 = assemble_global(&mesh, 2).unwrap();
        let d1 = assemble_global(&mesh, 1).unwrap();
        let sq: Vec<f64> = mesh.nodes().iter().map(|x| x * x).collect();
        let ones = vec![3.0; mesh.len()];
        assert!(max_abs(d2.apply(&sq).iter().map(|v| v - 2.0)) < 1e-8);
        assert!(max_abs(d2.apply(&ones)) < 1e-10 * (2.0 / mesh.dx()).powi(2));
        let grad = d1.apply(&sq);
        assert!(max_abs(grad.iter().zip(mesh.nodes()).map(|(g, x)| g - 2.0 * x)) < 1e-9);
    }
}

#[test]
fn single_element_reduces_to_scaled_reference_matrix() {
    let mesh = build_mesh((0.0, 3.0), 1, 9).unwrap();
    let g = assemble_global(&mesh, 2).unwrap();
    let d = diff_matrix_higher(9, 2).unwrap().scaled((2.0_f64 / 3.0).powi(2));
    let dense = g.matrix().to_dense();
    assert!(max_abs(dense.iter().zip(d.entries()).map(|(a, b)| a - b)) < 1e-12);
}

#[test]
fn interior_split_reassembles_interior_rows() {
    let mesh = build_mesh((0.0, 1.0), 4, 6).unwrap();
    let g = assemble_global(&mesh, 2).unwrap();
    let split = split_interior_boundary(&g);
    let n = mesh.len();
    let f: Vec<f64> = mesh.nodes().iter().map(|x| (3.0 * x).sin() + 0.2).collect();
    let full = g.apply(&f);
    let inner = split.interior.mul_vec(&f[1..n - 1]);
    for i in 0..n - 2 {
        let v = inner[i] + split.left_col[i] * f[0] + split.right_col[i] * f[n - 1];
        assert!((v - full[i + 1]).abs() < 1e-9 * full[i + 1].abs().max(1.0));
    }
}

#[test]
fn second_derivative_converges_geometrically() {
    for m in [1, 2, 4] {
        let mut prev = f64::INFINITY;
        for j in [4usize, 6, 8, 10, 12] {
            let mesh = build_mesh((-1.0, 1.0), m, j).unwrap();
            let d2 = assemble_global(&mesh, 2).unwrap();
            let f: Vec<f64> = mesh.nodes().iter().map(|x| x.sin()).collect();
            let err = max_abs(d2.apply(&f).iter().zip(&f).map(|(a, b)| a + b));
            assert!(err < 0.5 * prev || err < 1e-9, "M={m} J={j}: {err} after {prev}");
            prev = err;
        }
    }
}

#[test]
fn affine_map_round_trip_and_midpoint() {
    let mesh = build_mesh((-20.0, 100.0), 10, 30).unwrap();
    for e in 0..10 {
        let (a, b) = mesh.element_bounds(e);
        assert_eq!(mesh.affine_to_reference(e, a).unwrap(), -1.0);
        assert_eq!(mesh.affine_to_reference(e, b).unwrap(), 1.0);
        assert!(mesh.affine_to_reference(e, 0.5 * (a + b)).unwrap().abs() < 1e-14);
        assert!(mesh.affine_to_reference(e, b + 1.0).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_polynomials_are_differentiated_exactly(j in 2usize..20, coeffs in prop::collection::vec(-2.0f64..2.0, 21)) {
        let eta = reference_nodes(j).unwrap();
        let d1 = diff_matrix_first(j).unwrap();
        let c = &coeffs[..=j];
        let p = |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
        let dp = |x: f64| c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, a)| acc * x + k as f64 * a);
        let f: Vec<f64> = eta.nodes().iter().map(|&x| p(x)).collect();
        let got = d1.apply(&f);
        let scale = c.iter().map(|a| a.abs()).sum::<f64>() * (j * j) as f64;
        for (g, &x) in got.iter().zip(eta.nodes()) {
            prop_assert!((g - dp(x)).abs() <= 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn assembled_rows_sum_to_zero(m in 1usize..12, j in 2usize..24, lo in -50.0f64..0.0, len in 0.5f64..80.0) {
        let mesh = build_mesh((lo, lo + len), m, j).unwrap();
        for r in [1, 2] {
            let g = assemble_global(&mesh, r).unwrap();
            let scale = (2.0 / mesh.dx()).powi(r as i32) * (j * j) as f64;
            let sums = g.apply(&vec![1.0; mesh.len()]);
            prop_assert!(max_abs(sums) <= 1e-10 * scale);
        }
    }
}
