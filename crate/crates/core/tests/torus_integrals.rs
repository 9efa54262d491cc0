//! Quadrature against the closed-form torus integrals.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use sbl_core::bounds::{best_pr1, best_pr2, q_matrix, reilly_bound};
use sbl_core::catalog::{make_shape, torus_closed_forms, ShapeKind};
use sbl_core::quadrature::{assemble_integrals, integrate_scalar_field, volume, QuadratureGrid};

const RADII: [f64; 7] = [1.05, 1.030776406404415, 1.0606601717798212, 1.2, 1.4142135623730951, 2.0, 5.0];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn mat_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn torus_area_and_mean_curvature_integral() {
    let r = 2.0_f64;
    let chart = make_shape(&ShapeKind::Torus { r_major: r }).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 128).unwrap();
    let area = volume(&chart, &grid).unwrap();
    assert!(rel(area, 4.0 * PI * PI * r) < 1e-12);
    // |H|^2 for this torus integrates to pi^2 R^2 / sqrt(R^2 - 1).
    let h2 = integrate_scalar_field(&chart, &grid, |s| s.mean_curvature.norm_squared()).unwrap();
    assert!(rel(h2, PI * PI * r * r / (r * r - 1.0).sqrt()) < 1e-10);
}

#[test]
fn sphere_area_is_four_pi() {
    let chart = make_shape(&ShapeKind::Sphere { m: 2, r: 1.0 }).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 64).unwrap();
    assert!(rel(volume(&chart, &grid).unwrap(), 4.0 * PI) < 1e-12);
}

#[test]
fn clifford_mean_curvature_integral_is_two_pi_squared() {
    let chart = make_shape(&ShapeKind::Clifford).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 64).unwrap();
    let h2 = integrate_scalar_field(&chart, &grid, |s| s.mean_curvature.norm_squared()).unwrap();
    assert!(rel(h2, 2.0 * PI * PI) < 1e-12);
}

#[test]
fn integrals_match_closed_forms_across_regimes() {
    for &r in &RADII {
        let chart = make_shape(&ShapeKind::Torus { r_major: r }).unwrap();
        let grid = QuadratureGrid::uniform(&chart, 256).unwrap();
        let got = assemble_integrals(&chart, &grid).unwrap();
        let want = torus_closed_forms(r).unwrap();
        assert!(rel(got.vol, want.area) < 1e-9, "R={r} area");
        assert!(rel(got.h2, want.h2) < 1e-9, "R={r} h2");
        assert!(mat_rel(&got.a_t, &want.a_t) < 1e-9, "R={r} A_T");
        assert!(mat_rel(&got.a_h, &want.a_h) < 1e-9, "R={r} A_H");
        assert!(rel(reilly_bound(&got), want.reilly) < 1e-9, "R={r} Reilly");
        let q = q_matrix(&got);
        // At R^2 = 9/8 the exact Q is zero, so relative error is replaced
        // by the zero threshold there.
        let err = (&q.matrix - want.q_matrix()).norm();
        assert!(err <= (1e-8 * want.q_matrix().norm()).max(q.tau), "R={r} Q err {err}");
    }
}

#[test]
fn q_coefficient_flips_sign_at_nine_eighths() {
    let crit = (9.0_f64 / 8.0).sqrt();
    assert!(torus_closed_forms(crit * (1.0 - 1e-6)).unwrap().q_coeff > 0.0);
    assert!(torus_closed_forms(crit * (1.0 + 1e-6)).unwrap().q_coeff < 0.0);
    let chart = make_shape(&ShapeKind::Torus { r_major: crit }).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 256).unwrap();
    let q = q_matrix(&assemble_integrals(&chart, &grid).unwrap());
    assert!(q.vanishes(), "|Q| = {} > tau = {}", q.norm(), q.tau);
}

#[test]
fn torus_table_values() {
    let root2 = 2.0_f64.sqrt();
    let chart = make_shape(&ShapeKind::Torus { r_major: root2 }).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 256).unwrap();
    let i = assemble_integrals(&chart, &grid).unwrap();
    let target = 4.0 * (root2 - 1.0) / 3.0;
    assert!(rel(reilly_bound(&i), 1.0 / root2) < 1e-8);
    let b1 = best_pr1(&i).unwrap();
    let b2 = best_pr2(&i).unwrap();
    assert!(rel(b1.value, target) < 1e-8, "best PR1 {}", b1.value);
    assert!(rel(b2.value, target) < 1e-8, "best PR2 {}", b2.value);
    assert!(!b1.attained);

    let r = 17.0_f64.sqrt() / 4.0;
    let chart = make_shape(&ShapeKind::Torus { r_major: r }).unwrap();
    let grid = QuadratureGrid::uniform(&chart, 256).unwrap();
    let i = assemble_integrals(&chart, &grid).unwrap();
    let s17 = 17.0_f64.sqrt();
    assert!(rel(reilly_bound(&i), s17 / 2.0) < 1e-8);
    let b1 = best_pr1(&i).unwrap();
    assert!(rel(b1.value, (17.0 - s17) / 8.0) < 1e-8, "best PR1 {}", b1.value);
    assert!(b1.direction[2].abs() > 1.0 - 1e-12);
    // Independent oracle: with v3 = 0 the PR2 bound is
    // n (h2 - a) / (vol - t / n) with a, t the in-plane diagonal entries.
    let o = torus_closed_forms(r).unwrap();
    let pr2_plane = 2.0 * (o.h2 - o.a_h[(0, 0)]) / (o.area - o.a_t[(0, 0)] / 2.0);
    let b2 = best_pr2(&i).unwrap();
    assert!(rel(b2.value, pr2_plane) < 1e-8, "best PR2 {} vs {}", b2.value, pr2_plane);
    assert!(b2.direction[2].abs() < 1e-8);
}

#[test]
fn coarse_and_fine_grids_agree() {
    let chart = make_shape(&ShapeKind::Torus { r_major: 1.5 }).unwrap();
    let a = assemble_integrals(&chart, &QuadratureGrid::uniform(&chart, 32).unwrap()).unwrap();
    let b = assemble_integrals(&chart, &QuadratureGrid::uniform(&chart, 64).unwrap()).unwrap();
    assert!(rel(a.h2, b.h2) < 1e-6);
    assert!(mat_rel(&a.a_h, &b.a_h) < 1e-6);
}
