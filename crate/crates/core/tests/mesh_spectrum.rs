//! Discrete Laplace–Beltrami spectra on triangulated catalog shapes.

use nalgebra::DMatrix;
use sbl_core::bounds::{limit_bound, q_matrix, BoundReport};
use sbl_core::catalog::{catalog, make_shape, ShapeKind};
use sbl_core::directions::random_unit_vectors;
use sbl_core::quadrature::{assemble_integrals, QuadratureGrid};
use sbl_core::mesh::{
    first_eigenvalue, first_eigenvalue_with, load_off, save_off, triangulate_chart, EigenMethod,
    TriMesh,
};
use sbl_core::Error;

fn torus(r: f64, nu: usize, nv: usize) -> TriMesh {
    let chart = make_shape(&ShapeKind::Torus { r_major: r }).unwrap();
    triangulate_chart(&chart, nu, nv).unwrap()
}

#[test]
fn torus_grid_counts() {
    let m = torus(2.0, 64, 32);
    assert_eq!(m.vertex_count(), 2048);
    assert_eq!(m.triangles().len(), 4096);
    assert_eq!(m.euler_characteristic(), 0);
    assert!(m.is_closed());
}

#[test]
fn sphere_grid_is_a_sphere() {
    let chart = make_shape(&ShapeKind::Sphere { m: 2, r: 1.0 }).unwrap();
    let m = triangulate_chart(&chart, 64, 32).unwrap();
    assert_eq!(m.euler_characteristic(), 2);
    assert!(m.is_closed() && m.is_connected());
}

#[test]
fn clifford_mesh_lives_in_four_dimensions() {
    let chart = make_shape(&ShapeKind::Clifford).unwrap();
    let m = triangulate_chart(&chart, 32, 32).unwrap();
    assert_eq!(m.dim(), 4);
    assert_eq!(m.euler_characteristic(), 0);
}

#[test]
fn unit_sphere_first_eigenvalue_is_two() {
    let chart = make_shape(&ShapeKind::Sphere { m: 2, r: 1.0 }).unwrap();
    let m = triangulate_chart(&chart, 64, 128).unwrap();
    let l = first_eigenvalue(&m).unwrap();
    assert!((l - 2.0).abs() < 0.04, "lambda1 = {l}");
}

#[test]
fn clifford_first_eigenvalue_is_two() {
    let chart = make_shape(&ShapeKind::Clifford).unwrap();
    let m = triangulate_chart(&chart, 64, 64).unwrap();
    let l = first_eigenvalue(&m).unwrap();
    assert!((l - 2.0).abs() < 0.04, "lambda1 = {l}");
}

#[test]
fn torus_eigenvalue_is_stable_and_below_the_bound() {
    let r = 2.0_f64.sqrt();
    let coarse = first_eigenvalue(&torus(r, 128, 64)).unwrap();
    let fine = first_eigenvalue(&torus(r, 192, 96)).unwrap();
    assert!(coarse < 0.552284, "lambda1 = {coarse}");
    assert!((coarse - fine).abs() / fine < 0.01, "{coarse} vs {fine}");
}

#[test]
fn refinement_stabilizes() {
    let r = 1.5;
    let l: Vec<f64> = [(32, 16), (64, 32), (128, 64)]
        .iter()
        .map(|&(nu, nv)| first_eigenvalue(&torus(r, nu, nv)).unwrap())
        .collect();
    let d1 = (l[1] - l[0]).abs() / l[1];
    let d2 = (l[2] - l[1]).abs() / l[2];
    assert!(d1 < 0.01 && d2 < 0.005 && d2 < d1, "{l:?}");
}

#[test]
fn every_bound_dominates_the_mesh_eigenvalue() {
    for kind in catalog() {
        let chart = make_shape(&kind).unwrap();
        if chart.intrinsic_dim() != 2 {
            continue;
        }
        let grid = QuadratureGrid::uniform(&chart, 128).unwrap();
        let i = assemble_integrals(&chart, &grid).unwrap();
        let q = q_matrix(&i);
        let dirs = random_unit_vectors(chart.ambient_dim(), 50, 2);
        let mut report = BoundReport::compute(&i, &dirs).unwrap();
        let mesh = triangulate_chart(&chart, 128, 64).unwrap();
        report.mesh_lambda1 = Some(first_eigenvalue(&mesh).unwrap());
        assert!(report.domination_violations(0.02).is_empty(), "{kind}: {:?}", report.domination_violations(0.02));
        let lambda = report.mesh_lambda1.unwrap();
        for v in &dirs {
            if q.sign_at(v) < 0 {
                let lim = limit_bound(&i, v).unwrap();
                assert!(lambda <= lim * 1.02, "{kind}: limit {lim} < {lambda}");
            }
        }
    }
}

#[test]
fn dense_and_iterative_solvers_agree() {
    let m = torus(1.5, 48, 24);
    let d = first_eigenvalue_with(&m, EigenMethod::Dense).unwrap();
    let s = first_eigenvalue_with(&m, EigenMethod::ShiftInvert).unwrap();
    assert!((d - s).abs() < 1e-8 * d, "{d} vs {s}");
}

#[test]
fn eigenvalue_is_invariant_under_rigid_motion() {
    let m = torus(1.5, 48, 24);
    let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
    let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let moved = m.transformed(&rot, &[1.0, -2.0, 0.5]).unwrap();
    let a = first_eigenvalue(&m).unwrap();
    let b = first_eigenvalue(&moved).unwrap();
    assert!((a - b).abs() < 1e-9 * a);
}

#[test]
fn off_round_trip_preserves_the_mesh() {
    let m = torus(1.5, 16, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.off");
    save_off(&m, &path).unwrap();
    let back = load_off(&path).unwrap();
    assert_eq!(back.vertices(), m.vertices());
    assert_eq!(back.triangles(), m.triangles());
}

#[test]
fn truncated_off_reports_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.off");
    std::fs::write(&path, "OFF\n4 4 0\n0 0 0\n1 0 0\n").unwrap();
    assert!(matches!(load_off(&path), Err(Error::Parse { .. })));
}

#[test]
fn quad_faces_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("quad.off");
    std::fs::write(&path, "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
    assert!(matches!(load_off(&path), Err(Error::NonTriangleFace { degree: 4, .. })));
}

#[test]
fn open_meshes_have_no_closed_spectrum() {
    let m = TriMesh::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0], vec![[0, 1, 2]]).unwrap();
    assert!(matches!(first_eigenvalue(&m), Err(Error::MeshNotClosed(_))));
}
