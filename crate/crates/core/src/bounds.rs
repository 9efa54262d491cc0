//! Upper bounds for the first eigenvalue built from an [`IntegralSet`]:
//! the Reilly bound, the two direction-indexed families, the quadratic form
//! that decides which family improves on Reilly, and the optimizers over
//! directions.
//!
//! Notation: `vol`, `h2 = int |H|^2`, `A_H = int H H^T`, `A_T = int P`, so
//! that `int <H,v>^2 = v^T A_H v` and `int |v^T|^2 = v^T A_T v`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chart::ImmersedChart;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_scalar_field, IntegralSet, QuadratureGrid};

const UNIT_TOL: f64 = 1e-12;
const Q_ZERO_FACTOR: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-8;
const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 60;
const ATTAINED_TOL: f64 = 1e-9;
// Smallest A_T eigenvalue relative to its trace before the pencil is
// restricted to the range of A_T.
const TANGENT_RANK_TOL: f64 = 1e-10;

/// `v^T F v`.
fn quad(f: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(f * v))
}

pub fn reilly_bound(i: &IntegralSet) -> f64 {
    i.n as f64 * i.h2 / i.vol
}

/// `b(psi, v) = n (h2 + v^T A_H v) / (vol + v^T A_T v / n)`, any `v`.
pub fn pr1_bound(i: &IntegralSet, v: &DVector<f64>) -> f64 {
    let n = i.n as f64;
    n * (i.h2 + quad(&i.a_h, v)) / (i.vol + quad(&i.a_t, v) / n)
}

/// `b~(psi, v) = n (h2 - v^T A_H v) / (vol - v^T A_T v / n)`, unit `v`.
pub fn pr2_bound(i: &IntegralSet, v: &DVector<f64>) -> Result<f64> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm });
    }
    let n = i.n as f64;
    let denom = i.vol - quad(&i.a_t, v) / n;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator { value: denom });
    }
    Ok(n * (i.h2 - quad(&i.a_h, v)) / denom)
}

/// `tau_Q = 1e-9 (n vol |A_H| + h2 |A_T|)`, Frobenius norms.
pub fn zero_threshold(i: &IntegralSet) -> f64 {
    Q_ZERO_FACTOR * (i.n as f64 * i.vol * i.a_h.norm() + i.h2 * i.a_t.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Inertia {
    pub fn as_array(&self) -> [usize; 3] {
        [self.negative, self.zero, self.positive]
    }

    pub fn is_definite(&self) -> bool {
        let dim = self.negative + self.zero + self.positive;
        self.negative == dim || self.positive == dim
    }
}

/// `Q = n vol A_H - h2 A_T` with its spectral data.
#[derive(Clone, Debug)]
pub struct QForm {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub inertia: Inertia,
    pub tau: f64,
}

impl QForm {
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn trace_residual(&self) -> f64 {
        self.matrix.trace().abs()
    }

    pub fn vanishes(&self) -> bool {
        self.norm() <= self.tau
    }

    /// -1, 0 or 1 according to `Q(v)` against the threshold scaled by `|v|^2`.
    pub fn sign_at(&self, v: &DVector<f64>) -> i8 {
        let q = q_eval(self, v);
        let tol = self.tau * v.norm_squared();
        if q < -tol {
            -1
        } else if q > tol {
            1
        } else {
            0
        }
    }
}

/// Symmetric eigen-decomposition sorted ascending.
fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(m.nrows(), order.len());
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn q_matrix(i: &IntegralSet) -> QForm {
    let n = i.n as f64;
    let raw = &i.a_h * (n * i.vol) - &i.a_t * i.h2;
    let matrix = (&raw + raw.transpose()) * 0.5;
    let tau = zero_threshold(i);
    let (eigenvalues, eigenvectors) = sorted_eigen(&matrix);
    let inertia = Inertia {
        negative: eigenvalues.iter().filter(|&&l| l < -tau).count(),
        zero: eigenvalues.iter().filter(|&&l| l.abs() <= tau).count(),
        positive: eigenvalues.iter().filter(|&&l| l > tau).count(),
    };
    QForm {
        matrix,
        eigenvalues,
        eigenvectors,
        inertia,
        tau,
    }
}

pub fn q_eval(q: &QForm, v: &DVector<f64>) -> f64 {
    quad(&q.matrix, v)
}

/// `n^2 (v^T A_H v) / (v^T A_T v)`, the `t -> inf` limit of `b(psi, t v)`.
pub fn limit_bound(i: &IntegralSet, v: &DVector<f64>) -> Result<f64> {
    let n = i.n as f64;
    let tangential = quad(&i.a_t, v);
    if !(tangential > TANGENT_RANK_TOL * i.a_t.norm() * v.norm_squared()) {
        return Err(Error::TangentiallyDegenerate { value: tangential });
    }
    Ok(n * n * quad(&i.a_h, v) / tangential)
}

/// `(t, b(psi, t v))` for each `t`.
pub fn ray_profile(i: &IntegralSet, v: &DVector<f64>, ts: &[f64]) -> Vec<(f64, f64)> {
    ts.iter().map(|&t| (t, pr1_bound(i, &(v * t)))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    StrictlyDecreasing,
    StrictlyIncreasing,
    Constant,
    Mixed,
}

/// Classifies a profile; steps within `rel_tol` of the start value count as flat.
pub fn profile_trend(profile: &[(f64, f64)], rel_tol: f64) -> Trend {
    let Some(&(_, first)) = profile.first() else {
        return Trend::Constant;
    };
    let tol = rel_tol * first.abs().max(f64::MIN_POSITIVE);
    let steps: Vec<f64> = profile.windows(2).map(|w| w[1].1 - w[0].1).collect();
    if steps.iter().all(|d| d.abs() <= tol) {
        Trend::Constant
    } else if steps.iter().all(|&d| d < -tol) {
        Trend::StrictlyDecreasing
    } else if steps.iter().all(|&d| d > tol) {
        Trend::StrictlyIncreasing
    } else {
        Trend::Mixed
    }
}

/// Residuals of the exact identities linking `B - b`, `B - b~` and `Q(v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapResiduals {
    /// `[B - b(v)] vol (vol + v^T A_T v / n) + Q(v)`.
    pub pr1: f64,
    /// `[B - b~(u)] vol (vol - u^T A_T u / n) - Q(u)` with `u = v / |v|`;
    /// `None` for `v = 0`.
    pub pr2: Option<f64>,
}

pub fn gap_identities(i: &IntegralSet, q: &QForm, v: &DVector<f64>) -> Result<GapResiduals> {
    let n = i.n as f64;
    let big_b = reilly_bound(i);
    let pr1 = (big_b - pr1_bound(i, v)) * i.vol * (i.vol + quad(&i.a_t, v) / n)
        + q_eval(q, v);
    let norm = v.norm();
    let pr2 = if norm > 0.0 {
        let u = v / norm;
        let u = &u / u.norm();
        let b2 = pr2_bound(i, &u)?;
        Some((big_b - b2) * i.vol * (i.vol - quad(&i.a_t, &u) / n) - q_eval(q, &u))
    } else {
        None
    };
    Ok(GapResiduals { pr1, pr2 })
}

/// Canonical orthonormal basis of the span of `vectors`: Gram-Schmidt on
/// the projections of `e_1, e_2, ...`, each with its first nonzero
/// coordinate positive. Independent of how the input basis is rotated.
pub fn canonical_basis(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let d = first.len();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &ortho {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
        let nw = w.norm();
        if nw > 1e-10 * v.norm().max(f64::MIN_POSITIVE) {
            ortho.push(w / nw);
        }
    }
    let rank = ortho.len();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(rank);
    for k in 0..d {
        if out.len() == rank {
            break;
        }
        let mut w = DVector::zeros(d);
        for b in &ortho {
            w.axpy(b[k], b, 1.0);
        }
        for c in &out {
            let s = c.dot(&w);
            w.axpy(-s, c, 1.0);
        }
        let nw = w.norm();
        if nw > 1e-6 {
            let mut w = w / nw;
            if let Some(lead) = w.iter().copied().find(|x| x.abs() > 1e-12) {
                if lead < 0.0 {
                    w = -w;
                }
            }
            out.push(w);
        }
    }
    out
}

/// Generalized eigenpairs of the pencil `(A_H, A_T)`, ascending, with
/// `A_T`-orthonormal eigenvectors. Restricts to the range of `A_T` when it
/// is (nearly) singular; the flag reports that.
pub fn pencil_eigen(i: &IntegralSet) -> (DVector<f64>, DMatrix<f64>, bool) {
    let d = i.ambient_dim;
    let (t_vals, t_vecs) = sorted_eigen(&i.a_t);
    let cutoff = TANGENT_RANK_TOL * i.a_t.trace();
    let restricted = t_vals[0] <= cutoff;
    // Basis of the range of A_T (all of R^d when A_T is definite).
    let basis = if restricted {
        let keep: Vec<usize> = (0..d).filter(|&k| t_vals[k] > cutoff).collect();
        let mut b = DMatrix::zeros(d, keep.len());
        for (col, &k) in keep.iter().enumerate() {
            b.set_column(col, &t_vecs.column(k));
        }
        b
    } else {
        DMatrix::identity(d, d)
    };
    let ah = basis.transpose() * &i.a_h * &basis;
    let at = basis.transpose() * &i.a_t * &basis;
    let at = (&at + at.transpose()) * 0.5;
    let chol = nalgebra::Cholesky::new(at).expect("range of A_T is positive definite");
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .expect("Cholesky factor of a definite matrix is invertible");
    let c = &l_inv * ah * l_inv.transpose();
    let (values, y) = sorted_eigen(&c);
    let vectors = basis * l_inv.transpose() * y;
    (values, vectors, restricted)
}

#[derive(Clone, Debug)]
pub struct BestPr1 {
    pub value: f64,
    /// Unit witness direction, or the zero vector when the Reilly value is optimal.
    pub direction: DVector<f64>,
    /// True when the optimum is attained at `v = 0` (value equals the Reilly bound).
    pub attained: bool,
    /// Canonical basis of the optimal eigenspace (empty when attained).
    pub eigenspace: Vec<DVector<f64>>,
    /// True when `A_T` was singular and the pencil was restricted to its range.
    pub restricted: bool,
}

/// `min(B, n^2 lambda_min(A_H, A_T))`.
///
/// `b(psi, t v)` is monotone in `t` and tends to `n^2 rho(v)` with `rho` the
/// pencil Rayleigh quotient, so the smallest pencil eigenvalue is the
/// infimum over all rays whenever it undercuts `B`.
pub fn best_pr1(i: &IntegralSet) -> Result<BestPr1> {
    let n = i.n as f64;
    let big_b = reilly_bound(i);
    let (values, vectors, restricted) = pencil_eigen(i);
    let rho_min = values[0];
    let limit = n * n * rho_min;
    if limit >= big_b * (1.0 - ATTAINED_TOL) {
        return Ok(BestPr1 {
            value: big_b,
            direction: DVector::zeros(i.ambient_dim),
            attained: true,
            eigenspace: Vec::new(),
            restricted,
        });
    }
    let tol = CLUSTER_TOL * rho_min.abs().max(values.amax() * 1e-3);
    let cluster: Vec<DVector<f64>> = (0..values.len())
        .filter(|&k| values[k] - rho_min <= tol)
        .map(|k| vectors.column(k).into_owned())
        .collect();
    let eigenspace = canonical_basis(&cluster);
    Ok(BestPr1 {
        value: limit,
        direction: eigenspace[0].clone(),
        attained: false,
        eigenspace,
        restricted,
    })
}

#[derive(Clone, Debug)]
pub struct BestPr2 {
    pub value: f64,
    pub direction: DVector<f64>,
    pub eigenspace: Vec<DVector<f64>>,
    pub iterations: usize,
}

/// Largest eigenvalue of `n A_H - (mu/n) A_T` with its eigenvectors.
fn top_eigen(i: &IntegralSet, mu: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = i.n as f64;
    let m = &i.a_h * n - &i.a_t * (mu / n);
    let (values, vectors) = sorted_eigen(&m);
    (values[values.len() - 1], values, vectors)
}

/// Minimizes `b~(psi, v)` over the unit sphere by bisection on
/// `phi(mu) = (n h2 - mu vol) - lambda_max(n A_H - (mu/n) A_T)`.
///
/// `phi` is the pointwise minimum of `N(v) - mu D(v)` over unit `v`, a family
/// of strictly decreasing affine functions, so its unique root is the
/// minimum of `N/D`.
pub fn best_pr2(i: &IntegralSet) -> Result<BestPr2> {
    let n = i.n as f64;
    let phi = |mu: f64| n * i.h2 - mu * i.vol - top_eigen(i, mu).0;
    let mut lo = 0.0;
    let mut hi = n * i.h2 / (i.vol * (1.0 - 1.0 / n));
    let (phi_lo, phi_hi) = (phi(lo), phi(hi));
    let slack = 1e-12 * n * i.h2;
    if phi_lo < -slack || phi_hi > slack {
        return Err(Error::BisectionFailure { phi_lo, phi_hi });
    }
    let mut iterations = 0;
    while hi - lo > BISECTION_TOL && iterations < BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mu = 0.5 * (lo + hi);
    let (top, values, vectors) = top_eigen(i, mu);
    let spread = values.amax().max(f64::MIN_POSITIVE);
    let cluster: Vec<DVector<f64>> = (0..values.len())
        .filter(|&k| top - values[k] <= CLUSTER_TOL * spread)
        .map(|k| vectors.column(k).into_owned())
        .collect();
    let eigenspace = canonical_basis(&cluster);
    Ok(BestPr2 {
        value: mu,
        direction: eigenspace[0].clone(),
        eigenspace,
        iterations,
    })
}

/// Volume of the unit sphere `S^k`.
pub fn sphere_volume(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_volume(k - 2),
    }
}

/// Integral of `v -> v^T F v` over the unit sphere `S^m` of `R^(m+1)`, or,
/// with `axis`, over the great subsphere orthogonal to `axis`.
pub fn average_quadratic(f: &DMatrix<f64>, axis: Option<&DVector<f64>>) -> Result<f64> {
    if !f.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "quadratic form must be square, got {}x{}",
            f.nrows(),
            f.ncols()
        )));
    }
    let dim = f.nrows();
    let m = dim - 1;
    let f = (f + f.transpose()) * 0.5;
    match axis {
        None => Ok(f.trace() / dim as f64 * sphere_volume(m)),
        Some(v) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "axis of length {} for a {dim}x{dim} form",
                    v.len()
                )));
            }
            let norm = v.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotUnit { norm });
            }
            Ok((f.trace() - quad(&f, v)) / m as f64 * sphere_volume(m - 1))
        }
    }
}

/// RMS over the submanifold of `(I - v v^T)(n H + lambda (psi - c))`, with
/// `c` the center of gravity. Vanishes when `b~(psi, v)` is an equality
/// with eigenvalue `lambda`.
pub fn pr2_equality_residual(
    chart: &ImmersedChart,
    grid: &QuadratureGrid,
    integrals: &IntegralSet,
    v: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm });
    }
    let n = integrals.n as f64;
    let c = integrals.center_of_gravity();
    let sq = integrate_scalar_field(chart, grid, |s| {
        let mut r = &s.mean_curvature * n + (&s.position - &c) * lambda;
        let along = r.dot(v);
        r.axpy(-along, v, 1.0);
        r.norm_squared()
    })?;
    Ok((sq / integrals.vol).sqrt())
}

/// Everything the bound engine reports for one shape.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub reilly: f64,
    pub pr1_at: Vec<(DVector<f64>, f64)>,
    pub pr2_at: Vec<(DVector<f64>, f64)>,
    pub best_pr1: BestPr1,
    pub best_pr2: BestPr2,
    pub q: QForm,
    pub mesh_lambda1: Option<f64>,
}

impl BoundReport {
    /// PR1 at each direction as given, PR2 at each nonzero direction normalized.
    pub fn compute(i: &IntegralSet, directions: &[DVector<f64>]) -> Result<Self> {
        let pr1_at = directions
            .iter()
            .map(|v| (v.clone(), pr1_bound(i, v)))
            .collect();
        let pr2_at = directions
            .iter()
            .filter(|v| v.norm() > 0.0)
            .map(|v| {
                let u = v / v.norm();
                let u = &u / u.norm();
                pr2_bound(i, &u).map(|b| (u, b))
            })
            .collect::<Result<_>>()?;
        Ok(BoundReport {
            reilly: reilly_bound(i),
            pr1_at,
            pr2_at,
            best_pr1: best_pr1(i)?,
            best_pr2: best_pr2(i)?,
            q: q_matrix(i),
            mesh_lambda1: None,
        })
    }

    pub fn q_inertia(&self) -> Inertia {
        self.q.inertia
    }

    /// Every recorded bound, labelled.
    pub fn all_bounds(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("reilly".to_string(), self.reilly),
            ("best_pr1".to_string(), self.best_pr1.value),
            ("best_pr2".to_string(), self.best_pr2.value),
        ];
        for (k, (_, b)) in self.pr1_at.iter().enumerate() {
            out.push((format!("pr1[{k}]"), *b));
        }
        for (k, (_, b)) in self.pr2_at.iter().enumerate() {
            out.push((format!("pr2[{k}]"), *b));
        }
        out
    }

    /// Bounds that fall below the mesh eigenvalue by more than `slack * bound`.
    pub fn domination_violations(&self, slack: f64) -> Vec<String> {
        let Some(lambda) = self.mesh_lambda1 else {
            return Vec::new();
        };
        self.all_bounds()
            .into_iter()
            .filter(|(_, b)| lambda > b * (1.0 + slack))
            .map(|(name, b)| format!("mesh lambda1 {lambda} exceeds {name} = {b}"))
            .collect()
    }
}
