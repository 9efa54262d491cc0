//! Pointwise differential geometry of a parametrized immersion.
//!
//! A chart maps a box in `R^n` into `R^(m+1)`. Everything here works on the
//! tangent projector `P = E G^-1 E^T`, so hypersurfaces and higher
//! codimension (the Clifford torus in `R^4`) share one code path.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type PointMap = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
/// First partials as an `(m+1) x n` matrix, column `i` is `d psi / d u_i`.
pub type JacobianMap = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// Second partials, row-major `n x n` list of ambient vectors.
pub type HessianMap = Arc<dyn Fn(&[f64]) -> Vec<DVector<f64>> + Send + Sync>;

/// Relative step for first-derivative central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Relative step for second-derivative central differences.
pub const DEFAULT_FD_STEP_SECOND: f64 = 1e-4;

const DEGENERACY_FACTOR: f64 = 1e-14;
const DOMAIN_SLACK: f64 = 1e-12;
const PERIODIC_TOL: f64 = 1e-12;

#[derive(Clone)]
pub enum Derivatives {
    Analytic {
        first: JacobianMap,
        second: HessianMap,
    },
    /// Central differences with per-axis step `rel * (b_i - a_i)`.
    FiniteDifference { first_rel: f64, second_rel: f64 },
}

impl fmt::Debug for Derivatives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derivatives::Analytic { .. } => f.write_str("Analytic"),
            Derivatives::FiniteDifference {
                first_rel,
                second_rel,
            } => f
                .debug_struct("FiniteDifference")
                .field("first_rel", first_rel)
                .field("second_rel", second_rel)
                .finish(),
        }
    }
}

/// A smooth parametrization of a compact `n`-dimensional submanifold of
/// `R^(m+1)` over a box domain, with per-axis periodicity.
#[derive(Clone)]
pub struct ImmersedChart {
    intrinsic_dim: usize,
    base_ambient_dim: usize,
    domain: Vec<(f64, f64)>,
    periodic: Vec<bool>,
    eval: PointMap,
    derivatives: Derivatives,
    scale: f64,
    // Rigid (or general linear) post-map: psi' = linear * psi + offset.
    linear: Option<DMatrix<f64>>,
    offset: DVector<f64>,
}

impl fmt::Debug for ImmersedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmersedChart")
            .field("intrinsic_dim", &self.intrinsic_dim)
            .field("ambient_dim", &self.ambient_dim())
            .field("domain", &self.domain)
            .field("periodic", &self.periodic)
            .field("derivatives", &self.derivatives)
            .field("scale", &self.scale)
            .finish()
    }
}

impl ImmersedChart {
    /// Builds a chart that uses central finite differences for its
    /// derivatives until analytic ones are attached.
    ///
    /// Checks `n >= 2`, a non-empty box, and seam continuity on every
    /// periodic axis.
    pub fn new<F>(
        ambient_dim: usize,
        domain: Vec<(f64, f64)>,
        periodic: Vec<bool>,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        let n = domain.len();
        if n < 2 {
            return Err(Error::BadParameter(format!(
                "intrinsic dimension must be at least 2, got {n}"
            )));
        }
        if periodic.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} periodic flags for a {n}-dimensional domain",
                periodic.len()
            )));
        }
        if ambient_dim <= n {
            return Err(Error::BadParameter(format!(
                "ambient dimension {ambient_dim} must exceed intrinsic dimension {n}"
            )));
        }
        for (i, &(a, b)) in domain.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::BadParameter(format!(
                    "axis {i} has an empty or non-finite range [{a}, {b}]"
                )));
            }
        }
        let mut chart = ImmersedChart {
            intrinsic_dim: n,
            base_ambient_dim: ambient_dim,
            domain,
            periodic,
            eval: Arc::new(eval),
            derivatives: Derivatives::FiniteDifference {
                first_rel: DEFAULT_FD_STEP,
                second_rel: DEFAULT_FD_STEP_SECOND,
            },
            scale: 1.0,
            linear: None,
            offset: DVector::zeros(ambient_dim),
        };
        let probe = chart.raw_point(&chart.center());
        if probe.len() != ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "eval returned {} coordinates, expected {ambient_dim}",
                probe.len()
            )));
        }
        chart.scale = chart.estimate_scale();
        chart.check_seams()?;
        Ok(chart)
    }

    pub fn with_analytic_derivatives<J, H>(mut self, first: J, second: H) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Vec<DVector<f64>> + Send + Sync + 'static,
    {
        self.derivatives = Derivatives::Analytic {
            first: Arc::new(first),
            second: Arc::new(second),
        };
        self
    }

    pub fn with_finite_differences(mut self, first_rel: f64, second_rel: f64) -> Self {
        self.derivatives = Derivatives::FiniteDifference {
            first_rel,
            second_rel,
        };
        self
    }

    /// Overrides the characteristic length used by the degeneracy test.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.linear
            .as_ref()
            .map_or(self.base_ambient_dim, |l| l.nrows())
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn derivatives(&self) -> &Derivatives {
        &self.derivatives
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        matches!(self.derivatives, Derivatives::Analytic { .. })
    }

    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|&(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.intrinsic_dim
            && u.iter().zip(&self.domain).all(|(&x, &(a, b))| {
                let slack = DOMAIN_SLACK * (b - a).max(1.0);
                x >= a - slack && x <= b + slack
            })
    }

    /// Composes the chart with the affine map `x -> linear * x + offset`.
    ///
    /// `linear` may change the ambient dimension (e.g. embed `R^3` into `R^4`).
    pub fn transformed(&self, linear: &DMatrix<f64>, offset: &DVector<f64>) -> Result<Self> {
        if linear.ncols() != self.ambient_dim() || offset.len() != linear.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "affine map {}x{} + {} does not fit ambient dimension {}",
                linear.nrows(),
                linear.ncols(),
                offset.len(),
                self.ambient_dim()
            )));
        }
        let mut out = self.clone();
        out.linear = Some(match &self.linear {
            Some(l) => linear * l,
            None => linear.clone(),
        });
        out.offset = linear * &self.offset + offset;
        let norm = linear.norm() / (linear.ncols() as f64).sqrt();
        out.scale = self.scale * norm.max(f64::MIN_POSITIVE);
        Ok(out)
    }

    pub fn translated(&self, shift: &DVector<f64>) -> Result<Self> {
        let id = DMatrix::identity(self.ambient_dim(), self.ambient_dim());
        let mut out = self.transformed(&id, shift)?;
        out.scale = self.scale;
        Ok(out)
    }

    fn raw_point(&self, u: &[f64]) -> DVector<f64> {
        (self.eval)(u)
    }

    fn apply_point(&self, p: DVector<f64>) -> DVector<f64> {
        match &self.linear {
            Some(l) => l * p + &self.offset,
            None => p + &self.offset,
        }
    }

    fn apply_vector(&self, d: DVector<f64>) -> DVector<f64> {
        match &self.linear {
            Some(l) => l * d,
            None => d,
        }
    }

    pub fn point(&self, u: &[f64]) -> DVector<f64> {
        self.apply_point(self.raw_point(u))
    }

    fn steps(&self, rel: f64) -> Vec<f64> {
        self.domain.iter().map(|&(a, b)| rel * (b - a)).collect()
    }

    /// `(m+1) x n` matrix of first partials.
    pub fn first_partials(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.intrinsic_dim;
        let raw = match &self.derivatives {
            Derivatives::Analytic { first, .. } => first(u),
            Derivatives::FiniteDifference { first_rel, .. } => {
                let h = self.steps(*first_rel);
                let mut jac = DMatrix::zeros(self.base_ambient_dim, n);
                let mut w = u.to_vec();
                for i in 0..n {
                    w[i] = u[i] + h[i];
                    let plus = self.raw_point(&w);
                    w[i] = u[i] - h[i];
                    let minus = self.raw_point(&w);
                    w[i] = u[i];
                    jac.set_column(i, &((plus - minus) / (2.0 * h[i])));
                }
                jac
            }
        };
        match &self.linear {
            Some(l) => l * raw,
            None => raw,
        }
    }

    /// Row-major `n x n` list of second partials.
    pub fn second_partials(&self, u: &[f64]) -> Vec<DVector<f64>> {
        let n = self.intrinsic_dim;
        let raw = match &self.derivatives {
            Derivatives::Analytic { second, .. } => second(u),
            Derivatives::FiniteDifference { second_rel, .. } => {
                let h = self.steps(*second_rel);
                let center = self.raw_point(u);
                let mut out = vec![DVector::zeros(self.base_ambient_dim); n * n];
                let mut w = u.to_vec();
                for i in 0..n {
                    w[i] = u[i] + h[i];
                    let plus = self.raw_point(&w);
                    w[i] = u[i] - h[i];
                    let minus = self.raw_point(&w);
                    w[i] = u[i];
                    out[i * n + i] = (plus - &center * 2.0 + minus) / (h[i] * h[i]);
                    for j in (i + 1)..n {
                        let mut corner = |si: f64, sj: f64| {
                            w[i] = u[i] + si * h[i];
                            w[j] = u[j] + sj * h[j];
                            let p = self.raw_point(&w);
                            w[i] = u[i];
                            w[j] = u[j];
                            p
                        };
                        let pp = corner(1.0, 1.0);
                        let pm = corner(1.0, -1.0);
                        let mp = corner(-1.0, 1.0);
                        let mm = corner(-1.0, -1.0);
                        let mixed = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
                        out[i * n + j] = mixed.clone();
                        out[j * n + i] = mixed;
                    }
                }
                out
            }
        };
        raw.into_iter().map(|d| self.apply_vector(d)).collect()
    }

    fn estimate_scale(&self) -> f64 {
        // RMS distance from the image of the domain center over a coarse grid.
        let n = self.intrinsic_dim;
        let per_axis = 5usize;
        let c = self.raw_point(&self.center());
        let total = per_axis.pow(n as u32);
        let mut acc = 0.0;
        let mut u = vec![0.0; n];
        for idx in 0..total {
            let mut k = idx;
            for (axis, ui) in u.iter_mut().enumerate() {
                let (a, b) = self.domain[axis];
                let t = (k % per_axis) as f64 / (per_axis - 1) as f64;
                *ui = a + t * (b - a);
                k /= per_axis;
            }
            acc += (self.raw_point(&u) - &c).norm_squared();
        }
        let rms = (acc / total as f64).sqrt();
        if rms.is_finite() && rms > 0.0 {
            rms
        } else {
            1.0
        }
    }

    fn check_seams(&self) -> Result<()> {
        let n = self.intrinsic_dim;
        let probes = [0.2, 0.5, 0.7];
        for axis in (0..n).filter(|&i| self.periodic[i]) {
            for &t in &probes {
                let mut u: Vec<f64> = self
                    .domain
                    .iter()
                    .map(|&(a, b)| a + t * (b - a))
                    .collect();
                u[axis] = self.domain[axis].0;
                let lo = self.raw_point(&u);
                u[axis] = self.domain[axis].1;
                let hi = self.raw_point(&u);
                let gap = (lo - hi).amax();
                if gap > PERIODIC_TOL * self.scale.max(1.0) {
                    return Err(Error::BadParameter(format!(
                        "axis {axis} is flagged periodic but the seam gap is {gap:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Pointwise first and second order data of the immersion.
#[derive(Clone, Debug)]
pub struct GeometrySample {
    pub position: DVector<f64>,
    /// `(m+1) x n` tangent partials.
    pub frame: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub inv_metric: DMatrix<f64>,
    pub area_element: f64,
    pub second_partials: Vec<DVector<f64>>,
    pub mean_curvature: DVector<f64>,
    pub projector: DMatrix<f64>,
}

impl GeometrySample {
    pub fn intrinsic_dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }
}

/// Metric, inverse metric and area element from a tangent frame.
fn metric_data(
    chart: &ImmersedChart,
    u: &[f64],
    frame: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let n = frame.ncols();
    let metric = frame.transpose() * frame;
    let threshold = DEGENERACY_FACTOR * chart.scale.powi(2 * n as i32);
    let degenerate = |det: f64| Error::DegenerateImmersion {
        at: u.to_vec(),
        det,
        threshold,
    };
    let chol = nalgebra::Cholesky::new(metric.clone()).ok_or_else(|| degenerate(0.0))?;
    let det: f64 = chol.l_dirty().diagonal().iter().map(|d| d * d).product();
    if !(det > threshold) {
        return Err(degenerate(det));
    }
    let inv = chol.inverse();
    Ok((metric, inv, det.sqrt()))
}

/// Evaluates position, frame, metric, projector and mean curvature at `u`.
pub fn eval_frame(chart: &ImmersedChart, u: &[f64]) -> Result<GeometrySample> {
    if !chart.contains(u) {
        return Err(Error::OutOfDomain { at: u.to_vec() });
    }
    let position = chart.point(u);
    let frame = chart.first_partials(u);
    let (metric, inv_metric, area_element) = metric_data(chart, u, &frame)?;
    let projector = projector_from_frame(&frame);
    let second_partials = chart.second_partials(u);
    let mean_curvature = mean_curvature_from(&projector, &inv_metric, &second_partials);
    Ok(GeometrySample {
        position,
        frame,
        metric,
        inv_metric,
        area_element,
        second_partials,
        mean_curvature,
        projector,
    })
}

/// Position and area element only; used where curvature is not needed.
pub(crate) fn eval_area(chart: &ImmersedChart, u: &[f64]) -> Result<(DVector<f64>, f64)> {
    if !chart.contains(u) {
        return Err(Error::OutOfDomain { at: u.to_vec() });
    }
    let frame = chart.first_partials(u);
    let (_, _, area) = metric_data(chart, u, &frame)?;
    Ok((chart.point(u), area))
}

fn mean_curvature_from(
    projector: &DMatrix<f64>,
    inv_metric: &DMatrix<f64>,
    second_partials: &[DVector<f64>],
) -> DVector<f64> {
    let n = inv_metric.nrows();
    let dim = projector.nrows();
    let mut trace = DVector::zeros(dim);
    for i in 0..n {
        for j in 0..n {
            trace.axpy(inv_metric[(i, j)], &second_partials[i * n + j], 1.0);
        }
    }
    let normal = &trace - projector * &trace;
    normal / n as f64
}

/// `H = (1/n) g^{ij} (d^2 psi / du_i du_j)^perp`, recomputed from the sample.
pub fn mean_curvature_vector(sample: &GeometrySample) -> DVector<f64> {
    mean_curvature_from(
        &tangent_projector(sample),
        &sample.inv_metric,
        &sample.second_partials,
    )
}

/// `P = E G^-1 E^T`, the orthogonal projector onto the tangent space.
pub fn tangent_projector(sample: &GeometrySample) -> DMatrix<f64> {
    projector_from_frame(&sample.frame)
}

// Formed as Q Q^T from a thin QR of the frame; E G^-1 E^T loses digits
// when the metric is badly conditioned (near a pole of a spherical chart).
fn projector_from_frame(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let q = frame.clone().qr().q();
    &q * q.transpose()
}

pub fn tangential_component(sample: &GeometrySample, w: &DVector<f64>) -> DVector<f64> {
    &sample.projector * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit_sphere() -> ImmersedChart {
        ImmersedChart::new(3, vec![(0.0, PI), (0.0, 2.0 * PI)], vec![false, true], |u| {
            let (st, ct) = u[0].sin_cos();
            let (sp, cp) = u[1].sin_cos();
            DVector::from_vec(vec![st * cp, st * sp, ct])
        })
        .unwrap()
    }

    #[test]
    fn sphere_equator_finite_differences() {
        let chart = unit_sphere();
        let s = eval_frame(&chart, &[FRAC_PI_2, 0.0]).unwrap();
        assert!((s.area_element - 1.0).abs() < 1e-9);
        assert!((s.projector.trace() - 2.0).abs() < 1e-10);
        // H = -psi, up to finite-difference error
        assert!((&s.mean_curvature + &s.position).norm() < 1e-6);
    }

    #[test]
    fn rejects_points_outside_domain() {
        let chart = unit_sphere();
        let err = eval_frame(&chart, &[4.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
    }

    #[test]
    fn detects_degenerate_immersion() {
        let chart = ImmersedChart::new(
            3,
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![false, false],
            |u| DVector::from_vec(vec![u[0], u[0], 0.0 * u[1]]),
        )
        .unwrap();
        let err = eval_frame(&chart, &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::DegenerateImmersion { .. }));
    }

    #[test]
    fn rejects_broken_seam() {
        let err = ImmersedChart::new(
            3,
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![true, false],
            |u| DVector::from_vec(vec![u[0], u[1], 0.0]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadParameter(_)));
    }

    #[test]
    fn rejects_curves() {
        let err = ImmersedChart::new(2, vec![(0.0, 1.0)], vec![false], |u| {
            DVector::from_vec(vec![u[0], 0.0])
        })
        .unwrap_err();
        assert!(matches!(err, Error::BadParameter(_)));
    }

    #[test]
    fn tangential_split_is_orthogonal() {
        let chart = unit_sphere();
        let s = eval_frame(&chart, &[0.7, 1.3]).unwrap();
        let w = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let t = tangential_component(&s, &w);
        let nrm = &w - &t;
        assert!((w.norm_squared() - t.norm_squared() - nrm.norm_squared()).abs() < 1e-12);
    }
}
