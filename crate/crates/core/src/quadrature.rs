//! Tensor-product quadrature over chart domains and assembly of the global
//! integrals the bounds are built from.
//!
//! Periodic axes use the trapezoidal rule, others Gauss-Legendre. Point
//! contributions are reduced in fixed blocks with pairwise summation, so the
//! result does not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chart::{eval_area, eval_frame, GeometrySample, ImmersedChart};
use crate::error::{Error, Result};

/// Grid used for acceptance-grade runs.
pub const REFERENCE_POINTS: usize = 256;
/// Grid used for fast property checks.
pub const FAST_POINTS: usize = 64;

pub const MIN_POINTS: usize = 4;
pub const MAX_POINTS: usize = 4096;

const BLOCK: usize = 512;
const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub periodic: bool,
}

impl AxisRule {
    /// `count` equally spaced nodes, the right endpoint identified with the left.
    pub fn trapezoidal(a: f64, b: f64, count: usize) -> Self {
        let h = (b - a) / count as f64;
        AxisRule {
            nodes: (0..count).map(|k| a + k as f64 * h).collect(),
            weights: vec![h; count],
            periodic: true,
        }
    }

    pub fn gauss_legendre(a: f64, b: f64, count: usize) -> Self {
        let (x, w) = gauss_legendre_unit(count);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        AxisRule {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|wi| half * wi).collect(),
            periodic: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre_unit(count: usize) -> (Vec<f64>, Vec<f64>) {
    let n = count;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let legendre = |x: f64| -> (f64, f64) {
        // (P_n(x), P_n'(x)) by the three-term recurrence.
        let (mut p0, mut p1) = (1.0, x);
        if n == 0 {
            return (1.0, 0.0);
        }
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub axes: Vec<AxisRule>,
}

impl QuadratureGrid {
    pub fn new(chart: &ImmersedChart, points_per_axis: &[usize]) -> Result<Self> {
        if points_per_axis.len() != chart.intrinsic_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid sizes for a {}-dimensional chart",
                points_per_axis.len(),
                chart.intrinsic_dim()
            )));
        }
        let axes = points_per_axis
            .iter()
            .zip(chart.domain())
            .zip(chart.periodic())
            .map(|((&count, &(a, b)), &periodic)| {
                if !(MIN_POINTS..=MAX_POINTS).contains(&count) {
                    return Err(Error::BadParameter(format!(
                        "grid size {count} outside {MIN_POINTS}..={MAX_POINTS}"
                    )));
                }
                Ok(if periodic {
                    AxisRule::trapezoidal(a, b, count)
                } else {
                    AxisRule::gauss_legendre(a, b, count)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuadratureGrid { axes })
    }

    pub fn uniform(chart: &ImmersedChart, count: usize) -> Result<Self> {
        Self::new(chart, &vec![count; chart.intrinsic_dim()])
    }

    pub fn points_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(AxisRule::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(AxisRule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same rules with every axis resolution doubled (capped).
    pub fn doubled(&self, chart: &ImmersedChart) -> Result<Self> {
        let counts: Vec<usize> = self
            .points_per_axis()
            .iter()
            .map(|&c| (2 * c).min(MAX_POINTS))
            .collect();
        Self::new(chart, &counts)
    }

    /// Parameter point and weight of flat index `idx` (last axis fastest).
    pub fn point(&self, mut idx: usize, u: &mut [f64]) -> f64 {
        let mut weight = 1.0;
        for (axis, rule) in self.axes.iter().enumerate().rev() {
            let k = idx % rule.len();
            idx /= rule.len();
            u[axis] = rule.nodes[k];
            weight *= rule.weights[k];
        }
        weight
    }
}

fn pairwise_rows(rows: &[f64], width: usize, out: &mut [f64]) {
    let count = rows.len() / width;
    if count <= 8 {
        out.iter_mut().for_each(|o| *o = 0.0);
        for row in rows.chunks_exact(width) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += r;
            }
        }
        return;
    }
    let half = count / 2;
    let (left, right) = rows.split_at(half * width);
    let mut tmp = vec![0.0; width];
    pairwise_rows(left, width, out);
    pairwise_rows(right, width, &mut tmp);
    for (o, t) in out.iter_mut().zip(&tmp) {
        *o += t;
    }
}

/// Sums `width`-wide per-point contributions over the grid in a fixed order.
fn reduce_grid<F>(grid: &QuadratureGrid, n: usize, width: usize, contribution: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64, &mut [f64]) -> Result<()> + Sync,
{
    let total = grid.len();
    let blocks = total.div_ceil(BLOCK);
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(total);
            let mut rows = vec![0.0; (end - start) * width];
            let mut u = vec![0.0; n];
            for (idx, row) in (start..end).zip(rows.chunks_exact_mut(width)) {
                let w = grid.point(idx, &mut u);
                contribution(&u, w, row)?;
            }
            let mut sum = vec![0.0; width];
            pairwise_rows(&rows, width, &mut sum);
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = partials.into_iter().flatten().collect();
    let mut out = vec![0.0; width];
    pairwise_rows(&flat, width, &mut out);
    Ok(out)
}

/// `sum_k w_k f(sample_k) dA_k` over the grid.
pub fn integrate_scalar_field<F>(chart: &ImmersedChart, grid: &QuadratureGrid, f: F) -> Result<f64>
where
    F: Fn(&GeometrySample) -> f64 + Sync,
{
    let out = reduce_grid(grid, chart.intrinsic_dim(), 1, |u, w, row| {
        let s = eval_frame(chart, u)?;
        row[0] = w * s.area_element * f(&s);
        Ok(())
    })?;
    Ok(out[0])
}

/// Volume only, from first partials.
pub fn volume(chart: &ImmersedChart, grid: &QuadratureGrid) -> Result<f64> {
    let out = reduce_grid(grid, chart.intrinsic_dim(), 1, |u, w, row| {
        let (_, area) = eval_area(chart, u)?;
        row[0] = w * area;
        Ok(())
    })?;
    Ok(out[0])
}

/// Global integrals of a compact immersion.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    /// Intrinsic dimension `n`.
    pub n: usize,
    /// Ambient dimension `m + 1`.
    pub ambient_dim: usize,
    pub vol: f64,
    /// `int |H|^2 dV`.
    pub h2: f64,
    /// `int H H^T dV`.
    pub a_h: DMatrix<f64>,
    /// `int P dV`, so `v^T A_T v = int |v^T|^2 dV`.
    pub a_t: DMatrix<f64>,
    /// `int sym(psi H^T) dV`.
    pub a_c: DMatrix<f64>,
    /// `int psi dV` (not normalized by the volume).
    pub centroid: DVector<f64>,
    /// `int (1 + <H, psi>) dV`.
    pub minkowski_residual: f64,
}

impl IntegralSet {
    /// Relative deviation of `A_C` from `-A_T / n`.
    pub fn ac_identity_residual(&self) -> f64 {
        let target = &self.a_t / -(self.n as f64);
        (&self.a_c - &target).norm() / target.norm()
    }

    /// `|trace(A_H) - h2| / h2`.
    pub fn h_trace_residual(&self) -> f64 {
        (self.a_h.trace() - self.h2).abs() / self.h2.abs().max(f64::MIN_POSITIVE)
    }

    /// `|trace(A_T) - n vol| / (n vol)`.
    pub fn t_trace_residual(&self) -> f64 {
        let nv = self.n as f64 * self.vol;
        (self.a_t.trace() - nv).abs() / nv
    }

    /// Center of gravity `int psi dV / vol`.
    pub fn center_of_gravity(&self) -> DVector<f64> {
        &self.centroid / self.vol
    }
}

/// Assembles every global integral in one pass, with a one-doubling
/// convergence guard on the volume.
pub fn assemble_integrals(chart: &ImmersedChart, grid: &QuadratureGrid) -> Result<IntegralSet> {
    let set = assemble_unchecked(chart, grid)?;
    let finer = grid.doubled(chart)?;
    if finer != *grid {
        let vol2 = volume(chart, &finer)?;
        let rel_change = (vol2 - set.vol).abs() / vol2.abs();
        if !(rel_change <= CONVERGENCE_TOL) {
            return Err(Error::NonConvergent { rel_change });
        }
    }
    Ok(set)
}

/// [`assemble_integrals`] without the grid-doubling guard.
pub fn assemble_unchecked(chart: &ImmersedChart, grid: &QuadratureGrid) -> Result<IntegralSet> {
    let n = chart.intrinsic_dim();
    let d = chart.ambient_dim();
    let dd = d * d;
    // Layout: vol, h2, <H,psi>, psi[d], HH^T[dd], P[dd], sym(psi H^T)[dd].
    let off_psi = 3;
    let off_h = off_psi + d;
    let off_t = off_h + dd;
    let off_c = off_t + dd;
    let width = off_c + dd;
    let sums = reduce_grid(grid, n, width, |u, w, row| {
        let s = eval_frame(chart, u)?;
        let dv = w * s.area_element;
        let h = &s.mean_curvature;
        let p = &s.position;
        row[0] = dv;
        row[1] = dv * h.norm_squared();
        row[2] = dv * h.dot(p);
        for i in 0..d {
            row[off_psi + i] = dv * p[i];
            for j in 0..d {
                row[off_h + i * d + j] = dv * h[i] * h[j];
                row[off_t + i * d + j] = dv * s.projector[(i, j)];
                row[off_c + i * d + j] = dv * 0.5 * (p[i] * h[j] + p[j] * h[i]);
            }
        }
        Ok(())
    })?;
    let matrix = |off: usize| DMatrix::from_row_slice(d, d, &sums[off..off + dd]);
    Ok(IntegralSet {
        n,
        ambient_dim: d,
        vol: sums[0],
        h2: sums[1],
        a_h: matrix(off_h),
        a_t: matrix(off_t),
        a_c: matrix(off_c),
        centroid: DVector::from_column_slice(&sums[off_psi..off_psi + d]),
        minkowski_residual: sums[0] + sums[2],
    })
}

/// Translates the chart so that its center of gravity sits at the origin.
pub fn recenter_chart(chart: &ImmersedChart, integrals: &IntegralSet) -> Result<ImmersedChart> {
    if !(integrals.vol > 0.0) {
        return Err(Error::BadParameter(format!(
            "cannot recenter a chart of volume {}",
            integrals.vol
        )));
    }
    chart.translated(&(-integrals.center_of_gravity()))
}
