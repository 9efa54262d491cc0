//! Triangle meshes, the cotangent Laplace-Beltrami operator, and a first
//! eigenvalue solver used to check that computed bounds dominate `lambda_1`.
//!
//! Stiffness uses cotangent edge weights, mass is lumped (one third of each
//! incident triangle's area). Only edge lengths enter, so meshes in any
//! ambient dimension are handled the same way.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::ImmersedChart;
use crate::error::{Error, Result};

const DEGENERATE_AREA: f64 = 1e-14;
const WELD_TOL: f64 = 1e-9;
/// Meshes below this vertex count use the dense eigensolver.
pub const DENSE_LIMIT: usize = 3000;
const BLOCK_SIZE: usize = 8;
const MAX_ITER: usize = 1000;
const RESIDUAL_TOL: f64 = 1e-9;
const SEED: u64 = 0x5b1_1a3b_da01;

#[derive(Clone, Debug)]
pub struct TriMesh {
    dim: usize,
    /// Flat, `dim` coordinates per vertex.
    vertices: Vec<f64>,
    triangles: Vec<[usize; 3]>,
    /// `(i, j) -> (cot a + cot b) / 2` with `i < j`.
    weights: BTreeMap<(usize, usize), f64>,
    masses: Vec<f64>,
    total_area: f64,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TriMesh {
    pub fn new(dim: usize, vertices: Vec<f64>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if dim == 0 || vertices.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into {dim}-dimensional vertices",
                vertices.len()
            )));
        }
        let nv = vertices.len() / dim;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&k| k >= nv)) {
            return Err(Error::BadParameter(format!(
                "triangle {t:?} references a vertex beyond {nv}"
            )));
        }
        let scale = bounding_diagonal(dim, &vertices).max(f64::MIN_POSITIVE);
        let mut weights = BTreeMap::new();
        let mut masses = vec![0.0; nv];
        let mut total_area = 0.0;
        for (index, tri) in triangles.iter().enumerate() {
            let p = |k: usize| &vertices[tri[k] * dim..tri[k] * dim + dim];
            let e01 = sub(p(1), p(0));
            let e02 = sub(p(2), p(0));
            let e12 = sub(p(2), p(1));
            let (l01, l02) = (dot(&e01, &e01), dot(&e02, &e02));
            let cross2 = (l01 * l02 - dot(&e01, &e02).powi(2)).max(0.0);
            let area = 0.5 * cross2.sqrt();
            let repeated = tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2];
            if repeated || !(area > DEGENERATE_AREA * scale * scale) {
                return Err(Error::DegenerateTriangle { index, area });
            }
            let twice = 2.0 * area;
            // cotangent at each corner: <e, f> / |e x f|
            let cot0 = dot(&e01, &e02) / twice;
            let cot1 = -dot(&e01, &e12) / twice;
            let cot2 = dot(&e02, &e12) / twice;
            for (a, b, cot) in [(1, 2, cot0), (0, 2, cot1), (0, 1, cot2)] {
                let (i, j) = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                *weights.entry((i, j)).or_insert(0.0) += 0.5 * cot;
            }
            for &k in tri {
                masses[k] += area / 3.0;
            }
            total_area += area;
        }
        Ok(TriMesh {
            dim,
            vertices,
            triangles,
            weights,
            masses,
            total_area,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn vertex(&self, k: usize) -> &[f64] {
        &self.vertices[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn cotangent_weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.weights
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        reached == n
    }

    /// Off-diagonal stiffness neighbors `(j, w_ij)` per vertex, sorted by `j`.
    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for (&(i, j), &w) in &self.weights {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for row in &mut adj {
            row.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    /// Applies an affine map `x -> linear x + offset` to every vertex.
    pub fn transformed(&self, linear: &DMatrix<f64>, offset: &[f64]) -> Result<Self> {
        if linear.ncols() != self.dim || linear.nrows() != offset.len() {
            return Err(Error::DimensionMismatch("affine map does not fit the mesh".into()));
        }
        let out_dim = linear.nrows();
        let mut vertices = Vec::with_capacity(self.vertex_count() * out_dim);
        for k in 0..self.vertex_count() {
            let p = nalgebra::DVector::from_column_slice(self.vertex(k));
            let q = linear * p;
            vertices.extend(q.iter().zip(offset).map(|(x, o)| x + o));
        }
        TriMesh::new(out_dim, vertices, self.triangles.clone())
    }
}

fn bounding_diagonal(dim: usize, vertices: &[f64]) -> f64 {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in vertices.chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Grid triangulation of a two-dimensional chart.
///
/// Periodic axes wrap (seam vertices identified); on non-periodic axes an
/// end row whose points all coincide (a pole) collapses to one vertex.
pub fn triangulate_chart(chart: &ImmersedChart, nu: usize, nv: usize) -> Result<TriMesh> {
    if chart.intrinsic_dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "triangulation needs a surface chart, got dimension {}",
            chart.intrinsic_dim()
        )));
    }
    if nu < 8 || nv < 8 {
        return Err(Error::BadParameter(format!(
            "mesh resolution {nu}x{nv} below the 8x8 minimum"
        )));
    }
    let counts = [nu, nv];
    let periodic = chart.periodic();
    let domain = chart.domain();
    let rows: Vec<usize> = (0..2)
        .map(|a| if periodic[a] { counts[a] } else { counts[a] + 1 })
        .collect();
    let coord = |axis: usize, k: usize| {
        let (a, b) = domain[axis];
        a + (b - a) * k as f64 / counts[axis] as f64
    };
    let points: Vec<Vec<_>> = (0..rows[0])
        .map(|i| {
            (0..rows[1])
                .map(|j| chart.point(&[coord(0, i), coord(1, j)]))
                .collect()
        })
        .collect();
    let tol = WELD_TOL * chart.scale();
    let collapsed = |cells: Vec<&nalgebra::DVector<f64>>| {
        cells.iter().all(|p| (*p - cells[0]).amax() <= tol)
    };
    // For each axis, which end rows collapse to a single point.
    let mut collapse = [[false; 2]; 2];
    for axis in 0..2 {
        if periodic[axis] {
            continue;
        }
        for (end, idx) in [0, rows[axis] - 1].into_iter().enumerate() {
            let line: Vec<_> = if axis == 0 {
                points[idx].iter().collect()
            } else {
                points.iter().map(|r| &r[idx]).collect()
            };
            collapse[axis][end] = collapsed(line);
        }
    }
    let mut ids = vec![vec![usize::MAX; rows[1]]; rows[0]];
    let mut vertices = Vec::new();
    let dim = chart.ambient_dim();
    let mut pole_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for i in 0..rows[0] {
        for j in 0..rows[1] {
            let pole = if collapse[0][0] && i == 0 {
                Some((0, 0))
            } else if collapse[0][1] && i == rows[0] - 1 {
                Some((0, 1))
            } else if collapse[1][0] && j == 0 {
                Some((1, 0))
            } else if collapse[1][1] && j == rows[1] - 1 {
                Some((1, 1))
            } else {
                None
            };
            let next = vertices.len() / dim;
            let id = match pole {
                Some(key) => *pole_ids.entry(key).or_insert_with(|| {
                    vertices.extend(points[i][j].iter());
                    next
                }),
                None => {
                    vertices.extend(points[i][j].iter());
                    next
                }
            };
            ids[i][j] = id;
        }
    }
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..counts[0] {
        let i1 = (i + 1) % rows[0];
        for j in 0..counts[1] {
            let j1 = (j + 1) % rows[1];
            let (a, b, c, d) = (ids[i][j], ids[i1][j], ids[i1][j1], ids[i][j1]);
            for t in [[a, b, c], [a, c, d]] {
                if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                    triangles.push(t);
                }
            }
        }
    }
    TriMesh::new(dim, vertices, triangles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense below [`DENSE_LIMIT`] vertices, shift-invert otherwise.
    #[default]
    Auto,
    Dense,
    ShiftInvert,
}

/// Smallest nonzero eigenvalue of `K x = lambda M x`.
pub fn first_eigenvalue(mesh: &TriMesh) -> Result<f64> {
    first_eigenvalue_with(mesh, EigenMethod::Auto)
}

pub fn first_eigenvalue_with(mesh: &TriMesh, method: EigenMethod) -> Result<f64> {
    if !mesh.is_closed() {
        return Err(Error::MeshNotClosed("some edge is not shared by two triangles".into()));
    }
    if !mesh.is_connected() {
        return Err(Error::MeshNotClosed("mesh has several components".into()));
    }
    let n = mesh.vertex_count();
    let dense = match method {
        EigenMethod::Auto => n < DENSE_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::ShiftInvert => false,
    };
    if dense || n <= BLOCK_SIZE + 1 {
        dense_first_eigenvalue(mesh)
    } else {
        shift_invert_first_eigenvalue(mesh)
    }
}

fn dense_first_eigenvalue(mesh: &TriMesh) -> Result<f64> {
    let n = mesh.vertex_count();
    let inv_sqrt: Vec<f64> = mesh.masses.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (&(i, j), &w) in &mesh.weights {
        let s = w * inv_sqrt[i] * inv_sqrt[j];
        a[(i, j)] -= s;
        a[(j, i)] -= s;
        a[(i, i)] += w * inv_sqrt[i] * inv_sqrt[i];
        a[(j, j)] += w * inv_sqrt[j] * inv_sqrt[j];
    }
    let mut values: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    let scale = values[n - 1].abs().max(f64::MIN_POSITIVE);
    if values[0].abs() > 1e-8 * scale {
        return Err(Error::SolverFailure {
            iterations: 0,
            residual: values[0].abs() / scale,
        });
    }
    Ok(values[1])
}

/// Symmetric sparse matrix in row form, each row holding `(col, value)`
/// pairs including the diagonal.
struct SparseSym {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }
}

fn stiffness(mesh: &TriMesh) -> SparseSym {
    let adj = mesh.adjacency();
    let rows = adj
        .into_iter()
        .enumerate()
        .map(|(i, nb)| {
            let diag: f64 = nb.iter().map(|&(_, w)| w).sum();
            let mut row: Vec<(usize, f64)> = nb.into_iter().map(|(j, w)| (j, -w)).collect();
            row.push((i, diag));
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    SparseSym { rows }
}

/// Reverse Cuthill-McKee ordering of a connected graph; `perm[new] = old`.
fn reverse_cuthill_mckee(rows: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = rows.len();
    let degree: Vec<usize> = rows.iter().map(Vec::len).collect();
    let start = (0..n).min_by_key(|&k| (degree[k], k)).unwrap_or(0);
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[start] = true;
    order.push(start);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        let mut next: Vec<usize> = rows[v]
            .iter()
            .map(|&(j, _)| j)
            .filter(|&j| !seen[j])
            .collect();
        next.sort_by_key(|&j| (degree[j], j));
        for j in next {
            if !seen[j] {
                seen[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor stored by rows over each row's envelope.
struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix given in permuted row form.
    fn factor(rows: &[Vec<(usize, f64)>]) -> Option<Self> {
        let n = rows.len();
        let first: Vec<usize> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut values = vec![0.0; total];
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in r.iter().filter(|&&(j, _)| j <= i) {
                values[start[i] + j - first[i]] = v;
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let s: f64 = {
                    let ri = &values[start[i] + k0 - fi..start[i] + j - fi];
                    let rj = &values[start[j] + k0 - fj..start[j] + j - fj];
                    ri.iter().zip(rj).map(|(a, b)| a * b).sum()
                };
                let ljj = values[start[j + 1] - 1];
                let idx = start[i] + j - fi;
                values[idx] = (values[idx] - s) / ljj;
            }
            let row = &values[start[i]..start[i + 1] - 1];
            let s: f64 = row.iter().map(|x| x * x).sum();
            let d = values[start[i + 1] - 1] - s;
            if !(d > 0.0) {
                return None;
            }
            values[start[i + 1] - 1] = d.sqrt();
        }
        Some(EnvelopeCholesky {
            first,
            start,
            values,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1] - 1];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.values[self.start[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            x[i] /= self.values[self.start[i + 1] - 1];
            let xi = x[i];
            let row = &self.values[self.start[i]..self.start[i + 1] - 1];
            for (xk, l) in x[fi..i].iter_mut().zip(row) {
                *xk -= l * xi;
            }
        }
    }
}

/// Block inverse iteration on `(K + s M)^-1 M` with the constant mode
/// projected out and Rayleigh-Ritz on `(K, M)` each sweep.
fn shift_invert_first_eigenvalue(mesh: &TriMesh) -> Result<f64> {
    let n = mesh.vertex_count();
    let mass = &mesh.masses;
    let k_mat = stiffness(mesh);
    let trace_k: f64 = k_mat
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, v)| v))
        .sum();
    let shift = trace_k / mesh.total_area / n as f64;

    let perm = reverse_cuthill_mckee(&k_mat.rows);
    let mut inverse = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let shifted: Vec<Vec<(usize, f64)>> = perm
        .iter()
        .map(|&old| {
            k_mat.rows[old]
                .iter()
                .map(|&(j, v)| {
                    let v = if j == old { v + shift * mass[old] } else { v };
                    (inverse[j], v)
                })
                .collect()
        })
        .collect();
    let chol = EnvelopeCholesky::factor(&shifted).ok_or(Error::SolverFailure {
        iterations: 0,
        residual: f64::NAN,
    })?;

    let total_mass: f64 = mass.iter().sum();
    let deflate = |x: &mut [f64]| {
        let c: f64 = x.iter().zip(mass).map(|(a, m)| a * m).sum::<f64>() / total_mass;
        x.iter_mut().for_each(|a| *a -= c);
    };
    let m_dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(mass).map(|((x, y), m)| x * y * m).sum()
    };
    let m_orthonormalize = |block: &mut Vec<Vec<f64>>| {
        for _ in 0..2 {
            for c in 0..block.len() {
                for p in 0..c {
                    let s = m_dot(&block[c], &block[p]);
                    let (head, tail) = block.split_at_mut(c);
                    tail[0].iter_mut().zip(&head[p]).for_each(|(x, y)| *x -= s * y);
                }
                let nrm = m_dot(&block[c], &block[c]).sqrt();
                block[c].iter_mut().for_each(|x| *x /= nrm);
            }
        }
    };

    let width = BLOCK_SIZE.min(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut block: Vec<Vec<f64>> = (0..width)
        .map(|c| {
            (0..n)
                .map(|k| {
                    if c < mesh.dim {
                        mesh.vertex(k)[c]
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    for col in &mut block {
        deflate(col);
    }
    m_orthonormalize(&mut block);

    let mut kx = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        for col in &mut block {
            let mut rhs: Vec<f64> = perm.iter().map(|&old| col[old] * mass[old]).collect();
            chol.solve_in_place(&mut rhs);
            for (new, &old) in perm.iter().enumerate() {
                col[old] = rhs[new];
            }
            deflate(col);
        }
        m_orthonormalize(&mut block);
        let mut reduced = DMatrix::zeros(width, width);
        let kblock: Vec<Vec<f64>> = block
            .iter()
            .map(|col| {
                let mut out = vec![0.0; n];
                k_mat.mul(col, &mut out);
                out
            })
            .collect();
        for a in 0..width {
            for b in 0..width {
                reduced[(a, b)] = block[a].iter().zip(&kblock[b]).map(|(x, y)| x * y).sum();
            }
        }
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..width).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (a, col) in block.iter().enumerate() {
                    let z = eig.eigenvectors[(a, c)];
                    v.iter_mut().zip(col).for_each(|(x, y)| *x += z * y);
                }
                v
            })
            .collect();
        let theta = eig.eigenvalues[order[0]];
        k_mat.mul(&block[0], &mut kx);
        let r2: f64 = kx
            .iter()
            .zip(&block[0])
            .zip(mass)
            .map(|((k, x), m)| (k - theta * m * x).powi(2) / m)
            .sum();
        residual = r2.sqrt() / theta.abs().max(f64::MIN_POSITIVE);
        if residual < RESIDUAL_TOL {
            return Ok(theta);
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_ITER,
        residual,
    })
}

/// Writes an ASCII OFF file (three-dimensional meshes only).
pub fn save_off(mesh: &TriMesh, path: &Path) -> Result<()> {
    if mesh.dim != 3 {
        return Err(Error::DimensionMismatch(format!(
            "OFF stores 3D vertices, mesh has dimension {}",
            mesh.dim
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.triangles.len())?;
    for p in mesh.vertices.chunks_exact(3) {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_off(path: &Path) -> Result<TriMesh> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(k, l)| l.map(|s| (k + 1, s)))
        .filter(|r| match r {
            Ok((_, s)) => {
                let body = s.split('#').next().unwrap_or("").trim();
                !body.is_empty()
            }
            Err(_) => true,
        });
    let mut last_line = 0;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next_tokens = |what: &str, last: &mut usize| -> Result<(usize, Vec<String>)> {
        match lines.next() {
            Some(Ok((k, s))) => {
                *last = k;
                let body = s.split('#').next().unwrap_or("");
                Ok((k, body.split_whitespace().map(str::to_string).collect()))
            }
            Some(Err(e)) => Err(e.into()),
            None => Err(parse_err(*last + 1, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (line, header) = next_tokens("OFF header", &mut last_line)?;
    if header.first().map(String::as_str) != Some("OFF") {
        return Err(parse_err(line, "missing OFF header".into()));
    }
    let (line, counts) = if header.len() > 1 {
        (line, header[1..].to_vec())
    } else {
        next_tokens("vertex/face counts", &mut last_line)?
    };
    let count = |k: usize| -> Result<usize> {
        counts
            .get(k)
            .ok_or_else(|| parse_err(line, "expected vertex and face counts".into()))?
            .parse()
            .map_err(|e| parse_err(line, format!("bad count: {e}")))
    };
    let (nv, nf) = (count(0)?, count(1)?);
    let mut vertices = Vec::with_capacity(3 * nv);
    for _ in 0..nv {
        let (line, toks) = next_tokens("vertex line", &mut last_line)?;
        if toks.len() < 3 {
            return Err(parse_err(line, format!("vertex needs 3 coordinates, got {}", toks.len())));
        }
        for t in &toks[..3] {
            vertices.push(
                t.parse::<f64>()
                    .map_err(|e| parse_err(line, format!("bad coordinate '{t}': {e}")))?,
            );
        }
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, toks) = next_tokens("face line", &mut last_line)?;
        let ints: Vec<usize> = toks
            .iter()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(line, format!("bad face entry: {e}")))?;
        let degree = *ints
            .first()
            .ok_or_else(|| parse_err(line, "empty face line".into()))?;
        if degree != 3 {
            return Err(Error::NonTriangleFace {
                path: path.to_path_buf(),
                line,
                degree,
            });
        }
        if ints.len() != 4 {
            return Err(parse_err(line, format!("triangle needs 3 indices, got {}", ints.len() - 1)));
        }
        if let Some(&bad) = ints[1..].iter().find(|&&k| k >= nv) {
            return Err(parse_err(line, format!("vertex index {bad} out of range")));
        }
        triangles.push([ints[1], ints[2], ints[3]]);
    }
    TriMesh::new(3, vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> TriMesh {
        TriMesh::new(
            3,
            vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_topology_and_mass() {
        let m = tetrahedron();
        assert!(m.is_closed());
        assert!(m.is_connected());
        assert_eq!(m.euler_characteristic(), 2);
        let mass: f64 = m.masses().iter().sum();
        assert!((mass - m.total_area()).abs() < 1e-12 * m.total_area());
    }

    #[test]
    fn equilateral_cotangent_weight() {
        let m = tetrahedron();
        // regular tetrahedron: every angle 60 degrees, two triangles per edge
        let expected = 1.0 / 3f64.sqrt();
        for w in m.cotangent_weights().values() {
            assert!((w - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_triangle() {
        let err = TriMesh::new(
            3,
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0],
            vec![[0, 1, 2]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { index: 0, .. }));
    }

    #[test]
    fn open_mesh_is_rejected_by_solver() {
        let m = TriMesh::new(
            3,
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(!m.is_closed());
        assert!(matches!(first_eigenvalue(&m), Err(Error::MeshNotClosed(_))));
    }

    #[test]
    fn envelope_cholesky_solves_tridiagonal() {
        let n = 12;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i, 4.0)];
                if i > 0 {
                    r.insert(0, (i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let chol = EnvelopeCholesky::factor(&rows).unwrap();
        let x_true: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
        let a = SparseSym { rows };
        let mut b = vec![0.0; n];
        a.mul(&x_true, &mut b);
        chol.solve_in_place(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = tetrahedron();
        let k = stiffness(&m);
        let mut p = reverse_cuthill_mckee(&k.rows);
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
