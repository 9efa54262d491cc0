//! One function per subcommand; each returns the bytes to emit plus any
//! warnings that did not fit the chosen format.

use nalgebra::DVector;
use sbl_core::bounds::{
    gap_identities, pr1_bound, pr2_bound, q_eval, q_matrix, BoundReport, QForm,
};
use sbl_core::catalog::{make_shape, ShapeKind};
use sbl_core::chart::ImmersedChart;
use sbl_core::directions::sample_directions;
use sbl_core::mesh::{first_eigenvalue, load_off, save_off, triangulate_chart, TriMesh};
use sbl_core::quadrature::{assemble_integrals, IntegralSet, QuadratureGrid, REFERENCE_POINTS};

use crate::config::{CommandKind, Format, RunConfig, DEFAULT_MESH};
use crate::error::{CliError, CliResult};
use crate::report::*;

/// Points per axis on charts of dimension three or more, where the
/// reference 256 would mean tens of millions of samples.
pub const HIGH_DIM_POINTS: usize = 32;
/// Relative slack when comparing a mesh eigenvalue against bounds.
pub const DOMINATION_SLACK: f64 = 0.02;

/// Reference tori of the comparison table: one per sign regime of `Q`.
pub fn table_radii() -> [f64; 3] {
    [
        2f64.sqrt(),
        17f64.sqrt() / 4.0,
        3.0 / (2.0 * 2f64.sqrt()),
    ]
}

#[derive(Debug)]
pub struct CommandOutput {
    pub body: String,
    /// Diagnostics for stderr; JSON outputs carry them inline instead.
    pub warnings: Vec<String>,
}

pub fn execute(cfg: &RunConfig) -> CliResult<CommandOutput> {
    match cfg.command {
        CommandKind::Bounds => bounds(cfg),
        CommandKind::Scan => scan(cfg),
        CommandKind::PaperTable => paper_table(cfg),
        CommandKind::MeshLambda1 => mesh_lambda1(cfg),
        CommandKind::Qform => qform(cfg),
    }
}

fn grid_for(cfg: &RunConfig, chart: &ImmersedChart) -> CliResult<QuadratureGrid> {
    let n = chart.intrinsic_dim();
    let counts = match &cfg.grid {
        None if n == 2 => vec![REFERENCE_POINTS; n],
        None => vec![HIGH_DIM_POINTS; n],
        Some(g) if g.len() == 1 => vec![g[0]; n],
        Some(g) if g.len() == n => g.clone(),
        Some(g) => {
            return Err(CliError::usage(format!(
                "grid has {} axes but the {} chart has {n}",
                g.len(),
                cfg.shape.name()
            )))
        }
    };
    Ok(QuadratureGrid::new(chart, &counts)?)
}

fn check_directions(cfg: &RunConfig, dim: usize) -> CliResult<()> {
    for v in &cfg.directions {
        if v.len() != dim {
            return Err(CliError::usage(format!(
                "direction has {} coordinates; the {} lives in R^{dim}",
                v.len(),
                cfg.shape.name()
            )));
        }
    }
    Ok(())
}

/// The mesh requested by `--off` or `--mesh`, or `fallback` resolution.
fn mesh_for(
    cfg: &RunConfig,
    chart: &ImmersedChart,
    fallback: Option<(usize, usize)>,
) -> CliResult<Option<TriMesh>> {
    let mesh = if let Some(path) = &cfg.off {
        Some(load_off(path)?)
    } else if let Some((nu, nv)) = cfg.mesh.or(fallback) {
        if chart.intrinsic_dim() != 2 {
            return Err(CliError::usage(format!(
                "meshes need a surface; the {} chart is {}-dimensional",
                cfg.shape.name(),
                chart.intrinsic_dim()
            )));
        }
        Some(triangulate_chart(chart, nu, nv)?)
    } else {
        None
    };
    if let (Some(path), Some(m)) = (&cfg.save_off, &mesh) {
        save_off(m, path)?;
    }
    Ok(mesh)
}

fn torus_radius(kind: &ShapeKind) -> Option<f64> {
    match *kind {
        ShapeKind::Torus { r_major } => Some(r_major),
        _ => None,
    }
}

/// The torus family's `Q` vanishes at `R^2 = 9/8`, where the Reilly bound
/// is exactly 3/2. A value of `sqrt(2)/2` is in circulation for that
/// radius; point at the discrepancy rather than silently differ.
fn vanishing_torus_warning(kind: &ShapeKind, q: &QForm, reilly: f64) -> Option<String> {
    let r = torus_radius(kind)?;
    q.vanishes().then(|| {
        format!(
            "Q vanishes identically for the torus with R^2 = {}; the Reilly bound \
             R/(2 sqrt(R^2-1)) evaluates to {} here, not sqrt(2)/2 = {} as sometimes \
             stated for this radius",
            num(r * r),
            num(reilly),
            num(std::f64::consts::FRAC_1_SQRT_2)
        )
    })
}

fn coordinate_axes(dim: usize) -> Vec<DVector<f64>> {
    (0..dim)
        .map(|k| {
            let mut v = DVector::zeros(dim);
            v[k] = 1.0;
            v
        })
        .collect()
}

fn gap_residual_max(i: &IntegralSet, q: &QForm, extra: &[DVector<f64>]) -> CliResult<f64> {
    let mut worst = 0.0_f64;
    for v in coordinate_axes(i.ambient_dim).iter().chain(extra) {
        let g = gap_identities(i, q, v)?;
        worst = worst.max(g.pr1.abs());
        if let Some(r) = g.pr2 {
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

fn regime_label(q: &QForm, dim: usize) -> String {
    if q.vanishes() {
        return "Q vanishes".to_string();
    }
    // On a torus of revolution about e3, Q is c (v1^2 + v2^2 - 2 v3^2), so
    // its sign on the band v3^2 < 1/3 is the sign at e1.
    match q.sign_at(&coordinate_axes(dim)[0]) {
        s if s < 0 => "Q indefinite, negative on v3^2<1/3".to_string(),
        _ => "Q indefinite, positive on v3^2<1/3".to_string(),
    }
}

pub fn build_bound_report(cfg: &RunConfig) -> CliResult<BoundReportJson> {
    let chart = make_shape(&cfg.shape)?;
    check_directions(cfg, chart.ambient_dim())?;
    let grid = grid_for(cfg, &chart)?;
    let i = assemble_integrals(&chart, &grid)?;
    let mut report = BoundReport::compute(&i, &cfg.directions)?;
    if let Some(mesh) = mesh_for(cfg, &chart, None)? {
        report.mesh_lambda1 = Some(first_eigenvalue(&mesh)?);
    }

    let mut warnings = Vec::new();
    warnings.extend(vanishing_torus_warning(&cfg.shape, &report.q, report.reilly));
    if report.best_pr1.restricted {
        warnings.push(
            "A_T is singular (the submanifold lies in an affine subspace); best_pr1 \
             was minimized over the range of A_T"
                .to_string(),
        );
    }
    if report.q.trace_residual() > report.q.tau {
        warnings.push(format!(
            "trace(Q) = {} exceeds the zero threshold {}; the grid may be too coarse",
            num(report.q.trace_residual()),
            num(report.q.tau)
        ));
    }
    warnings.extend(report.domination_violations(DOMINATION_SLACK));

    let pair = |(v, b): &(DVector<f64>, f64)| DirectionValue {
        direction: vec_of(v),
        value: *b,
    };
    Ok(BoundReportJson {
        shape: cfg.shape.name().to_string(),
        params: cfg.shape.params(),
        grid: grid.points_per_axis(),
        reilly: report.reilly,
        pr1_at: report.pr1_at.iter().map(pair).collect(),
        pr2_at: report.pr2_at.iter().map(pair).collect(),
        best_pr1: BestPr1Json {
            value: report.best_pr1.value,
            direction: vec_of(&report.best_pr1.direction),
            attained: report.best_pr1.attained,
        },
        best_pr2: BestPr2Json {
            value: report.best_pr2.value,
            direction: vec_of(&report.best_pr2.direction),
        },
        q: QJson {
            matrix: rows(&report.q.matrix),
            eigenvalues: vec_of(&report.q.eigenvalues),
            inertia: report.q.inertia.as_array(),
            trace_residual: report.q.trace_residual(),
        },
        identities: IdentitiesJson {
            minkowski_residual: i.minkowski_residual,
            ac_identity_residual: i.ac_identity_residual(),
            gap_residual_max: gap_residual_max(&i, &report.q, &cfg.directions)?,
        },
        mesh_lambda1: report.mesh_lambda1,
        warnings,
    })
}

fn bounds(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let r = build_bound_report(cfg)?;
    match cfg.format {
        Format::Json => Ok(CommandOutput {
            body: to_json(&r),
            warnings: Vec::new(),
        }),
        Format::Csv => {
            let mut recs = vec![
                vec!["reilly".to_string(), num(r.reilly)],
                vec!["best_pr1".to_string(), num(r.best_pr1.value)],
                vec!["best_pr2".to_string(), num(r.best_pr2.value)],
            ];
            if let Some(l) = r.mesh_lambda1 {
                recs.push(vec!["mesh_lambda1".to_string(), num(l)]);
            }
            for (k, p) in r.pr1_at.iter().enumerate() {
                recs.push(vec![format!("pr1[{k}]"), num(p.value)]);
            }
            for (k, p) in r.pr2_at.iter().enumerate() {
                recs.push(vec![format!("pr2[{k}]"), num(p.value)]);
            }
            Ok(CommandOutput {
                body: to_csv(&["quantity".to_string(), "value".to_string()], &recs)?,
                warnings: r.warnings,
            })
        }
    }
}

fn scan(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let chart = make_shape(&cfg.shape)?;
    let grid = grid_for(cfg, &chart)?;
    let i = assemble_integrals(&chart, &grid)?;
    let q = q_matrix(&i);
    let d = i.ambient_dim;
    let rows = sample_directions(d, cfg.sphere_scan)
        .into_iter()
        .map(|v| {
            Ok(ScanRow {
                q: q_eval(&q, &v),
                pr1: pr1_bound(&i, &v),
                pr2: pr2_bound(&i, &v)?,
                direction: vec_of(&v),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let body = match cfg.format {
        Format::Json => to_json(&ScanJson {
            shape: cfg.shape.name().to_string(),
            params: cfg.shape.params(),
            grid: grid.points_per_axis(),
            rows,
        }),
        Format::Csv => {
            let mut header: Vec<String> = (1..=d).map(|k| format!("v{k}")).collect();
            header.extend(["Q", "b", "b_tilde"].map(String::from));
            let recs: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut rec: Vec<String> = r.direction.iter().map(|&x| num(x)).collect();
                    rec.extend([num(r.q), num(r.pr1), num(r.pr2)]);
                    rec
                })
                .collect();
            to_csv(&header, &recs)?
        }
    };
    Ok(CommandOutput {
        body,
        warnings: Vec::new(),
    })
}

pub fn table_rows(cfg: &RunConfig) -> CliResult<(Vec<TableRow>, Vec<String>, Vec<usize>, (usize, usize))> {
    let (nu, nv) = cfg.mesh.unwrap_or(DEFAULT_MESH);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut grid_used = Vec::new();
    for r in table_radii() {
        let kind = ShapeKind::Torus { r_major: r };
        let chart = make_shape(&kind)?;
        let sub = RunConfig {
            shape: kind.clone(),
            ..cfg.clone()
        };
        let grid = grid_for(&sub, &chart)?;
        grid_used = grid.points_per_axis();
        let i = assemble_integrals(&chart, &grid)?;
        let report = BoundReport::compute(&i, &[])?;
        let lambda = first_eigenvalue(&triangulate_chart(&chart, nu, nv)?)?;
        warnings.extend(vanishing_torus_warning(&kind, &report.q, report.reilly));
        rows.push(TableRow {
            r_major: r,
            reilly: report.reilly,
            best_pr1: report.best_pr1.value,
            best_pr2: report.best_pr2.value,
            mesh_lambda1: lambda,
            regime: regime_label(&report.q, i.ambient_dim),
        });
    }
    Ok((rows, warnings, grid_used, (nu, nv)))
}

fn paper_table(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let (rows, warnings, grid, (nu, nv)) = table_rows(cfg)?;
    match cfg.format {
        Format::Json => Ok(CommandOutput {
            body: to_json(&TableJson {
                grid,
                mesh: [nu, nv],
                rows,
                warnings,
            }),
            warnings: Vec::new(),
        }),
        Format::Csv => {
            let header = ["R", "reilly", "best_pr1", "best_pr2", "mesh_lambda1", "regime"]
                .map(String::from);
            let recs: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.r_major),
                        num(r.reilly),
                        num(r.best_pr1),
                        num(r.best_pr2),
                        num(r.mesh_lambda1),
                        r.regime.clone(),
                    ]
                })
                .collect();
            Ok(CommandOutput {
                body: to_csv(&header, &recs)?,
                warnings,
            })
        }
    }
}

fn mesh_lambda1(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let (mesh, source, params, resolution) = if let Some(path) = &cfg.off {
        let mesh = load_off(path)?;
        if let Some(out) = &cfg.save_off {
            save_off(&mesh, out)?;
        }
        (mesh, format!("off:{}", path.display()), Default::default(), None)
    } else {
        let chart = make_shape(&cfg.shape)?;
        let res = cfg.mesh.unwrap_or(DEFAULT_MESH);
        let mesh = mesh_for(cfg, &chart, Some(res))?.expect("a resolution was supplied");
        (
            mesh,
            cfg.shape.name().to_string(),
            cfg.shape.params(),
            Some([res.0, res.1]),
        )
    };
    let out = MeshJson {
        source,
        params,
        resolution,
        vertices: mesh.vertex_count(),
        triangles: mesh.triangles().len(),
        euler_characteristic: mesh.euler_characteristic(),
        total_area: mesh.total_area(),
        lambda1: first_eigenvalue(&mesh)?,
    };
    let body = match cfg.format {
        Format::Json => to_json(&out),
        Format::Csv => to_csv(
            &["vertices", "triangles", "euler_characteristic", "total_area", "lambda1"]
                .map(String::from),
            &[vec![
                out.vertices.to_string(),
                out.triangles.to_string(),
                out.euler_characteristic.to_string(),
                num(out.total_area),
                num(out.lambda1),
            ]],
        )?,
    };
    Ok(CommandOutput {
        body,
        warnings: Vec::new(),
    })
}

fn qform(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let chart = make_shape(&cfg.shape)?;
    let grid = grid_for(cfg, &chart)?;
    let i = assemble_integrals(&chart, &grid)?;
    let q = q_matrix(&i);
    let out = QformJson {
        shape: cfg.shape.name().to_string(),
        params: cfg.shape.params(),
        grid: grid.points_per_axis(),
        matrix: rows(&q.matrix),
        eigenvalues: vec_of(&q.eigenvalues),
        eigenvectors: columns(&q.eigenvectors),
        inertia: q.inertia.as_array(),
        tau: q.tau,
        vanishes: q.vanishes(),
    };
    let body = match cfg.format {
        Format::Json => to_json(&out),
        Format::Csv => {
            // One labelled row per matrix row, then the spectrum and inertia.
            let d = out.matrix.len();
            let mut header = vec!["row".to_string()];
            header.extend((1..=d).map(|k| format!("c{k}")));
            let pad = |mut r: Vec<String>| {
                r.resize(d + 1, String::new());
                r
            };
            let mut recs = Vec::new();
            for (k, row) in out.matrix.iter().enumerate() {
                let mut r = vec![format!("q{}", k + 1)];
                r.extend(row.iter().map(|&x| num(x)));
                recs.push(r);
            }
            let mut ev = vec!["eigenvalues".to_string()];
            ev.extend(out.eigenvalues.iter().map(|&x| num(x)));
            recs.push(ev);
            let mut inertia = vec!["inertia".to_string()];
            inertia.extend(out.inertia.iter().map(|x| x.to_string()));
            recs.push(pad(inertia));
            to_csv(&header, &recs)?
        }
    };
    Ok(CommandOutput {
        body,
        warnings: Vec::new(),
    })
}
