//! Built-in analytic shapes and the closed-form torus values used to
//! cross-check quadrature.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::chart::ImmersedChart;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeKind {
    /// Round `S^m` of radius `r` in `R^(m+1)`.
    Sphere { m: usize, r: f64 },
    /// Torus of revolution: unit generating circle at distance `r_major`
    /// from the axis.
    Torus { r_major: f64 },
    /// `S^1(1/sqrt 2) x S^1(1/sqrt 2)` in `R^4`.
    Clifford,
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl ShapeKind {
    /// Resolves a shape by name with `key=value` parameters, filling defaults
    /// for omitted keys.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allow = |keys: &[&str]| -> Result<()> {
            match params.keys().find(|k| !keys.contains(&k.as_str())) {
                Some(k) => Err(Error::BadParameter(format!(
                    "unknown parameter '{k}' for shape '{name}'"
                ))),
                None => Ok(()),
            }
        };
        match name {
            "sphere" => {
                allow(&["m", "r"])?;
                let m = get("m", 2.0);
                if m.fract() != 0.0 || m < 2.0 {
                    return Err(Error::BadParameter(format!(
                        "sphere dimension m must be an integer >= 2, got {m}"
                    )));
                }
                Ok(ShapeKind::Sphere {
                    m: m as usize,
                    r: get("r", 1.0),
                })
            }
            "torus" => {
                allow(&["R"])?;
                Ok(ShapeKind::Torus {
                    r_major: get("R", 2f64.sqrt()),
                })
            }
            "clifford" => {
                allow(&[])?;
                Ok(ShapeKind::Clifford)
            }
            "ellipsoid" => {
                allow(&["a", "b", "c"])?;
                Ok(ShapeKind::Ellipsoid {
                    a: get("a", 2.0),
                    b: get("b", 1.0),
                    c: get("c", 1.0),
                })
            }
            other => Err(Error::BadParameter(format!("unknown shape '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::Clifford => "clifford",
            ShapeKind::Ellipsoid { .. } => "ellipsoid",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match *self {
            ShapeKind::Sphere { m, r } => {
                out.insert("m".into(), m as f64);
                out.insert("r".into(), r);
            }
            ShapeKind::Torus { r_major } => {
                out.insert("R".into(), r_major);
            }
            ShapeKind::Clifford => {}
            ShapeKind::Ellipsoid { a, b, c } => {
                out.insert("a".into(), a);
                out.insert("b".into(), b);
                out.insert("c".into(), c);
            }
        }
        out
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        let params = self.params();
        if !params.is_empty() {
            let list: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", list.join(","))?;
        }
        Ok(())
    }
}

/// The shapes every identity check runs over.
pub fn catalog() -> Vec<ShapeKind> {
    vec![
        ShapeKind::Sphere { m: 2, r: 1.0 },
        ShapeKind::Sphere { m: 3, r: 1.0 },
        ShapeKind::Torus {
            r_major: 2f64.sqrt(),
        },
        ShapeKind::Torus {
            r_major: 17f64.sqrt() / 4.0,
        },
        ShapeKind::Torus {
            r_major: 3.0 / (2.0 * 2f64.sqrt()),
        },
        ShapeKind::Clifford,
        ShapeKind::Ellipsoid {
            a: 2.0,
            b: 1.0,
            c: 1.0,
        },
    ]
}

pub fn make_shape(kind: &ShapeKind) -> Result<ImmersedChart> {
    match *kind {
        ShapeKind::Sphere { m, r } => sphere(m, r),
        ShapeKind::Torus { r_major } => torus(r_major),
        ShapeKind::Clifford => clifford(),
        ShapeKind::Ellipsoid { a, b, c } => ellipsoid(a, b, c),
    }
}

#[derive(Clone, Copy)]
enum Factor {
    One,
    Sin,
    Cos,
}

impl Factor {
    fn eval(self, x: f64, order: usize) -> f64 {
        let shift = order as f64 * 0.5 * PI;
        match self {
            Factor::One if order == 0 => 1.0,
            Factor::One => 0.0,
            Factor::Sin => (x + shift).sin(),
            Factor::Cos => (x + shift).cos(),
        }
    }
}

/// Each ambient coordinate is `r` times a product of one-angle factors,
/// which makes every partial derivative a product of shifted sines and
/// cosines.
struct SphereChart {
    factors: Vec<Vec<Factor>>,
    domain: Vec<(f64, f64)>,
    periodic: Vec<bool>,
}

/// Polar chart of `S^2` ordered so that it reads
/// `(sin t cos p, sin t sin p, cos t)`.
fn polar_s2() -> SphereChart {
    use Factor::*;
    SphereChart {
        factors: vec![vec![Sin, Cos], vec![Sin, Sin], vec![Cos, One]],
        domain: vec![(0.0, PI), (0.0, 2.0 * PI)],
        periodic: vec![false, true],
    }
}

fn circle() -> SphereChart {
    SphereChart {
        factors: vec![vec![Factor::Cos], vec![Factor::Sin]],
        domain: vec![(0.0, 2.0 * PI)],
        periodic: vec![true],
    }
}

/// `S^(p+q+1)` as the join `(cos e * y, sin e * z)` of `y` on `S^p` and `z`
/// on `S^q`, `e` in `[0, pi/2]`. Joining balanced halves keeps the metric
/// determinant far from zero at quadrature nodes; nested polar angles
/// would multiply one small sine per level.
fn join(a: SphereChart, b: SphereChart) -> SphereChart {
    let (p, q) = (a.domain.len(), b.domain.len());
    let mut factors = Vec::with_capacity(a.factors.len() + b.factors.len());
    for row in &a.factors {
        let mut f = vec![Factor::Cos];
        f.extend_from_slice(row);
        f.extend(std::iter::repeat(Factor::One).take(q));
        factors.push(f);
    }
    for row in &b.factors {
        let mut f = vec![Factor::Sin];
        f.extend(std::iter::repeat(Factor::One).take(p));
        f.extend_from_slice(row);
        factors.push(f);
    }
    let mut domain = vec![(0.0, 0.5 * PI)];
    domain.extend(a.domain.iter().chain(&b.domain));
    let mut periodic = vec![false];
    periodic.extend(a.periodic.iter().chain(&b.periodic));
    SphereChart {
        factors,
        domain,
        periodic,
    }
}

fn sphere_chart(m: usize) -> SphereChart {
    match m {
        1 => circle(),
        2 => polar_s2(),
        _ => {
            let p = (m - 1) / 2;
            join(sphere_chart(p), sphere_chart(m - 1 - p))
        }
    }
}

fn sphere(m: usize, r: f64) -> Result<ImmersedChart> {
    if m < 2 {
        return Err(Error::BadParameter(format!("sphere needs m >= 2, got {m}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::BadParameter(format!("sphere radius must be positive, got {r}")));
    }
    let SphereChart {
        factors,
        domain,
        periodic,
    } = sphere_chart(m);

    let partial = {
        let factors = factors.clone();
        move |u: &[f64], orders: &[usize]| -> DVector<f64> {
            DVector::from_iterator(
                factors.len(),
                factors.iter().map(|row| {
                    r * row
                        .iter()
                        .zip(u)
                        .zip(orders)
                        .map(|((f, &x), &d)| f.eval(x, d))
                        .product::<f64>()
                }),
            )
        }
    };
    let p0 = partial.clone();
    let p1 = partial.clone();
    let p2 = partial;
    let chart = ImmersedChart::new(m + 1, domain, periodic, move |u| p0(u, &vec![0; m]))?
        .with_analytic_derivatives(
            move |u| {
                let mut jac = DMatrix::zeros(m + 1, m);
                let mut orders = vec![0; m];
                for i in 0..m {
                    orders[i] = 1;
                    jac.set_column(i, &p1(u, &orders));
                    orders[i] = 0;
                }
                jac
            },
            move |u| {
                let mut out = Vec::with_capacity(m * m);
                let mut orders = vec![0; m];
                for i in 0..m {
                    for j in 0..m {
                        orders[i] += 1;
                        orders[j] += 1;
                        out.push(p2(u, &orders));
                        orders[i] = 0;
                        orders[j] = 0;
                    }
                }
                out
            },
        )
        .with_scale(r);
    Ok(chart)
}

fn torus(r_major: f64) -> Result<ImmersedChart> {
    if !(r_major.is_finite() && r_major > 1.0) {
        return Err(Error::BadParameter(format!(
            "torus needs R > 1, got {r_major}"
        )));
    }
    let big = r_major;
    let tau = 2.0 * PI;
    let chart = ImmersedChart::new(3, vec![(0.0, tau), (0.0, tau)], vec![true, true], move |x| {
        let (su, cu) = x[0].sin_cos();
        let (sv, cv) = x[1].sin_cos();
        let rho = big + cu;
        DVector::from_vec(vec![rho * cv, rho * sv, su])
    })?
    .with_analytic_derivatives(
        move |x| {
            let (su, cu) = x[0].sin_cos();
            let (sv, cv) = x[1].sin_cos();
            let rho = big + cu;
            DMatrix::from_column_slice(3, 2, &[-su * cv, -su * sv, cu, -rho * sv, rho * cv, 0.0])
        },
        move |x| {
            let (su, cu) = x[0].sin_cos();
            let (sv, cv) = x[1].sin_cos();
            let rho = big + cu;
            let uu = DVector::from_vec(vec![-cu * cv, -cu * sv, -su]);
            let uv = DVector::from_vec(vec![su * sv, -su * cv, 0.0]);
            let vv = DVector::from_vec(vec![-rho * cv, -rho * sv, 0.0]);
            vec![uu, uv.clone(), uv, vv]
        },
    )
    .with_scale(big);
    Ok(chart)
}

fn clifford() -> Result<ImmersedChart> {
    let tau = 2.0 * PI;
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let chart = ImmersedChart::new(4, vec![(0.0, tau), (0.0, tau)], vec![true, true], move |x| {
        let (su, cu) = x[0].sin_cos();
        let (sv, cv) = x[1].sin_cos();
        DVector::from_vec(vec![k * cu, k * su, k * cv, k * sv])
    })?
    .with_analytic_derivatives(
        move |x| {
            let (su, cu) = x[0].sin_cos();
            let (sv, cv) = x[1].sin_cos();
            DMatrix::from_column_slice(4, 2, &[-k * su, k * cu, 0.0, 0.0, 0.0, 0.0, -k * sv, k * cv])
        },
        move |x| {
            let (su, cu) = x[0].sin_cos();
            let (sv, cv) = x[1].sin_cos();
            let uu = DVector::from_vec(vec![-k * cu, -k * su, 0.0, 0.0]);
            let vv = DVector::from_vec(vec![0.0, 0.0, -k * cv, -k * sv]);
            vec![uu, DVector::zeros(4), DVector::zeros(4), vv]
        },
    )
    .with_scale(1.0);
    Ok(chart)
}

fn ellipsoid(a: f64, b: f64, c: f64) -> Result<ImmersedChart> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::BadParameter(format!(
                "ellipsoid semi-axis {name} must be positive, got {v}"
            )));
        }
    }
    let base = sphere(2, 1.0)?;
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![a, b, c]));
    base.transformed(&diag, &DVector::zeros(3))
}

/// Closed-form integrals of the torus of revolution with unit generating
/// circle at distance `r_major` from the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusOracle {
    pub r_major: f64,
    pub area: f64,
    pub h2: f64,
    pub a_t: DMatrix<f64>,
    pub a_h: DMatrix<f64>,
    /// `Q = q_coeff * diag(1, 1, -2)`.
    pub q_coeff: f64,
    pub reilly: f64,
}

impl TorusOracle {
    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -2.0])) * self.q_coeff
    }
}

pub fn torus_closed_forms(r_major: f64) -> Result<TorusOracle> {
    if !(r_major.is_finite() && r_major > 1.0) {
        return Err(Error::BadParameter(format!(
            "torus needs R > 1, got {r_major}"
        )));
    }
    let r = r_major;
    let s = (r * r - 1.0).sqrt();
    let pi2 = PI * PI;
    let pi4 = pi2 * pi2;
    let area = 4.0 * pi2 * r;
    let h2 = pi2 * r * r / s;
    let a_t = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 3.0, 2.0])) * (pi2 * r);
    let side = 0.5 * pi2 * r.powi(3) * (r / s - 1.0);
    let axial = pi2 * r * r * (r - s);
    let a_h = DMatrix::from_diagonal(&DVector::from_vec(vec![side, side, axial]));
    let q_coeff = pi4 * r.powi(3) * ((4.0 * r * r - 3.0) / s - 4.0 * r);
    let reilly = r / (2.0 * s);
    Ok(TorusOracle {
        r_major,
        area,
        h2,
        a_t,
        a_h,
        q_coeff,
        reilly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::eval_frame;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn torus_point_at_origin_of_chart() {
        let chart = make_shape(&ShapeKind::Torus {
            r_major: 2f64.sqrt(),
        })
        .unwrap();
        let p = chart.point(&[0.0, 0.0]);
        assert_close(p[0], 2f64.sqrt() + 1.0, 1e-15);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn clifford_lies_on_unit_sphere() {
        let chart = make_shape(&ShapeKind::Clifford).unwrap();
        for &(u, v) in &[(0.1, 2.0), (3.0, 5.5), (1.0, 1.0)] {
            assert_close(chart.point(&[u, v]).norm(), 1.0, 1e-15);
        }
    }

    #[test]
    fn sphere_analytic_partials_match_finite_differences() {
        for m in 2..=4 {
            let chart = make_shape(&ShapeKind::Sphere { m, r: 1.5 }).unwrap();
            let fd = chart.clone().with_finite_differences(1e-6, 1e-4);
            let u: Vec<f64> = (0..m).map(|i| 0.4 + 0.3 * i as f64).collect();
            let diff = (chart.first_partials(&u) - fd.first_partials(&u)).amax();
            assert!(diff < 1e-8, "m={m}: {diff}");
            let s_an = chart.second_partials(&u);
            let s_fd = fd.second_partials(&u);
            for (x, y) in s_an.iter().zip(&s_fd) {
                assert!((x - y).amax() < 1e-6);
            }
            let p = chart.point(&u);
            assert_close(p.norm(), 1.5, 1e-14);
        }
    }

    #[test]
    fn sphere_north_pole_projector() {
        // The chart is singular at its own poles, so rotate the equator
        // point (1, 0, 0) up to (0, 0, 1) and evaluate there.
        let chart = make_shape(&ShapeKind::Sphere { m: 2, r: 1.0 }).unwrap();
        let rot = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let chart = chart.transformed(&rot, &DVector::zeros(3)).unwrap();
        let u = [std::f64::consts::FRAC_PI_2, 0.0];
        assert!((chart.point(&u) - DVector::from_vec(vec![0.0, 0.0, 1.0])).amax() < 1e-15);
        let s = eval_frame(&chart, &u).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((s.projector - expected).amax() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            make_shape(&ShapeKind::Torus { r_major: 1.0 }),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            make_shape(&ShapeKind::Sphere { m: 2, r: -1.0 }),
            Err(Error::BadParameter(_))
        ));
        assert!(torus_closed_forms(0.5).is_err());
        let params = BTreeMap::from([("q".to_string(), 1.0)]);
        assert!(ShapeKind::from_name("torus", &params).is_err());
        assert!(ShapeKind::from_name("klein", &BTreeMap::new()).is_err());
    }

    #[test]
    fn torus_oracle_printed_values() {
        let pi4 = PI.powi(4);
        let o = torus_closed_forms(2f64.sqrt()).unwrap();
        assert_close(o.q_coeff, 2.0 * pi4 * (5.0 * 2f64.sqrt() - 8.0), 1e-13);
        assert_close(o.reilly, std::f64::consts::FRAC_1_SQRT_2, 1e-15);
        assert_close(o.h2, 2.0 * PI * PI, 1e-14);

        let o = torus_closed_forms(17f64.sqrt() / 4.0).unwrap();
        let s17 = 17f64.sqrt();
        assert_close(o.q_coeff, 17.0 / 64.0 * pi4 * (5.0 * s17 - 17.0), 1e-13);
        assert!(o.q_coeff > 0.0);

        let o = torus_closed_forms(3.0 / (2.0 * 2f64.sqrt())).unwrap();
        assert!(o.q_coeff.abs() < 1e-12 * pi4);
    }

    #[test]
    fn torus_oracle_is_self_consistent() {
        for &r in &[1.05, 17f64.sqrt() / 4.0, 1.2, 2f64.sqrt(), 2.0, 5.0] {
            let o = torus_closed_forms(r).unwrap();
            let q = &o.a_h * (2.0 * o.area) - &o.a_t * o.h2;
            assert!((q - o.q_matrix()).amax() < 1e-11 * o.q_coeff.abs().max(1.0));
            assert_close(o.a_h.trace(), o.h2, 1e-13);
            assert_close(o.a_t.trace(), 2.0 * o.area, 1e-13);
            let expected_sign = (9.0 / 8.0 - r * r).signum();
            assert_eq!(o.q_coeff.signum(), expected_sign);
        }
    }
}
