//! Manufactured solutions with closed-form gradients, time derivatives and sources.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::SimplicialMesh;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point, f64) -> Point + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    ReferenceTriangle,
}

impl Domain {
    pub fn root_mesh(&self) -> SimplicialMesh {
        match self {
            Domain::UnitSquare => SimplicialMesh::unit_square(),
            Domain::ReferenceTriangle => SimplicialMesh::reference_triangle(),
        }
    }
}

/// Exact solution `u` of `∂_t u − Δu = f` with homogeneous Dirichlet data.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: &'static str,
    pub domain: Domain,
    pub t_end: f64,
    pub u: ScalarFn,
    pub grad_u: VectorFn,
    pub dt_u: ScalarFn,
    pub f: ScalarFn,
    /// Smallest `(p, q)` for which the exact solution lies in the discrete space.
    pub discrete_exact_from: Option<(usize, usize)>,
}

impl fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("t_end", &self.t_end)
            .finish()
    }
}

impl ManufacturedProblem {
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "S1" => Ok(Self::s1()),
            "S2" => Ok(Self::s2()),
            "S3" => Ok(Self::s3()),
            "S4" => Ok(Self::s4()),
            other => Err(Error::Config(format!("unknown problem `{other}` (expected S1..S4)"))),
        }
    }

    /// `sin(πx) sin(πy) e^{−t}`.
    pub fn s1() -> Self {
        Self::separable("S1", Arc::new(|t: f64| (-t).exp()), Arc::new(|t: f64| -(-t).exp()))
    }

    /// `sin(πx) sin(πy) (1 + t³)`.
    pub fn s2() -> Self {
        Self::separable("S2", Arc::new(|t: f64| 1.0 + t * t * t), Arc::new(|t: f64| 3.0 * t * t))
    }

    fn separable(name: &'static str, g: Arc<dyn Fn(f64) -> f64 + Send + Sync>, dg: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        let s = |x: &Point| (PI * x[0]).sin() * (PI * x[1]).sin();
        let (g1, g2, g3, d1) = (g.clone(), g.clone(), g, dg.clone());
        Self {
            name,
            domain: Domain::UnitSquare,
            t_end: 1.0,
            u: Arc::new(move |x, t| s(x) * g1(t)),
            grad_u: Arc::new(move |x, t| {
                let c = PI * g2(t);
                [c * (PI * x[0]).cos() * (PI * x[1]).sin(), c * (PI * x[0]).sin() * (PI * x[1]).cos()]
            }),
            dt_u: Arc::new(move |x, t| s(x) * d1(t)),
            f: Arc::new(move |x, t| s(x) * (dg(t) + 2.0 * PI * PI * g3(t))),
            discrete_exact_from: None,
        }
    }

    /// `t · x y (1 − x − y)` on the reference triangle: a cubic bubble that is
    /// reproduced exactly for `p ≥ 3`, `q ≥ 1`.
    pub fn s3() -> Self {
        let phi = |x: &Point| x[0] * x[1] * (1.0 - x[0] - x[1]);
        let grad = |x: &Point| [x[1] * (1.0 - 2.0 * x[0] - x[1]), x[0] * (1.0 - x[0] - 2.0 * x[1])];
        Self {
            name: "S3",
            domain: Domain::ReferenceTriangle,
            t_end: 1.0,
            u: Arc::new(move |x, t| t * phi(x)),
            grad_u: Arc::new(move |x, t| {
                let g = grad(x);
                [t * g[0], t * g[1]]
            }),
            dt_u: Arc::new(move |x, _| phi(x)),
            f: Arc::new(move |x, t| phi(x) + 2.0 * t * (x[0] + x[1])),
            discrete_exact_from: Some((3, 1)),
        }
    }

    /// Gaussian bump `exp(−|x − c(t)|²/ε)` with centre `c(t) = (0.3 + 0.4t, 0.5)`,
    /// multiplied by `16 x(1−x) y(1−y)`.
    pub fn s4() -> Self {
        Self {
            name: "S4",
            domain: Domain::UnitSquare,
            t_end: 1.0,
            u: Arc::new(|x, t| Bump::at(x, t).u()),
            grad_u: Arc::new(|x, t| Bump::at(x, t).grad()),
            dt_u: Arc::new(|x, t| Bump::at(x, t).dt()),
            f: Arc::new(|x, t| {
                let b = Bump::at(x, t);
                b.dt() - b.laplacian()
            }),
            discrete_exact_from: None,
        }
    }

    pub fn root_mesh(&self) -> SimplicialMesh {
        self.domain.root_mesh()
    }

    pub fn u0(&self, x: &Point) -> f64 {
        (self.u)(x, 0.0)
    }

    /// Whether the exact solution lies in the discrete space for these degrees.
    pub fn is_discrete_exact(&self, p: usize, q: usize) -> bool {
        self.discrete_exact_from.is_some_and(|(pm, qm)| p >= pm && q >= qm)
    }

    /// Centre of the moving source at time `t` (S4 only).
    pub fn source_center(&self, t: f64) -> Option<Point> {
        (self.name == "S4").then(|| Bump::center(t))
    }
}

/// Width parameter of the S4 bump.
pub const BUMP_EPS: f64 = 0.01;
const BUMP_SPEED: f64 = 0.4;

struct Bump {
    d: Point,
    gauss: f64,
    b: f64,
    grad_b: Point,
    lap_b: f64,
}

impl Bump {
    fn center(t: f64) -> Point {
        [0.3 + BUMP_SPEED * t, 0.5]
    }

    fn at(x: &Point, t: f64) -> Self {
        let c = Self::center(t);
        let d = [x[0] - c[0], x[1] - c[1]];
        let gauss = (-(d[0] * d[0] + d[1] * d[1]) / BUMP_EPS).exp();
        let (bx, by) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
        Self {
            d,
            gauss,
            b: 16.0 * bx * by,
            grad_b: [16.0 * (1.0 - 2.0 * x[0]) * by, 16.0 * bx * (1.0 - 2.0 * x[1])],
            lap_b: -32.0 * (bx + by),
        }
    }

    fn u(&self) -> f64 {
        self.gauss * self.b
    }

    fn grad_gauss(&self) -> Point {
        let s = -2.0 * self.gauss / BUMP_EPS;
        [s * self.d[0], s * self.d[1]]
    }

    fn grad(&self) -> Point {
        let gg = self.grad_gauss();
        [gg[0] * self.b + self.gauss * self.grad_b[0], gg[1] * self.b + self.gauss * self.grad_b[1]]
    }

    fn dt(&self) -> f64 {
        // ∂_t c = (speed, 0)
        2.0 * self.d[0] * BUMP_SPEED / BUMP_EPS * self.u()
    }

    fn laplacian(&self) -> f64 {
        let r2 = self.d[0] * self.d[0] + self.d[1] * self.d[1];
        let lap_gauss = self.gauss * (4.0 * r2 / (BUMP_EPS * BUMP_EPS) - 4.0 / BUMP_EPS);
        let gg = self.grad_gauss();
        self.b * lap_gauss + 2.0 * (gg[0] * self.grad_b[0] + gg[1] * self.grad_b[1]) + self.gauss * self.lap_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_consistency(p: &ManufacturedProblem, points: &[Point], times: &[f64], tol: f64) {
        let h = 1e-4;
        for x in points {
            for &t in times {
                let u = &p.u;
                let dt = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
                let gx = (u(&[x[0] + h, x[1]], t) - u(&[x[0] - h, x[1]], t)) / (2.0 * h);
                let gy = (u(&[x[0], x[1] + h], t) - u(&[x[0], x[1] - h], t)) / (2.0 * h);
                let lap = (u(&[x[0] + h, x[1]], t) + u(&[x[0] - h, x[1]], t) + u(&[x[0], x[1] + h], t)
                    + u(&[x[0], x[1] - h], t)
                    - 4.0 * u(x, t))
                    / (h * h);
                let scale = 1.0 + (p.f)(x, t).abs();
                assert!((dt - (p.dt_u)(x, t)).abs() < tol * scale, "{} dt at {x:?}", p.name);
                let g = (p.grad_u)(x, t);
                assert!((gx - g[0]).abs() < tol * scale && (gy - g[1]).abs() < tol * scale, "{} grad", p.name);
                assert!((dt - lap - (p.f)(x, t)).abs() < 1e3 * tol * scale, "{} source at {x:?}", p.name);
            }
        }
    }

    #[test]
    fn sources_match_finite_differences() {
        let pts = [[0.31, 0.52], [0.2, 0.7], [0.45, 0.5], [0.6, 0.25]];
        let tri_pts = [[0.2, 0.3], [0.1, 0.1], [0.5, 0.2]];
        for p in [ManufacturedProblem::s1(), ManufacturedProblem::s2(), ManufacturedProblem::s4()] {
            check_consistency(&p, &pts, &[0.1, 0.5, 0.9], 1e-5);
        }
        check_consistency(&ManufacturedProblem::s3(), &tri_pts, &[0.2, 0.8], 1e-5);
    }

    #[test]
    fn boundary_values_vanish() {
        for p in [ManufacturedProblem::s1(), ManufacturedProblem::s2(), ManufacturedProblem::s4()] {
            for s in [0.0, 0.3, 0.77, 1.0] {
                for x in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                    assert!((p.u)(&x, 0.4).abs() < 1e-15, "{}", p.name);
                }
            }
        }
        let s3 = ManufacturedProblem::s3();
        for s in [0.0, 0.3, 1.0] {
            for x in [[s, 0.0], [0.0, s], [s, 1.0 - s]] {
                assert!((s3.u)(&x, 0.7).abs() < 1e-15);
            }
        }
        assert!(ManufacturedProblem::by_name("s9").is_err());
        assert!(ManufacturedProblem::s3().is_discrete_exact(3, 1));
        assert!(!ManufacturedProblem::s3().is_discrete_exact(2, 1));
    }
}
