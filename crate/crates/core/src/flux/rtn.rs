//! Raviart–Thomas–Nédélec elements `RTN_p = P_p² + x P̃_p` built on physical triangles.
//!
//! Degrees of freedom: for each edge, the moments of the normal component against
//! Legendre polynomials `L_0..L_p` along the edge, followed by the interior
//! moments against `P_{p-1}²`. Edge normals and parametrizations are fixed by the
//! vertex ids (from the lower id to the higher id), so neighbouring elements that
//! share an edge and its dofs have matching normal traces.

use crate::geometry::{Point, Triangle};
use crate::poly::{self, Frame, VecPoly};
use crate::quadrature::TriangleRule;
use crate::temporal::{gauss_points, legendre_values};
use nalgebra::DMatrix;

pub fn ndof(p: usize) -> usize {
    (p + 1) * (p + 3)
}

pub fn num_interior(p: usize) -> usize {
    p * (p + 1)
}

/// Edge `i` (opposite vertex `i`) oriented from the lower to the higher vertex id:
/// start point, end point and unit normal (tangent rotated clockwise).
pub fn oriented_edge(tri: &Triangle, ids: &[usize; 3], i: usize) -> (Point, Point, Point) {
    let (mut a, mut b) = ((i + 1) % 3, (i + 2) % 3);
    if ids[a] > ids[b] {
        std::mem::swap(&mut a, &mut b);
    }
    let (p0, p1) = (tri.v[a], tri.v[b]);
    let t = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = t[0].hypot(t[1]);
    (p0, p1, [t[1] / len, -t[0] / len])
}

#[derive(Clone, Debug)]
pub struct RtnElement {
    pub degree: usize,
    pub frame: Frame,
    /// Basis function `i` is `Σ_m coeffs[(m, i)] · prime_m`.
    coeffs: DMatrix<f64>,
}

impl RtnElement {
    pub fn new(tri: &Triangle, ids: &[usize; 3], p: usize) -> Self {
        let frame = Frame::of(tri);
        let n = ndof(p);
        let mut dual = DMatrix::<f64>::zeros(n, n);
        let mut row = 0;
        for i in 0..3 {
            let (p0, p1, normal) = oriented_edge(tri, ids, i);
            let len = crate::geometry::dist(&p0, &p1);
            for (s, w) in gauss_points(-1.0, 1.0, p + 2) {
                let x = [
                    p0[0] + 0.5 * (s + 1.0) * (p1[0] - p0[0]),
                    p0[1] + 0.5 * (s + 1.0) * (p1[1] - p0[1]),
                ];
                let l = legendre_values(p, s);
                let (vals, _) = prime_eval(p, &frame, &x);
                for (m, v) in vals.iter().enumerate() {
                    let vn = v[0] * normal[0] + v[1] * normal[1];
                    for k in 0..=p {
                        dual[(row + k, m)] += 0.5 * len * w * vn * l[k];
                    }
                }
            }
            row += p + 1;
        }
        if p >= 1 {
            let rule = TriangleRule::cached(2 * p);
            let area = tri.area.abs();
            let nq = poly::dim(p - 1);
            for qp in &rule.points {
                let x = tri.point(&qp.bary);
                let w = qp.weight * area;
                let r = poly::eval(p - 1, &frame.local(&x));
                let (vals, _) = prime_eval(p, &frame, &x);
                for (m, v) in vals.iter().enumerate() {
                    for k in 0..nq {
                        dual[(row + k, m)] += w * v[0] * r[k];
                        dual[(row + nq + k, m)] += w * v[1] * r[k];
                    }
                }
            }
        }
        let coeffs = dual.try_inverse().expect("RTN degrees of freedom are unisolvent");
        Self { degree: p, frame, coeffs }
    }

    pub fn ndof(&self) -> usize {
        ndof(self.degree)
    }

    /// Values and divergences of all basis functions at `x`.
    pub fn eval(&self, x: &Point) -> (Vec<Point>, Vec<f64>) {
        let (pv, pd) = prime_eval(self.degree, &self.frame, x);
        let n = self.ndof();
        let mut vals = vec![[0.0, 0.0]; n];
        let mut divs = vec![0.0; n];
        for i in 0..n {
            for m in 0..n {
                let c = self.coeffs[(m, i)];
                vals[i][0] += c * pv[m][0];
                vals[i][1] += c * pv[m][1];
                divs[i] += c * pd[m];
            }
        }
        (vals, divs)
    }

    /// The field `Σ_i v_i φ_i` as a vector polynomial of degree `p + 1`.
    pub fn to_vecpoly(&self, v: &[f64]) -> VecPoly {
        let p = self.degree;
        let prime = &self.coeffs * nalgebra::DVector::from_column_slice(v);
        let np = poly::dim(p);
        let mut out = VecPoly::zero(p + 1);
        for (k, (i, j)) in poly::exponents(p).into_iter().enumerate() {
            out.cx[poly::index(i, j)] += prime[k];
            out.cy[poly::index(i, j)] += prime[np + k];
        }
        let homogeneous = poly::dim(p) - (p + 1);
        for h in 0..=p {
            let (i, j) = poly::exponents(p)[homogeneous + h];
            let c = prime[2 * np + h];
            out.cx[poly::index(i + 1, j)] += c;
            out.cy[poly::index(i, j + 1)] += c;
        }
        out
    }

    /// Degrees of freedom of a vector field given by its values (used for interpolation tests).
    pub fn dofs_of(&self, tri: &Triangle, ids: &[usize; 3], field: impl Fn(&Point) -> Point) -> Vec<f64> {
        let p = self.degree;
        let mut out = vec![0.0; self.ndof()];
        let mut row = 0;
        for i in 0..3 {
            let (p0, p1, normal) = oriented_edge(tri, ids, i);
            let len = crate::geometry::dist(&p0, &p1);
            for (s, w) in gauss_points(-1.0, 1.0, p + 2) {
                let x = [
                    p0[0] + 0.5 * (s + 1.0) * (p1[0] - p0[0]),
                    p0[1] + 0.5 * (s + 1.0) * (p1[1] - p0[1]),
                ];
                let v = field(&x);
                let vn = v[0] * normal[0] + v[1] * normal[1];
                let l = legendre_values(p, s);
                for k in 0..=p {
                    out[row + k] += 0.5 * len * w * vn * l[k];
                }
            }
            row += p + 1;
        }
        if p >= 1 {
            let nq = poly::dim(p - 1);
            let area = tri.area.abs();
            for qp in &TriangleRule::cached(2 * p + 2).points {
                let x = tri.point(&qp.bary);
                let v = field(&x);
                let r = poly::eval(p - 1, &self.frame.local(&x));
                for k in 0..nq {
                    out[row + k] += qp.weight * area * v[0] * r[k];
                    out[row + nq + k] += qp.weight * area * v[1] * r[k];
                }
            }
        }
        out
    }
}

/// Prime basis: `(m_k, 0)`, `(0, m_k)` for `m_k ∈ P_p`, then `x̂ m_k` for the
/// homogeneous monomials of degree `p`. Returns values and divergences.
fn prime_eval(p: usize, frame: &Frame, x: &Point) -> (Vec<Point>, Vec<f64>) {
    let (m, g) = poly::eval_with_grad(p, frame, x);
    let xh = frame.local(x);
    let np = m.len();
    let mut vals = Vec::with_capacity(ndof(p));
    let mut divs = Vec::with_capacity(ndof(p));
    for k in 0..np {
        vals.push([m[k], 0.0]);
        divs.push(g[k][0]);
    }
    for k in 0..np {
        vals.push([0.0, m[k]]);
        divs.push(g[k][1]);
    }
    for k in np - (p + 1)..np {
        vals.push([xh[0] * m[k], xh[1] * m[k]]);
        divs.push((2 + p) as f64 * m[k] / frame.h);
    }
    (vals, divs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Triangle {
        Triangle::new([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]])
    }

    #[test]
    fn unisolvent_interpolation_identity() {
        let t = tri();
        let ids = [7, 2, 5];
        for p in 0..=4 {
            let el = RtnElement::new(&t, &ids, p);
            // random member of RTN_p through its prime coefficients
            let n = ndof(p);
            let prime: Vec<f64> = (0..n).map(|k| ((k as f64 + 1.3) * 1.7).sin()).collect();
            let field = |x: &Point| {
                let (v, _) = prime_eval(p, &el.frame, x);
                let mut out = [0.0, 0.0];
                for (c, vv) in prime.iter().zip(&v) {
                    out[0] += c * vv[0];
                    out[1] += c * vv[1];
                }
                out
            };
            let dofs = el.dofs_of(&t, &ids, field);
            let rebuilt = el.to_vecpoly(&dofs);
            for &x in &[[0.4, 0.4], [0.3, 0.2], [0.6, 0.45]] {
                let (v, _) = rebuilt.eval(&el.frame, &x);
                let w = field(&x);
                assert!((v[0] - w[0]).abs() < 1e-11 && (v[1] - w[1]).abs() < 1e-11, "p={p}");
            }
        }
    }

    #[test]
    fn basis_is_dual_to_dofs() {
        let t = tri();
        let ids = [0, 1, 2];
        let p = 2;
        let el = RtnElement::new(&t, &ids, p);
        for i in 0..el.ndof() {
            let dofs = el.dofs_of(&t, &ids, |x| el.eval(x).0[i]);
            for (j, d) in dofs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn divergence_matches_vecpoly() {
        let t = tri();
        let el = RtnElement::new(&t, &[3, 1, 2], 3);
        let v: Vec<f64> = (0..el.ndof()).map(|k| (k as f64 * 0.37).cos()).collect();
        let vp = el.to_vecpoly(&v);
        let x = [0.45, 0.4];
        let (vals, divs) = el.eval(&x);
        let (pv, pd) = vp.eval(&el.frame, &x);
        let direct: f64 = divs.iter().zip(&v).map(|(d, c)| d * c).sum();
        let vx: f64 = vals.iter().zip(&v).map(|(d, c)| d[0] * c).sum();
        assert!((direct - pd).abs() < 1e-10 * direct.abs().max(1.0));
        assert!((vx - pv[0]).abs() < 1e-11 * vx.abs().max(1.0));
    }
}
