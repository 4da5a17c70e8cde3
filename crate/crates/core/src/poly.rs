//! Scaled monomial bases on triangles.
//!
//! Monomials `x̂^i ŷ^j` with `x̂ = (x − c) / h` are ordered by total degree, and
//! within a degree by ascending power of `ŷ`.

use crate::geometry::{Point, Triangle};

pub fn dim(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Exponents `(i, j)` in basis order.
pub fn exponents(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim(d));
    for k in 0..=d {
        for j in 0..=k {
            out.push((k - j, j));
        }
    }
    out
}

/// Index of `(i, j)` in basis order.
pub fn index(i: usize, j: usize) -> usize {
    let k = i + j;
    k * (k + 1) / 2 + j
}

/// Centre and length scale for the monomials of a triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub center: Point,
    pub h: f64,
}

impl Frame {
    pub fn of(tri: &Triangle) -> Self {
        Self {
            center: tri.centroid(),
            h: tri.diameter(),
        }
    }

    pub fn local(&self, x: &Point) -> Point {
        [(x[0] - self.center[0]) / self.h, (x[1] - self.center[1]) / self.h]
    }
}

fn powers(v: f64, d: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(d + 1);
    p.push(1.0);
    for k in 1..=d {
        p.push(p[k - 1] * v);
    }
    p
}

/// Values of all monomials of degree `≤ d` at the local point `xh`.
pub fn eval(d: usize, xh: &Point) -> Vec<f64> {
    let px = powers(xh[0], d);
    let py = powers(xh[1], d);
    let mut out = Vec::with_capacity(dim(d));
    for k in 0..=d {
        for j in 0..=k {
            out.push(px[k - j] * py[j]);
        }
    }
    out
}

/// Values and physical gradients of all monomials of degree `≤ d`.
pub fn eval_with_grad(d: usize, frame: &Frame, x: &Point) -> (Vec<f64>, Vec<Point>) {
    let xh = frame.local(x);
    let px = powers(xh[0], d);
    let py = powers(xh[1], d);
    let mut vals = Vec::with_capacity(dim(d));
    let mut grads = Vec::with_capacity(dim(d));
    for k in 0..=d {
        for j in 0..=k {
            let i = k - j;
            vals.push(px[i] * py[j]);
            let gx = if i > 0 { i as f64 * px[i - 1] * py[j] } else { 0.0 };
            let gy = if j > 0 { j as f64 * px[i] * py[j - 1] } else { 0.0 };
            grads.push([gx / frame.h, gy / frame.h]);
        }
    }
    (vals, grads)
}

/// Evaluates `Σ c_k m_k` at a physical point.
pub fn eval_sum(d: usize, frame: &Frame, coeffs: &[f64], x: &Point) -> f64 {
    eval(d, &frame.local(x)).iter().zip(coeffs).map(|(m, c)| m * c).sum()
}

/// Vector polynomial `(Σ cx_k m_k, Σ cy_k m_k)` in a triangle frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VecPoly {
    pub degree: usize,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
}

impl VecPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            cx: vec![0.0; dim(degree)],
            cy: vec![0.0; dim(degree)],
        }
    }

    /// Value and divergence at a physical point.
    pub fn eval(&self, frame: &Frame, x: &Point) -> (Point, f64) {
        let (m, g) = eval_with_grad(self.degree, frame, x);
        let mut v = [0.0, 0.0];
        let mut div = 0.0;
        for k in 0..m.len() {
            v[0] += self.cx[k] * m[k];
            v[1] += self.cy[k] * m[k];
            div += self.cx[k] * g[k][0] + self.cy[k] * g[k][1];
        }
        (v, div)
    }

    /// `self += s · other` (degrees may differ; the result has the larger one).
    pub fn add_scaled(&mut self, other: &VecPoly, s: f64) {
        if other.degree > self.degree {
            let mut grown = VecPoly::zero(other.degree);
            for (k, (i, j)) in exponents(self.degree).into_iter().enumerate() {
                grown.cx[index(i, j)] = self.cx[k];
                grown.cy[index(i, j)] = self.cy[k];
            }
            *self = grown;
        }
        for (k, (i, j)) in exponents(other.degree).into_iter().enumerate() {
            let t = index(i, j);
            self.cx[t] += s * other.cx[k];
            self.cy[t] += s * other.cy[k];
        }
    }
}
