//! Hierarchical H¹-conforming shape functions on a triangle.
//!
//! Local ordering: the three vertex hats, then for each local edge `i` (opposite
//! vertex `i`) the modes of degree `2..=p_e`, then the interior bubbles. Edge mode
//! `k` on the edge with endpoints `a`, `b` (ordered by ascending global vertex id)
//! is `λ_a λ_b P_{k-2}(λ_b − λ_a)`, so neighbouring elements agree on the trace.
//! Bubbles are `λ_0 λ_1 λ_2 P_i(λ_1 − λ_0) P_j(2λ_2 − 1)` with `i + j ≤ p − 3`.

use crate::geometry::Point;
use crate::quadrature::legendre_and_derivative;

/// Number of local shape functions for element degree `p` and edge degrees `edge_p`.
pub fn local_dim(p: usize, edge_p: &[usize; 3]) -> usize {
    3 + edge_p.iter().map(|&e| e - 1).sum::<usize>() + num_bubbles(p)
}

pub fn num_bubbles(p: usize) -> usize {
    if p < 3 {
        0
    } else {
        (p - 1) * (p - 2) / 2
    }
}

/// Endpoints of local edge `i`.
pub fn edge_endpoints(i: usize) -> (usize, usize) {
    ((i + 1) % 3, (i + 2) % 3)
}

/// Evaluates all local shape functions and their gradients.
///
/// `flip[i]` is true when the second endpoint of local edge `i` has the smaller
/// global vertex id.
pub fn eval_shape(
    p: usize,
    edge_p: &[usize; 3],
    flip: &[bool; 3],
    lambda: &[f64; 3],
    grad_lambda: &[Point; 3],
    vals: &mut Vec<f64>,
    grads: &mut Vec<Point>,
) {
    vals.clear();
    grads.clear();
    for i in 0..3 {
        vals.push(lambda[i]);
        grads.push(grad_lambda[i]);
    }
    for i in 0..3 {
        if edge_p[i] < 2 {
            continue;
        }
        let (mut a, mut b) = edge_endpoints(i);
        if flip[i] {
            std::mem::swap(&mut a, &mut b);
        }
        let s = lambda[b] - lambda[a];
        let gs = sub(grad_lambda[b], grad_lambda[a]);
        let w = lambda[a] * lambda[b];
        let gw = add(scale(grad_lambda[a], lambda[b]), scale(grad_lambda[b], lambda[a]));
        for k in 2..=edge_p[i] {
            let (l, dl) = legendre_and_derivative(k - 2, s);
            vals.push(w * l);
            grads.push(add(scale(gw, l), scale(gs, w * dl)));
        }
    }
    if p >= 3 {
        let b = lambda[0] * lambda[1] * lambda[2];
        let gb = add(
            add(
                scale(grad_lambda[0], lambda[1] * lambda[2]),
                scale(grad_lambda[1], lambda[0] * lambda[2]),
            ),
            scale(grad_lambda[2], lambda[0] * lambda[1]),
        );
        let s = lambda[1] - lambda[0];
        let gs = sub(grad_lambda[1], grad_lambda[0]);
        let r = 2.0 * lambda[2] - 1.0;
        let gr = scale(grad_lambda[2], 2.0);
        for total in 0..=p - 3 {
            for j in 0..=total {
                let i = total - j;
                let (li, dli) = legendre_and_derivative(i, s);
                let (lj, dlj) = legendre_and_derivative(j, r);
                let v = b * li * lj;
                let g = add(
                    scale(gb, li * lj),
                    add(scale(gs, b * dli * lj), scale(gr, b * li * dlj)),
                );
                vals.push(v);
                grads.push(g);
            }
        }
    }
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}
