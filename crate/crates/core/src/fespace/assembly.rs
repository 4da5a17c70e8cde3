use super::{FESpace, SparseCholesky, SparseOperator, NO_DOF};
use crate::error::Result;
use crate::geometry::{Point, Triangle};
use crate::quadrature::TriangleRule;
use rayon::prelude::*;

/// Quadrature points of a physical triangle with weights including the area.
#[derive(Clone, Debug)]
pub struct ElementQuadrature {
    pub bary: Vec<[f64; 3]>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl ElementQuadrature {
    pub fn new(geo: &Triangle, degree: usize) -> Self {
        let rule = TriangleRule::cached(degree);
        let area = geo.area.abs();
        let bary: Vec<[f64; 3]> = rule.points.iter().map(|p| p.bary).collect();
        let points = bary.iter().map(|b| geo.point(b)).collect();
        let weights = rule.points.iter().map(|p| p.weight * area).collect();
        Self { bary, points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Symmetric local matrix from a pointwise kernel on pairs of shape functions.
fn local_matrix(space: &FESpace, t: usize, degree: usize, kernel: impl Fn(&[f64], &[Point], usize, usize) -> f64) -> Vec<f64> {
    let geo = space.mesh().geometry(t);
    let quad = ElementQuadrature::new(&geo, degree);
    let n = space.element_dofs(t).len();
    let mut local = vec![0.0; n * n];
    let (mut vals, mut grads) = (Vec::new(), Vec::new());
    for (b, &w) in quad.bary.iter().zip(&quad.weights) {
        space.shape(t, b, &mut vals, &mut grads);
        for i in 0..n {
            for j in i..n {
                local[i * n + j] += w * kernel(&vals, &grads, i, j);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            local[i * n + j] = local[j * n + i];
        }
    }
    local
}

fn assemble_symmetric(space: &FESpace, locals: Vec<Vec<f64>>) -> SparseOperator {
    let mut triplets = Vec::new();
    for (t, local) in locals.into_iter().enumerate() {
        let dofs = space.element_dofs(t);
        let n = dofs.len();
        for i in 0..n {
            if dofs[i] == NO_DOF {
                continue;
            }
            for j in 0..n {
                if dofs[j] != NO_DOF {
                    triplets.push((dofs[i], dofs[j], local[i * n + j]));
                }
            }
        }
    }
    SparseOperator::from_triplets(space.num_dofs(), space.num_dofs(), triplets)
}

pub fn assemble_mass(space: &FESpace) -> SparseOperator {
    let locals: Vec<Vec<f64>> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| local_matrix(space, t, 2 * space.degree(t), |v, _, i, j| v[i] * v[j]))
        .collect();
    assemble_symmetric(space, locals)
}

pub fn assemble_stiffness(space: &FESpace) -> SparseOperator {
    let locals: Vec<Vec<f64>> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            local_matrix(space, t, 2 * space.degree(t) - 2, |_, g, i, j| g[i][0] * g[j][0] + g[i][1] * g[j][1])
        })
        .collect();
    assemble_symmetric(space, locals)
}

/// Load vector `(f, φ_i)` with a rule of degree `2p + extra` per element.
pub fn assemble_load(space: &FESpace, f: &(dyn Fn(&Point) -> f64 + Sync), extra: usize) -> Vec<f64> {
    let locals: Vec<Vec<f64>> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let geo = space.mesh().geometry(t);
            let quad = ElementQuadrature::new(&geo, 2 * space.degree(t) + extra);
            let n = space.element_dofs(t).len();
            let mut local = vec![0.0; n];
            let (mut vals, mut grads) = (Vec::new(), Vec::new());
            for k in 0..quad.len() {
                space.shape(t, &quad.bary[k], &mut vals, &mut grads);
                let fw = f(&quad.points[k]) * quad.weights[k];
                for i in 0..n {
                    local[i] += fw * vals[i];
                }
            }
            local
        })
        .collect();
    let mut out = vec![0.0; space.num_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (&d, &v) in space.element_dofs(t).iter().zip(local) {
            if d != NO_DOF {
                out[d] += v;
            }
        }
    }
    out
}

/// Quadrature degree surplus used by [`project_l2`] for the right-hand side.
pub const PROJECTION_EXTRA_DEGREE: usize = 4;

/// L² projection of `f` onto the space.
pub fn project_l2(space: &FESpace, f: &(dyn Fn(&Point) -> f64 + Sync)) -> Result<Vec<f64>> {
    let mass = assemble_mass(space);
    let rhs = assemble_load(space, f, PROJECTION_EXTRA_DEGREE);
    Ok(SparseCholesky::new(&mass)?.solve(&rhs))
}
