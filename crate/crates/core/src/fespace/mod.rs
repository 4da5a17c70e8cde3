//! Conforming hp finite element spaces on forest meshes.

pub mod basis;
mod assembly;
mod sparse;
mod spacetime;

pub use assembly::{assemble_load, assemble_mass, assemble_stiffness, project_l2, ElementQuadrature, PROJECTION_EXTRA_DEGREE};
pub use sparse::{SparseCholesky, SparseLu, SparseOperator};
pub use spacetime::{Side, SpaceTimeFunction, StepLink};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::SimplicialMesh;
use std::sync::Arc;

/// Highest polynomial degree accepted by [`FESpace`].
pub const MAX_DEGREE: usize = 8;

/// Marker for a shape function that carries no degree of freedom.
pub const NO_DOF: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet conditions on marked edges; those dofs are removed.
    Dirichlet,
    /// No constraint.
    Free,
}

/// H¹-conforming space with per-element degrees and edge degrees given by the
/// minimum rule.
#[derive(Debug)]
pub struct FESpace {
    mesh: Arc<SimplicialMesh>,
    degrees: Vec<usize>,
    edge_degrees: Vec<usize>,
    bc: BoundaryCondition,
    vertex_dofs: Vec<usize>,
    ndofs: usize,
    element_dofs: Vec<Vec<usize>>,
    element_flip: Vec<[bool; 3]>,
}

impl FESpace {
    pub fn new(mesh: Arc<SimplicialMesh>, degrees: Vec<usize>, bc: BoundaryCondition) -> Result<Self> {
        if degrees.len() != mesh.num_triangles() {
            return Err(Error::DegreeMismatch(format!(
                "{} degrees for {} elements",
                degrees.len(),
                mesh.num_triangles()
            )));
        }
        if let Some(&p) = degrees.iter().find(|&&p| p == 0 || p > MAX_DEGREE) {
            return Err(Error::UnsupportedDegree(p));
        }
        let mut edge_degrees = vec![usize::MAX; mesh.num_edges()];
        for t in 0..mesh.num_triangles() {
            for e in mesh.triangle_edges(t) {
                edge_degrees[e] = edge_degrees[e].min(degrees[t]);
            }
        }
        let constrained_edge = |e: usize| bc == BoundaryCondition::Dirichlet && mesh.is_marked_edge(e);

        let mut ndofs = 0;
        let mut vertex_dofs = vec![NO_DOF; mesh.num_vertices()];
        for (v, dof) in vertex_dofs.iter_mut().enumerate() {
            if !(bc == BoundaryCondition::Dirichlet && mesh.is_boundary_vertex(v)) {
                *dof = ndofs;
                ndofs += 1;
            }
        }
        let mut edge_start = vec![NO_DOF; mesh.num_edges()];
        for (e, start) in edge_start.iter_mut().enumerate() {
            if !constrained_edge(e) && edge_degrees[e] >= 2 {
                *start = ndofs;
                ndofs += edge_degrees[e] - 1;
            }
        }
        let mut element_dofs = Vec::with_capacity(mesh.num_triangles());
        let mut element_flip = Vec::with_capacity(mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangle(t);
            let edges = mesh.triangle_edges(t);
            let mut dofs: Vec<usize> = tri.iter().map(|&v| vertex_dofs[v]).collect();
            let mut flip = [false; 3];
            for i in 0..3 {
                let (a, b) = basis::edge_endpoints(i);
                flip[i] = tri[b] < tri[a];
                let e = edges[i];
                for k in 0..edge_degrees[e].saturating_sub(1) {
                    dofs.push(if edge_start[e] == NO_DOF { NO_DOF } else { edge_start[e] + k });
                }
            }
            for _ in 0..basis::num_bubbles(degrees[t]) {
                dofs.push(ndofs);
                ndofs += 1;
            }
            element_dofs.push(dofs);
            element_flip.push(flip);
        }
        Ok(Self {
            mesh,
            degrees,
            edge_degrees,
            bc,
            vertex_dofs,
            ndofs,
            element_dofs,
            element_flip,
        })
    }

    pub fn uniform(mesh: Arc<SimplicialMesh>, p: usize, bc: BoundaryCondition) -> Result<Self> {
        let n = mesh.num_triangles();
        Self::new(mesh, vec![p; n], bc)
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn num_dofs(&self) -> usize {
        self.ndofs
    }

    pub fn degree(&self, t: usize) -> usize {
        self.degrees[t]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(1)
    }

    pub fn edge_degree(&self, e: usize) -> usize {
        self.edge_degrees[e]
    }

    /// Global dof of the hat function of vertex `v`, if it is not constrained.
    pub fn vertex_dof(&self, v: usize) -> Option<usize> {
        let d = self.vertex_dofs[v];
        (d != NO_DOF).then_some(d)
    }

    /// Global dof per local shape function ([`NO_DOF`] for constrained ones).
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t]
    }

    fn edge_degrees_of(&self, t: usize) -> [usize; 3] {
        let e = self.mesh.triangle_edges(t);
        [self.edge_degrees[e[0]], self.edge_degrees[e[1]], self.edge_degrees[e[2]]]
    }

    /// Shape function values and gradients of element `t` at barycentric `lambda`.
    pub fn shape(&self, t: usize, lambda: &[f64; 3], vals: &mut Vec<f64>, grads: &mut Vec<Point>) {
        let geo = self.mesh.geometry(t);
        basis::eval_shape(
            self.degrees[t],
            &self.edge_degrees_of(t),
            &self.element_flip[t],
            lambda,
            &geo.grad_lambda,
            vals,
            grads,
        );
    }

    /// Shape functions of element `t` at physical point `x`.
    pub fn shape_at(&self, t: usize, x: &Point, vals: &mut Vec<f64>, grads: &mut Vec<Point>) {
        let lambda = self.mesh.geometry(t).barycentric(x);
        self.shape(t, &lambda, vals, grads);
    }

    /// Local coefficient vector of `coeffs` on element `t` (zero for constrained dofs).
    pub fn local_coefficients(&self, coeffs: &[f64], t: usize) -> Vec<f64> {
        self.element_dofs[t]
            .iter()
            .map(|&d| if d == NO_DOF { 0.0 } else { coeffs[d] })
            .collect()
    }

    /// Value and gradient of the function `coeffs` at physical point `x` of element `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, x: &Point) -> (f64, Point) {
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        self.shape_at(t, x, &mut vals, &mut grads);
        combine(&self.element_dofs[t], coeffs, &vals, &grads)
    }

    /// Point evaluation anywhere in the domain (first containing element).
    pub fn evaluate_point(&self, coeffs: &[f64], x: &Point) -> Option<f64> {
        self.mesh.locate(x).map(|t| self.evaluate(coeffs, t, x).0)
    }

    /// Same mesh, degrees and boundary treatment.
    pub fn same_as(&self, other: &FESpace) -> bool {
        self.mesh.same_elements(&other.mesh) && self.degrees == other.degrees && self.bc == other.bc
    }
}

/// Combines local shape values with global coefficients.
pub fn combine(dofs: &[usize], coeffs: &[f64], vals: &[f64], grads: &[Point]) -> (f64, Point) {
    let mut v = 0.0;
    let mut g = [0.0, 0.0];
    for (k, &d) in dofs.iter().enumerate() {
        if d != NO_DOF {
            let c = coeffs[d];
            v += c * vals[k];
            g[0] += c * grads[k][0];
            g[1] += c * grads[k][1];
        }
    }
    (v, g)
}
