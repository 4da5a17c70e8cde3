//! Local data oscillation `∫_{I_n} ‖f − Π^{a,n} f‖²_{H^{-1}(ω_a)} dt`, approximated
//! by a discrete dual norm on a refined patch mesh.
//!
//! The supremum over `H¹_0(ω_a)` (or over functions vanishing on `∂ω_a ∩ ∂Ω`
//! for boundary vertices) is replaced by the supremum over a conforming space of
//! degree `p_a + 1` on the patch sub-mesh refined by `rounds` bisection rounds.
//! The value is therefore a lower approximation of the true norm.

use crate::error::Result;
use crate::flux::{PatchReport, StepFlux};
use crate::fespace::{assemble_stiffness, BoundaryCondition, ElementQuadrature, FESpace, SparseCholesky, NO_DOF};
use crate::geometry::Point;
use crate::mesh::{Forest, SimplicialMesh};
use crate::poly;
use crate::solver::SpaceTimeFn;
use crate::temporal::{gauss_points, legendre_values, to_reference};
use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

/// Factorized Dirichlet Laplacian on a refined patch, with quadrature data.
pub struct DualNormProblem {
    pub space: FESpace,
    chol: Option<SparseCholesky>,
    elements: Vec<LocalElement>,
}

struct LocalElement {
    root: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
    vals: Vec<Vec<f64>>,
}

impl DualNormProblem {
    pub fn build(report: &PatchReport, rounds: usize) -> Result<Self> {
        let geo = &report.system.geometry;
        let mut free: HashSet<(usize, usize)> = HashSet::new();
        for (t, mask) in geo.triangles.iter().zip(&geo.free_edges) {
            for i in 0..3 {
                if mask >> i & 1 == 1 {
                    let (a, b) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                    free.insert((a.min(b), a.max(b)));
                }
            }
        }
        let interior = geo.interior;
        let forest = Forest::from_triangulation_marked(geo.vertices.clone(), &geo.triangles, |a, b, count| {
            if interior {
                count == 1
            } else {
                free.contains(&(a.min(b), a.max(b)))
            }
        })?;
        let mesh = Arc::new(SimplicialMesh::root(&forest).refine_uniform(rounds));
        let p = geo.degree + 1;
        let space = FESpace::uniform(mesh.clone(), p, BoundaryCondition::Dirichlet)?;
        let chol = if space.num_dofs() > 0 {
            Some(SparseCholesky::new(&assemble_stiffness(&space))?)
        } else {
            None
        };
        let degree = 2 * p + 6;
        let mut elements = Vec::with_capacity(mesh.num_triangles());
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        for e in 0..mesh.num_triangles() {
            let quad = ElementQuadrature::new(&mesh.geometry(e), degree);
            let mut v = Vec::with_capacity(quad.len());
            for b in &quad.bary {
                space.shape(e, b, &mut vals, &mut grads);
                v.push(vals.clone());
            }
            elements.push(LocalElement {
                root: mesh.keys()[e].root as usize,
                points: quad.points,
                weights: quad.weights,
                vals: v,
            });
        }
        Ok(Self { space, chol, elements })
    }

    /// `sup_v (r, v)² / ‖∇v‖²` over the discrete space, for `r` given at the
    /// quadrature points (`residual(element, point)`).
    pub fn dual_norm_sq(&self, residual: impl Fn(usize, usize) -> f64) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let mut b = vec![0.0; self.space.num_dofs()];
        for (e, el) in self.elements.iter().enumerate() {
            let dofs = self.space.element_dofs(e);
            for k in 0..el.points.len() {
                let rw = residual(e, k) * el.weights[k];
                for (i, &d) in dofs.iter().enumerate() {
                    if d != NO_DOF {
                        b[d] += rw * el.vals[k][i];
                    }
                }
            }
        }
        let x = chol.solve(&b);
        x.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>().max(0.0)
    }
}

/// Cache of [`DualNormProblem`]s keyed by patch geometry and refinement rounds.
#[derive(Default)]
pub struct DualNormCache {
    map: Mutex<HashMap<(Vec<u64>, usize), Arc<DualNormProblem>>>,
}

impl DualNormCache {
    pub fn get(&self, report: &PatchReport, rounds: usize) -> Result<Arc<DualNormProblem>> {
        let key = (report.system.geometry.key(), rounds);
        if let Some(p) = self.map.lock().expect("dual norm cache").get(&key) {
            return Ok(p.clone());
        }
        let built = Arc::new(DualNormProblem::build(report, rounds)?);
        let mut map = self.map.lock().expect("dual norm cache");
        if map.len() >= 512 {
            map.clear();
        }
        Ok(map.entry(key).or_insert(built).clone())
    }
}

/// `η_osc^{a,n}` (APPROXIMATE): temporal Gauss rule with `2(q + 2)` points.
pub fn local_oscillation(
    flux: &StepFlux,
    report: &PatchReport,
    f: SpaceTimeFn,
    interval: (f64, f64),
    rounds: usize,
    cache: &DualNormCache,
) -> Result<f64> {
    let problem = cache.get(report, rounds)?;
    let a = report.vertex;
    let contributions: Vec<_> = report
        .elements
        .iter()
        .map(|&s| flux.contribution(s, a).expect("patch contribution on its own element"))
        .collect();
    let origin = contributions.first().map_or([0.0, 0.0], |c| c.origin);
    let q = flux.num_modes - 1;
    let (t0, t1) = interval;
    // Π f modes at every local quadrature point (relative coordinates)
    let proj: Vec<Vec<Vec<f64>>> = problem
        .elements
        .iter()
        .map(|el| {
            let c = contributions[el.root];
            el.points
                .iter()
                .map(|x| {
                    let m = poly::eval(c.proj_degree, &c.frame.local(x));
                    c.proj.iter().map(|pj| m.iter().zip(pj).map(|(a, b)| a * b).sum()).collect()
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (t, w) in gauss_points(t0, t1, 2 * (q + 2)) {
        let l = legendre_values(q, to_reference(t0, t1, t));
        let value = problem.dual_norm_sq(|e, k| {
            let x = problem.elements[e].points[k];
            let fx = f(&[origin[0] + x[0], origin[1] + x[1]], t);
            let pf: f64 = proj[e][k].iter().zip(&l).map(|(a, b)| a * b).sum();
            fx - pf
        });
        total += w * value;
    }
    Ok(total.sqrt())
}
