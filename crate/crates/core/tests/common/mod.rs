#![allow(dead_code)]

use heatflux::fespace::{assemble_mass, assemble_stiffness, BoundaryCondition, ElementQuadrature, FESpace, NO_DOF};
use heatflux::flux::{PatchGeometry, PatchSystem};
use heatflux::geometry::Point;
use heatflux::mesh::SimplicialMesh;
use heatflux::poly;
use heatflux::quadrature::TriangleRule;
use heatflux::temporal::TimePartition;
use nalgebra::{DMatrix, DVector};
use std::ops::SubAssign;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Star-shaped patch around the origin. Interior patches close the fan;
/// boundary patches open it along a boundary line with free edges there.
pub fn random_patch(rng: &mut impl Rng, interior: bool, degree: usize) -> PatchGeometry {
    let mut vertices = vec![[0.0, 0.0]];
    let mut triangles = Vec::new();
    let mut free_edges = Vec::new();
    if interior {
        let k = rng.gen_range(3..=7);
        for i in 0..k {
            let a = 2.0 * PI * (i as f64 + rng.gen_range(-0.25..0.25)) / k as f64;
            let r = 0.3 * rng.gen_range(0.5..1.5);
            vertices.push([r * a.cos(), r * a.sin()]);
        }
        for i in 0..k {
            triangles.push([0, 1 + i, 1 + (i + 1) % k]);
            free_edges.push(0);
        }
    } else {
        let k = rng.gen_range(1..=4);
        let opening = rng.gen_range(0.5 * PI..=PI);
        for i in 0..=k {
            let a = opening * i as f64 / k as f64;
            let r = 0.3 * rng.gen_range(0.5..1.5);
            vertices.push([r * a.cos(), r * a.sin()]);
        }
        for i in 1..=k {
            triangles.push([0, i, i + 1]);
            let mut mask = 0u8;
            if i == 1 {
                mask |= 0b100;
            }
            if i == k {
                mask |= 0b010;
            }
            free_edges.push(mask);
        }
    }
    PatchGeometry {
        interior,
        degree,
        vertices,
        triangles,
        free_edges,
    }
}

/// Flux moments `t` and divergence moments `g` of a random piecewise
/// polynomial with zero patch mean (so interior patches are compatible).
pub fn random_data(rng: &mut impl Rng, sys: &PatchSystem) -> (Vec<f64>, Vec<f64>) {
    let nr = poly::dim(sys.geometry.degree);
    let ntri = sys.geometry.triangles.len();
    let mut coeffs: Vec<f64> = (0..sys.num_mult).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let area: f64 = (0..ntri).map(|c| sys.geometry.triangle(c).area.abs()).sum();
    let mean: f64 = coeffs.iter().zip(sys.mult_integrals.iter()).map(|(a, b)| a * b).sum::<f64>() / area;
    for c in 0..ntri {
        coeffs[c * nr] -= mean;
    }
    let mut g = vec![0.0; sys.num_mult];
    for c in 0..ntri {
        let tri = sys.geometry.triangle(c);
        for qp in &TriangleRule::cached(2 * sys.geometry.degree + 2).points {
            let x = tri.point(&qp.bary);
            let w = qp.weight * tri.area.abs();
            let r = poly::eval(sys.geometry.degree, &sys.frames[c].local(&x));
            let v: f64 = (0..nr).map(|l| coeffs[c * nr + l] * r[l]).sum();
            for l in 0..nr {
                g[c * nr + l] += w * v * r[l];
            }
        }
    }
    let t = (0..sys.num_flux).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (t, g)
}

/// RTN mass and divergence matrices assembled from basis evaluations with a
/// richer rule than the library's.
pub fn assemble_dense(sys: &PatchSystem) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = sys.geometry.degree;
    let nr = poly::dim(p);
    let mut a = DMatrix::zeros(sys.num_flux, sys.num_flux);
    let mut b = DMatrix::zeros(sys.num_mult, sys.num_flux);
    for c in 0..sys.geometry.triangles.len() {
        let tri = sys.geometry.triangle(c);
        let dofs = &sys.element_dofs[c];
        for qp in &TriangleRule::cached(2 * p + 6).points {
            let x = tri.point(&qp.bary);
            let w = qp.weight * tri.area.abs();
            let (vals, divs) = sys.elements[c].eval(&x);
            let r = poly::eval(p, &sys.frames[c].local(&x));
            for (i, &di) in dofs.iter().enumerate() {
                if di == usize::MAX {
                    continue;
                }
                for (j, &dj) in dofs.iter().enumerate() {
                    if dj != usize::MAX {
                        a[(di, dj)] += w * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
                    }
                }
                for k in 0..nr {
                    b[(c * nr + k, di)] += w * divs[i] * r[k];
                }
            }
        }
    }
    (a, b)
}

/// Null-space solution of `min ½vᵀAv + tᵀv` s.t. `Bv = g`: particular
/// solution from the SVD pseudo-inverse plus the reduced solve on `ker B`.
pub struct NullSpaceOracle {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub particular: DVector<f64>,
    pub kernel: DMatrix<f64>,
    pub minimizer: DVector<f64>,
}

pub fn null_space_oracle(sys: &PatchSystem, t: &[f64], g: &[f64]) -> NullSpaceOracle {
    let (a, b) = assemble_dense(sys);
    let nf = sys.num_flux;
    let mut padded = DMatrix::zeros(nf.max(b.nrows()), nf);
    padded.view_mut((0, 0), (b.nrows(), nf)).copy_from(&b);
    let svd = padded.clone().svd(true, true);
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    let smax = svd.singular_values.max();
    let mut gp = DVector::zeros(padded.nrows());
    gp.rows_mut(0, g.len()).copy_from(&DVector::from_column_slice(g));
    let range: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let pinv = |r: &DVector<f64>| {
        let mut x = DVector::zeros(nf);
        for &i in &range {
            x += vt.row(i).transpose() * (u.column(i).dot(r) / svd.singular_values[i]);
        }
        x
    };
    let particular = pinv(&gp);
    let kernel_rows: Vec<usize> = (0..nf).filter(|i| !range.contains(i)).collect();
    let kernel = DMatrix::from_fn(nf, kernel_rows.len(), |r, c| vt[(kernel_rows[c], r)]);
    let tv = DVector::from_column_slice(t);
    let reduced = (kernel.transpose() * &a * &kernel).cholesky().expect("A is positive definite on ker B");
    let mut minimizer = &particular + &kernel * reduced.solve(&-(kernel.transpose() * (&a * &particular + &tv)));
    // iterative refinement against both KKT conditions
    for _ in 0..3 {
        let mut rc = gp.clone();
        rc.rows_mut(0, b.nrows()).sub_assign(&(&b * &minimizer));
        minimizer += pinv(&rc);
        let rs = -(kernel.transpose() * (&a * &minimizer + &tv));
        minimizer += &kernel * reduced.solve(&rs);
    }
    NullSpaceOracle {
        a,
        b,
        particular,
        kernel,
        minimizer,
    }
}

/// Uniform S1-type space on the unit square.
pub fn square_space(rounds: usize, p: usize) -> Arc<FESpace> {
    let mesh = Arc::new(SimplicialMesh::unit_square().refine_uniform(rounds));
    Arc::new(FESpace::uniform(mesh, p, BoundaryCondition::Dirichlet).unwrap())
}

/// Hand-coded backward Euler with dense matrices: `(M + τA) uⁿ = M uⁿ⁻¹ + ∫_{I_n} (f, φ)`,
/// the load computed with the same sample rule (`q + 3 = 3` Gauss points in
/// time, degree `2p + 2` in space).
pub fn backward_euler(
    space: &FESpace,
    partition: &TimePartition,
    initial: &[f64],
    f: &dyn Fn(&Point, f64) -> f64,
) -> Vec<DVector<f64>> {
    let m = assemble_mass(space).to_dense();
    let a = assemble_stiffness(space).to_dense();
    let mesh = space.mesh();
    let mut u = DVector::from_column_slice(initial);
    let mut out = Vec::new();
    for n in 1..=partition.num_steps() {
        let (t0, t1) = partition.interval(n);
        let tau = t1 - t0;
        let times = heatflux::temporal::gauss_points(t0, t1, 3);
        let mut load = DVector::zeros(space.num_dofs());
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        for e in 0..mesh.num_triangles() {
            let quad = ElementQuadrature::new(&mesh.geometry(e), 2 * space.max_degree() + 2);
            for k in 0..quad.len() {
                let ft: f64 = times.iter().map(|(t, w)| w * f(&quad.points[k], *t)).sum();
                space.shape(e, &quad.bary[k], &mut vals, &mut grads);
                for (i, &d) in space.element_dofs(e).iter().enumerate() {
                    if d != NO_DOF {
                        load[d] += quad.weights[k] * ft * vals[i];
                    }
                }
            }
        }
        let lhs = &m + &a * tau;
        u = lhs.lu().solve(&(&m * &u + load)).expect("nonsingular");
        out.push(u.clone());
    }
    out
}
