//! Discontinuous Galerkin time stepping and the time-continuous reconstruction.

use crate::error::{Error, Result};
use crate::fespace::{
    assemble_mass, assemble_stiffness, project_l2, ElementQuadrature, FESpace, SpaceTimeFunction, SparseLu,
    SparseOperator, StepLink, NO_DOF,
};
use crate::geometry::Point;
use crate::temporal::{derivative_matrix, gauss_points, legendre_mass, legendre_values, reconstruction_weights,
    time_coupling, to_reference, TimePartition};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Space-time data function `(x, t) ↦ f(x, t)`.
pub type SpaceTimeFn<'a> = &'a (dyn Fn(&Point, f64) -> f64 + Sync);

/// Source sampled once per step on the common-refinement mesh.
///
/// Each element of `T̃^n` carries a spatial rule and, per point, the temporal
/// Legendre moments `∫_{I_n} f(x, t) L_j(t) dt` computed with `q_n + 3` Gauss
/// points. Both the scheme's load and the patchwise data projection read these
/// samples, so they see exactly the same discrete source.
#[derive(Clone, Debug)]
pub struct SourceSamples {
    pub degree: usize,
    pub elements: Vec<SampledElement>,
}

#[derive(Clone, Debug)]
pub struct SampledElement {
    pub quad: ElementQuadrature,
    /// `moments[j][k]` for mode `j` at point `k`.
    pub moments: Vec<Vec<f64>>,
}

/// Temporal Gauss points used for the source, `q + 3`.
pub fn source_time_points(q: usize) -> usize {
    q + 3
}

impl SourceSamples {
    pub fn new(tilde: &FESpace, interval: (f64, f64), q: usize, f: SpaceTimeFn) -> Self {
        let degree = 2 * tilde.max_degree() + 2;
        let (a, b) = interval;
        let times: Vec<(f64, f64, Vec<f64>)> = gauss_points(a, b, source_time_points(q))
            .into_iter()
            .map(|(t, w)| (t, w, legendre_values(q, to_reference(a, b, t))))
            .collect();
        let mesh = tilde.mesh();
        let elements = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|s| {
                let quad = ElementQuadrature::new(&mesh.geometry(s), degree);
                let mut moments = vec![vec![0.0; quad.len()]; q + 1];
                for (k, x) in quad.points.iter().enumerate() {
                    for (t, w, l) in &times {
                        let fw = f(x, *t) * w;
                        for j in 0..=q {
                            moments[j][k] += fw * l[j];
                        }
                    }
                }
                SampledElement { quad, moments }
            })
            .collect();
        Self { degree, elements }
    }

    pub fn num_modes(&self) -> usize {
        self.elements.first().map_or(0, |e| e.moments.len())
    }

    /// `∫_{I_n} (f, L_j φ) dt` for every basis function `φ` of the space on `T̃^n`.
    pub fn load(&self, tilde: &FESpace, j: usize) -> Vec<f64> {
        let locals: Vec<Vec<f64>> = self
            .elements
            .par_iter()
            .enumerate()
            .map(|(s, el)| {
                let n = tilde.element_dofs(s).len();
                let mut local = vec![0.0; n];
                let (mut vals, mut grads) = (Vec::new(), Vec::new());
                for k in 0..el.quad.len() {
                    tilde.shape(s, &el.quad.bary[k], &mut vals, &mut grads);
                    let fw = el.moments[j][k] * el.quad.weights[k];
                    for i in 0..n {
                        local[i] += fw * vals[i];
                    }
                }
                local
            })
            .collect();
        let mut out = vec![0.0; tilde.num_dofs()];
        for (s, local) in locals.iter().enumerate() {
            for (&d, &v) in tilde.element_dofs(s).iter().zip(local) {
                if d != NO_DOF {
                    out[d] += v;
                }
            }
        }
        out
    }
}

/// Mass and stiffness of one space.
pub struct SpaceOperators {
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
}

type FactorKey = (usize, u64, usize);

/// Time-stepping driver with caches for operators and step factorizations.
#[derive(Default)]
pub struct StepSolver {
    operators: Mutex<Vec<(Arc<FESpace>, Arc<SpaceOperators>)>>,
    factors: Mutex<HashMap<FactorKey, (Arc<FESpace>, Arc<SparseLu>)>>,
}

/// Result of one time step.
pub struct StepOutput {
    pub modes: Vec<Vec<f64>>,
    pub samples: Arc<SourceSamples>,
}

impl StepSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn operators(&self, space: &Arc<FESpace>) -> Arc<SpaceOperators> {
        let mut cache = self.operators.lock().expect("operator cache");
        if let Some((_, ops)) = cache.iter().find(|(s, _)| Arc::ptr_eq(s, space)) {
            return ops.clone();
        }
        let ops = Arc::new(SpaceOperators {
            mass: assemble_mass(space),
            stiffness: assemble_stiffness(space),
        });
        if cache.len() > 8 {
            cache.remove(0);
        }
        cache.push((space.clone(), ops.clone()));
        ops
    }

    /// Block operator of one step in the Legendre modal basis.
    pub fn step_matrix(&self, space: &Arc<FESpace>, tau: f64, q: usize) -> SparseOperator {
        let ops = self.operators(space);
        let nd = space.num_dofs();
        let c = time_coupling(q);
        let mut triplets = Vec::new();
        for (i, row) in c.iter().enumerate() {
            for (k, &cik) in row.iter().enumerate() {
                for (r, col, v) in ops.mass.triplets() {
                    triplets.push((i * nd + r, k * nd + col, cik * v));
                }
                if i == k {
                    let s = legendre_mass(tau, i);
                    for (r, col, v) in ops.stiffness.triplets() {
                        triplets.push((i * nd + r, k * nd + col, s * v));
                    }
                }
            }
        }
        SparseOperator::from_triplets((q + 1) * nd, (q + 1) * nd, triplets)
    }

    fn factor(&self, space: &Arc<FESpace>, tau: f64, q: usize) -> Result<Arc<SparseLu>> {
        if !(tau > 0.0) {
            return Err(Error::Solve(format!("time step {tau} is not positive")));
        }
        let key = (Arc::as_ptr(space) as usize, tau.to_bits(), q);
        if let Some((_, lu)) = self.factors.lock().expect("factor cache").get(&key) {
            return Ok(lu.clone());
        }
        let lu = Arc::new(SparseLu::new(&self.step_matrix(space, tau, q))?);
        let mut cache = self.factors.lock().expect("factor cache");
        if cache.len() > 16 {
            cache.clear();
        }
        cache.insert(key, (space.clone(), lu.clone()));
        Ok(lu)
    }

    /// Right-hand side blocks `F_i + (−1)^i (u_prev, v)` for test functions of `V^n`.
    pub fn step_rhs(&self, link: &StepLink, samples: &SourceSamples, q: usize, u_prev: &[f64]) -> Vec<Vec<f64>> {
        let tilde_ops = self.operators(&link.tilde);
        let upwind = link
            .from_cur
            .apply_transpose(&tilde_ops.mass.apply(&link.from_prev.apply(u_prev)));
        (0..=q)
            .map(|i| {
                let load = link.from_cur.apply_transpose(&samples.load(&link.tilde, i));
                let sign = crate::temporal::left_value(i);
                load.iter().zip(&upwind).map(|(l, u)| l + sign * u).collect()
            })
            .collect()
    }

    /// Solves step `n` on `link.cur` given `u(t_{n-1}) ∈ V^{n-1}`.
    pub fn solve_step(
        &self,
        partition: &TimePartition,
        n: usize,
        link: &StepLink,
        u_prev: &[f64],
        f: SpaceTimeFn,
    ) -> Result<StepOutput> {
        let q = partition.degree(n);
        let tau = partition.tau(n);
        let samples = Arc::new(SourceSamples::new(&link.tilde, partition.interval(n), q, f));
        let modes = self.solve_step_with_samples(link, tau, q, u_prev, &samples)?;
        Ok(StepOutput { modes, samples })
    }

    pub fn solve_step_with_samples(
        &self,
        link: &StepLink,
        tau: f64,
        q: usize,
        u_prev: &[f64],
        samples: &SourceSamples,
    ) -> Result<Vec<Vec<f64>>> {
        if u_prev.len() != link.prev.num_dofs() {
            return Err(Error::DegreeMismatch("previous value does not belong to V^{n-1}".into()));
        }
        let lu = self.factor(&link.cur, tau, q)?;
        let rhs: Vec<f64> = self.step_rhs(link, samples, q, u_prev).concat();
        let x = lu.solve(&rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve("non-finite solution of the step system".into()));
        }
        let nd = link.cur.num_dofs();
        Ok((0..=q).map(|i| x[i * nd..(i + 1) * nd].to_vec()).collect())
    }
}

/// Discrete solution with the per-step source samples it was computed from.
pub struct DiscreteSolution {
    pub u: SpaceTimeFunction,
    pub samples: Vec<Arc<SourceSamples>>,
}

impl DiscreteSolution {
    pub fn samples(&self, n: usize) -> &SourceSamples {
        &self.samples[n - 1]
    }
}

/// Solves on a prescribed sequence of spaces `V^0..V^N` starting from `Π_h u_0`.
pub fn solve(
    solver: &StepSolver,
    partition: &TimePartition,
    spaces: &[Arc<FESpace>],
    u0: &(dyn Fn(&Point) -> f64 + Sync),
    f: SpaceTimeFn,
) -> Result<DiscreteSolution> {
    if spaces.len() != partition.num_steps() + 1 {
        return Err(Error::DegreeMismatch(format!(
            "{} spaces for {} steps",
            spaces.len(),
            partition.num_steps()
        )));
    }
    let initial = project_l2(&spaces[0], u0)?;
    let mut u = SpaceTimeFunction::new(partition.clone(), spaces[0].clone(), initial)?;
    let mut samples = Vec::with_capacity(partition.num_steps());
    let mut last_link: Option<Arc<StepLink>> = None;
    for n in 1..=partition.num_steps() {
        let link = match &last_link {
            Some(l) if Arc::ptr_eq(&l.prev, &spaces[n - 1]) && Arc::ptr_eq(&l.cur, &spaces[n]) => l.clone(),
            _ => Arc::new(StepLink::new(spaces[n - 1].clone(), spaces[n].clone())?),
        };
        let prev = u.node_value(n - 1)?;
        let out = solver.solve_step(partition, n, &link, &prev, f)?;
        u.push_step(link.clone(), out.modes)?;
        samples.push(out.samples);
        last_link = Some(link);
    }
    Ok(DiscreteSolution { u, samples })
}

/// `I u` per step: `q_n + 2` Legendre modes in `Ṽ^n`.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub initial: Vec<f64>,
    steps: Vec<Vec<Vec<f64>>>,
}

impl Reconstruction {
    pub fn modes(&self, n: usize) -> &[Vec<f64>] {
        &self.steps[n - 1]
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Legendre modes (`q_n + 1` of them) of `∂_t I u` on step `n`.
    pub fn derivative_modes(&self, n: usize, tau: f64) -> Vec<Vec<f64>> {
        let modes = self.modes(n);
        let q1 = modes.len() - 1;
        let d = derivative_matrix(q1, tau);
        (0..q1)
            .map(|m| {
                let mut out = vec![0.0; modes[0].len()];
                for (k, c) in modes.iter().enumerate() {
                    let w = d[m][k];
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(c) {
                            *o += w * v;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Coefficients in `Ṽ^n` of `I u(t)`.
    pub fn value_at(&self, partition: &TimePartition, n: usize, t: f64) -> Vec<f64> {
        let (a, b) = partition.interval(n);
        let modes = self.modes(n);
        let l = legendre_values(modes.len() - 1, to_reference(a, b, t));
        let mut out = vec![0.0; modes[0].len()];
        for (j, c) in modes.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(c) {
                *o += l[j] * v;
            }
        }
        out
    }
}

/// `I v|_{I_n} = v + ((−1)^q / 2)(L_q − L_{q+1}) ⟦v⟧_{n−1}`.
pub fn reconstruct(u: &SpaceTimeFunction) -> Result<Reconstruction> {
    let steps = (1..=u.num_steps())
        .map(|n| {
            let link = u.link(n);
            let q = u.partition().degree(n);
            let jump = u.jump(n - 1)?;
            let mut modes: Vec<Vec<f64>> = u.modes(n).iter().map(|m| link.from_cur.apply(m)).collect();
            modes.push(vec![0.0; link.tilde.num_dofs()]);
            let [wq, wq1] = reconstruction_weights(q);
            for (i, &j) in jump.iter().enumerate() {
                modes[q][i] += wq * j;
                modes[q + 1][i] += wq1 * j;
            }
            Ok(modes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction {
        initial: u.initial().to_vec(),
        steps,
    })
}

/// Residual of a check together with the magnitude it is measured against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub absolute: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.absolute
        } else {
            self.absolute / self.scale
        }
    }
}

/// Max over the test functions `L_i φ`, `φ ∈ V^n`, of
/// `∫(∂_t I u, v) + (∇u, ∇v) dt − ∫(f, v) dt`.
pub fn verify_equivalent_form(
    solver: &StepSolver,
    u: &SpaceTimeFunction,
    iu: &Reconstruction,
    n: usize,
    samples: &SourceSamples,
) -> Residual {
    let link = u.link(n);
    let tau = u.partition().tau(n);
    let q = u.partition().degree(n);
    let tilde_ops = solver.operators(&link.tilde);
    let cur_ops = solver.operators(&link.cur);
    let dt = iu.derivative_modes(n, tau);
    let mut res = Residual { absolute: 0.0, scale: 0.0 };
    for i in 0..=q {
        let m = legendre_mass(tau, i);
        let time = link.from_cur.apply_transpose(&tilde_ops.mass.apply(&dt[i]));
        let space = cur_ops.stiffness.apply(&u.modes(n)[i]);
        let load = link.from_cur.apply_transpose(&samples.load(&link.tilde, i));
        for k in 0..load.len() {
            let (a, b, c) = (m * time[k], m * space[k], load[k]);
            res.absolute = res.absolute.max((a + b - c).abs());
            res.scale = res.scale.max(a.abs()).max(b.abs()).max(c.abs());
        }
    }
    res
}

/// Max over `q_n + 3` Gauss times of
/// `|(∂_t I u, ψ_a) + (∇u, ∇ψ_a) − (Π^{a,n} f, ψ_a)|` at an interior vertex `a`
/// of `T^n`. `projected_pairing[j]` is the `j`-th Legendre coefficient of
/// `t ↦ (Π^{a,n} f(t), ψ_a)`.
pub fn pointwise_identity_check(
    solver: &StepSolver,
    u: &SpaceTimeFunction,
    iu: &Reconstruction,
    n: usize,
    a: usize,
    projected_pairing: &[f64],
) -> Result<Residual> {
    let link = u.link(n);
    let mesh = link.cur.mesh();
    if a >= mesh.num_vertices() {
        return Err(Error::UnknownVertex(a));
    }
    if mesh.is_boundary_vertex(a) {
        return Err(Error::NotInterior(a));
    }
    let dof = link.cur.vertex_dof(a).ok_or(Error::NotInterior(a))?;
    let (t0, t1) = u.partition().interval(n);
    let tau = t1 - t0;
    let q = u.partition().degree(n);
    let tilde_ops = solver.operators(&link.tilde);
    let cur_ops = solver.operators(&link.cur);
    // modal pairings with ψ_a
    let mut psi = vec![0.0; link.cur.num_dofs()];
    psi[dof] = 1.0;
    let psi_tilde = link.from_cur.apply(&psi);
    let m_psi = tilde_ops.mass.apply(&psi_tilde);
    let a_psi = cur_ops.stiffness.apply(&psi);
    let dt: Vec<f64> = iu
        .derivative_modes(n, tau)
        .iter()
        .map(|c| c.iter().zip(&m_psi).map(|(x, y)| x * y).sum())
        .collect();
    let grad: Vec<f64> = u.modes(n).iter().map(|c| c.iter().zip(&a_psi).map(|(x, y)| x * y).sum()).collect();
    let mut res = Residual { absolute: 0.0, scale: 0.0 };
    for (t, _) in gauss_points(t0, t1, q + 3) {
        let l = legendre_values(q, to_reference(t0, t1, t));
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for j in 0..=q {
            x += l[j] * dt[j];
            y += l[j] * grad[j];
            z += l[j] * projected_pairing[j];
        }
        res.absolute = res.absolute.max((x + y - z).abs());
        res.scale = res.scale.max(x.abs()).max(y.abs()).max(z.abs());
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::BoundaryCondition;
    use crate::mesh::SimplicialMesh;
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn square_space(rounds: usize, p: usize) -> Arc<FESpace> {
        let mesh = Arc::new(SimplicialMesh::unit_square().refine_uniform(rounds));
        Arc::new(FESpace::uniform(mesh, p, BoundaryCondition::Dirichlet).unwrap())
    }

    fn s1_u0(x: &Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    fn s1_f(x: &Point, t: f64) -> f64 {
        (2.0 * PI * PI - 1.0) * s1_u0(x) * (-t).exp()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let space = square_space(3, 2);
        let tp = TimePartition::uniform(1.0, 3, 2).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space; 4], &|_| 0.0, &|_, _| 0.0).unwrap();
        for n in 1..=3 {
            assert!(sol.u.modes(n).iter().flatten().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn dg0_is_backward_euler() {
        let space = square_space(4, 2);
        let tp = TimePartition::uniform(0.5, 4, 0).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space.clone(); 5], &s1_u0, &s1_f).unwrap();
        // hand-coded backward Euler with dense matrices and the time-averaged load
        let m = assemble_mass(&space).to_dense();
        let a = assemble_stiffness(&space).to_dense();
        let mut u = DVector::from_vec(sol.u.initial().to_vec());
        for n in 1..=4 {
            let tau = tp.tau(n);
            let load = DVector::from_vec(sol.samples(n).load(&space, 0));
            let lhs: DMatrix<f64> = &m + &a * tau;
            u = lhs.lu().solve(&(&m * &u + load)).unwrap();
            let err = (&u - DVector::from_vec(sol.u.modes(n)[0].clone())).amax();
            assert!(err <= 1e-12 * u.amax(), "step {n}: {err}");
        }
    }

    #[test]
    fn dg1_reproduces_linear_in_time_solution() {
        // u = (1 + t) φ with φ ∈ V and f = φ + (1 + t) w, where M w = A φ.
        let space = square_space(3, 2);
        let nd = space.num_dofs();
        let phi: Vec<f64> = (0..nd).map(|i| ((i as f64) * 0.731).sin()).collect();
        let m = assemble_mass(&space);
        let a = assemble_stiffness(&space);
        let w = crate::fespace::SparseCholesky::new(&m).unwrap().solve(&a.apply(&phi));
        let (sp, ph) = (space.clone(), phi.clone());
        let f = move |x: &Point, t: f64| {
            let tri = sp.mesh().locate(x).unwrap();
            sp.evaluate(&ph, tri, x).0 + (1.0 + t) * sp.evaluate(&w, tri, x).0
        };
        let (sp, ph) = (space.clone(), phi.clone());
        let u0 = move |x: &Point| sp.evaluate_point(&ph, x).unwrap();
        let tp = TimePartition::uniform(1.0, 2, 1).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space.clone(); 3], &u0, &f).unwrap();
        for n in 1..=2 {
            let (t0, t1) = tp.interval(n);
            // 1 + t = (1 + midpoint) L_0 + (τ/2) L_1
            let c0 = 1.0 + 0.5 * (t0 + t1);
            let c1 = 0.5 * (t1 - t0);
            for i in 0..nd {
                assert!((sol.u.modes(n)[0][i] - c0 * phi[i]).abs() < 1e-11);
                assert!((sol.u.modes(n)[1][i] - c1 * phi[i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn reconstruction_is_continuous_and_matches_affine_interpolant() {
        let space = square_space(3, 1);
        let tp = TimePartition::uniform(1.0, 3, 0).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space.clone(); 4], &s1_u0, &s1_f).unwrap();
        let iu = reconstruct(&sol.u).unwrap();
        for n in 1..=3 {
            let (a, b) = tp.interval(n);
            let prev = sol.u.node_value(n - 1).unwrap();
            let cur = sol.u.node_value(n).unwrap();
            for &t in &[a, 0.3 * a + 0.7 * b, b] {
                let v = iu.value_at(&tp, n, t);
                let s = (t - a) / (b - a);
                for i in 0..v.len() {
                    let expect = prev[i] + s * (cur[i] - prev[i]);
                    assert!((v[i] - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn reconstruction_endpoints_random_q2() {
        let space = square_space(2, 2);
        let tp = TimePartition::uniform(1.0, 3, 2).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space.clone(); 4], &s1_u0, &|x, t| s1_f(x, t) * (1.0 + 5.0 * t * t)).unwrap();
        let iu = reconstruct(&sol.u).unwrap();
        for n in 1..=3 {
            let (a, b) = tp.interval(n);
            let left = iu.value_at(&tp, n, a);
            let right = iu.value_at(&tp, n, b);
            let prev = sol.u.node_value(n - 1).unwrap();
            let cur = sol.u.node_value(n).unwrap();
            let scale = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..left.len() {
                assert!((left[i] - prev[i]).abs() <= 1e-13 * scale);
                assert!((right[i] - cur[i]).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn equivalent_form_and_sensitivity() {
        let space = square_space(3, 2);
        let tp = TimePartition::uniform(1.0, 2, 2).unwrap();
        let solver = StepSolver::new();
        let sol = solve(&solver, &tp, &vec![space.clone(); 3], &s1_u0, &s1_f).unwrap();
        let iu = reconstruct(&sol.u).unwrap();
        for n in 1..=2 {
            let r = verify_equivalent_form(&solver, &sol.u, &iu, n, sol.samples(n));
            assert!(r.relative() <= 1e-11, "{r:?}");
        }
        // perturb one coefficient of step 2 and rebuild
        let link = sol.u.link(2).clone();
        let mut modes = sol.u.modes(2).to_vec();
        modes[0][0] += 1e-3;
        let mut u2 = SpaceTimeFunction::new(tp.clone(), space.clone(), sol.u.initial().to_vec()).unwrap();
        u2.push_step(sol.u.link(1).clone(), sol.u.modes(1).to_vec()).unwrap();
        u2.push_step(link, modes).unwrap();
        let iu2 = reconstruct(&u2).unwrap();
        let r = verify_equivalent_form(&solver, &u2, &iu2, 2, sol.samples(2));
        assert!(r.relative() > 1e-5, "{r:?}");
    }

    #[test]
    fn solvable_for_extreme_steps() {
        let space = square_space(2, 1);
        let solver = StepSolver::new();
        for &tau in &[1e-6, 1e-3, 1.0] {
            for q in 0..=3 {
                solver.factor(&space, tau, q).unwrap();
            }
        }
        assert!(solver.factor(&space, 0.0, 0).is_err());
    }
}
