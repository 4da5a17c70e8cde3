//! Equilibrated flux reconstruction from vertex-patch mixed problems.
//!
//! For every step `n` and every vertex `a` of `T^n` the data
//! `g = ψ_a(Π^a f − ∂_t I u) − ∇ψ_a·∇u` and `τ = ψ_a ∇u` are formed on the
//! sub-elements of `T̃^n` tiling the patch, and each Legendre mode is solved as
//! a constrained least-squares problem in `RTN_{p_a}`. The global flux is the
//! sum of the zero-extended patch fluxes.

pub mod patch;
pub mod rtn;

pub use patch::{PatchCache, PatchGeometry, PatchSystem, SaddleSolution};

use crate::error::{Error, Result};
use crate::fespace::{combine, SpaceTimeFunction, StepLink};
use crate::geometry::Point;
use crate::mesh::{PatchBuilder, VertexPatch};
use crate::poly::{self, Frame, VecPoly};
use crate::quadrature::{GaussRule, TriangleRule};
use crate::solver::{Reconstruction, Residual, SourceSamples};
use crate::temporal::{gauss_points, legendre_values, to_reference};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::io::Write;
use std::sync::Arc;

/// Interior patches whose data mean exceeds this (relative) are rejected.
pub const COMPATIBILITY_REJECT: f64 = 1e-8;

/// Everything a step's flux reconstruction reads from the discrete solution.
pub struct StepContext<'a> {
    pub n: usize,
    pub link: &'a Arc<StepLink>,
    pub samples: &'a SourceSamples,
    pub interval: (f64, f64),
    pub tau: f64,
    pub q: usize,
    /// Modes of `u` on step `n`, prolonged to `Ṽ^n`.
    pub u_modes: Vec<Vec<f64>>,
    /// Modes of `∂_t I u` on step `n` in `Ṽ^n`.
    pub dt_modes: Vec<Vec<f64>>,
}

impl<'a> StepContext<'a> {
    pub fn new(u: &'a SpaceTimeFunction, iu: &Reconstruction, n: usize, samples: &'a SourceSamples) -> Self {
        let link = u.link(n);
        let interval = u.partition().interval(n);
        let tau = interval.1 - interval.0;
        let q = u.partition().degree(n);
        Self {
            n,
            link,
            samples,
            interval,
            tau,
            q,
            u_modes: u.modes(n).iter().map(|m| link.from_cur.apply(m)).collect(),
            dt_modes: iu.derivative_modes(n, tau),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.q + 1
    }

    fn builder(&self) -> PatchBuilder<'_> {
        PatchBuilder::from_parent_map(
            self.link.cur.mesh(),
            self.link.overlay.parent_b.clone(),
            self.link.tilde.degrees(),
        )
    }

    /// Value of `∇u` and `∂_t I u` per mode at `x` in element `s` of `T̃^n`.
    fn fields_at(&self, s: usize, x: &Point) -> (Vec<Point>, Vec<f64>) {
        let tilde = &self.link.tilde;
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        tilde.shape_at(s, x, &mut vals, &mut grads);
        let dofs = tilde.element_dofs(s);
        let grad_u = self.u_modes.iter().map(|c| combine(dofs, c, &vals, &grads).1).collect();
        let dt = self.dt_modes.iter().map(|c| combine(dofs, c, &vals, &grads).0).collect();
        (grad_u, dt)
    }
}

/// A patch in canonical form together with its cached mixed system.
pub struct PatchSetup {
    pub patch: VertexPatch,
    pub origin: Point,
    /// `T̃^n` element of each canonical triangle.
    pub elements: Vec<usize>,
    /// `∇ψ_a` on each canonical triangle.
    pub hat_grads: Vec<Point>,
    pub system: Arc<PatchSystem>,
}

impl PatchSetup {
    pub fn interior(&self) -> bool {
        self.patch.interior
    }

    pub fn degree(&self) -> usize {
        self.patch.degree
    }

    fn hat(&self, c: usize, x: &Point) -> f64 {
        let g = self.hat_grads[c];
        1.0 + g[0] * (x[0] - self.origin[0]) + g[1] * (x[1] - self.origin[1])
    }

    fn rel(&self, x: &Point) -> Point {
        [x[0] - self.origin[0], x[1] - self.origin[1]]
    }
}

fn cmp_point(a: &Point, b: &Point) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// Extracts the patch of `a` and brings it to canonical form.
pub fn setup_patch(ctx: &StepContext, builder: &PatchBuilder, cache: &PatchCache, a: usize) -> Result<PatchSetup> {
    let patch = builder.patch(a)?;
    let cur = ctx.link.cur.mesh();
    let fine = ctx.link.tilde.mesh();
    let origin = cur.vertex(a);
    let rel = |x: Point| [x[0] - origin[0], x[1] - origin[1]];

    let mut vids: Vec<usize> = patch.sub_elements.iter().flat_map(|&s| fine.triangle(s)).collect();
    vids.sort_unstable();
    vids.dedup();
    vids.sort_by(|&u, &v| cmp_point(&rel(fine.vertex(u)), &rel(fine.vertex(v))));
    let local = |v: usize| vids.iter().position(|&w| w == v).expect("patch vertex");

    let mut order: Vec<(usize, usize)> = patch.sub_elements.iter().copied().zip(patch.sub_parent.iter().copied()).collect();
    order.sort_by(|x, y| cmp_point(&rel(fine.geometry(x.0).centroid()), &rel(fine.geometry(y.0).centroid())));

    let mut triangles = Vec::with_capacity(order.len());
    let mut free_edges = Vec::with_capacity(order.len());
    let mut elements = Vec::with_capacity(order.len());
    let mut hat_grads = Vec::with_capacity(order.len());
    for &(s, k) in &order {
        let tri = fine.triangle(s);
        let ids = tri.map(local);
        // rotate so the smallest local id comes first (orientation kept)
        let r = (0..3).min_by_key(|&i| ids[i]).unwrap_or(0);
        let rotated = [ids[r], ids[(r + 1) % 3], ids[(r + 2) % 3]];
        let edges = fine.triangle_edges(s);
        let mut mask = 0u8;
        if !patch.interior {
            for i in 0..3 {
                if fine.is_marked_edge(edges[(i + r) % 3]) {
                    mask |= 1 << i;
                }
            }
        }
        triangles.push(rotated);
        free_edges.push(mask);
        elements.push(s);
        let pos = cur.triangle(k).iter().position(|&v| v == a).ok_or(Error::UnknownVertex(a))?;
        hat_grads.push(cur.geometry(k).grad_lambda[pos]);
    }
    let geometry = PatchGeometry {
        interior: patch.interior,
        degree: patch.degree,
        vertices: vids.iter().map(|&v| rel(fine.vertex(v))).collect(),
        triangles,
        free_edges,
    };
    let system = cache.get(geometry);
    Ok(PatchSetup {
        patch,
        origin,
        elements,
        hat_grads,
        system,
    })
}

/// Legendre-mode coefficients of `Π^{a,n} f` per canonical triangle:
/// `proj[c][j]` in the scaled monomials of degree `p_a − 1` of the triangle's frame
/// (relative coordinates).
pub fn project_data(ctx: &StepContext, setup: &PatchSetup) -> Result<Vec<Vec<Vec<f64>>>> {
    let d = setup.degree() - 1;
    let nb = poly::dim(d);
    setup
        .elements
        .iter()
        .enumerate()
        .map(|(c, &s)| {
            let frame = setup.system.frames[c];
            let el = &ctx.samples.elements[s];
            let mut mass = DMatrix::<f64>::zeros(nb, nb);
            let mut rhs = DMatrix::<f64>::zeros(nb, ctx.num_modes());
            for k in 0..el.quad.len() {
                let x = &el.quad.points[k];
                let wpsi = el.quad.weights[k] * setup.hat(c, x);
                let r = poly::eval(d, &frame.local(&setup.rel(x)));
                for i in 0..nb {
                    for l in 0..nb {
                        mass[(i, l)] += wpsi * r[i] * r[l];
                    }
                    for j in 0..ctx.num_modes() {
                        let fj = el.moments[j][k] * (2 * j + 1) as f64 / ctx.tau;
                        rhs[(i, j)] += wpsi * fj * r[i];
                    }
                }
            }
            let chol = mass
                .cholesky()
                .ok_or_else(|| Error::Solve(format!("singular weighted mass on patch {}", setup.patch.vertex)))?;
            let sol = chol.solve(&rhs);
            Ok((0..ctx.num_modes()).map(|j| sol.column(j).iter().copied().collect()).collect())
        })
        .collect()
}

/// Right-hand sides of the patch problems per Legendre mode.
#[derive(Clone, Debug)]
pub struct PatchData {
    /// `(τ_j, w)` for every patch RTN basis function `w`.
    pub tau_moments: Vec<Vec<f64>>,
    /// `(g_j, r)` for every multiplier basis function `r`.
    pub g_moments: Vec<Vec<f64>>,
    /// `(g_j, 1)_{ω_a}` against the magnitude of its three terms.
    pub compatibility: Vec<Residual>,
    /// `(Π^a f_j, ψ_a)_{ω_a}`.
    pub pairing: Vec<f64>,
}

pub fn build_patch_data(ctx: &StepContext, setup: &PatchSetup, proj: &[Vec<Vec<f64>>]) -> Result<PatchData> {
    let sys = &setup.system;
    let p = setup.degree();
    if sys.geometry.degree != p || proj.iter().any(|m| m.len() != ctx.num_modes()) {
        return Err(Error::DegreeMismatch(format!("patch {} data", setup.patch.vertex)));
    }
    let nm = ctx.num_modes();
    let nr = poly::dim(p);
    let mut tau_moments = vec![vec![0.0; sys.num_flux]; nm];
    let mut g_moments = vec![vec![0.0; sys.num_mult]; nm];
    let mut mean = vec![0.0; nm];
    let mut scale = vec![0.0; nm];
    let mut pairing = vec![0.0; nm];
    for (c, &s) in setup.elements.iter().enumerate() {
        let quad = &sys.quadrature[c];
        let frame = sys.frames[c];
        let dofs = &sys.element_dofs[c];
        let hg = setup.hat_grads[c];
        for k in 0..quad.points.len() {
            let xr = quad.points[k];
            let x = [setup.origin[0] + xr[0], setup.origin[1] + xr[1]];
            let w = quad.weights[k];
            let psi = 1.0 + hg[0] * xr[0] + hg[1] * xr[1];
            let (grad_u, dt) = ctx.fields_at(s, &x);
            let r_low = poly::eval(p - 1, &frame.local(&xr));
            for j in 0..nm {
                let pf: f64 = r_low.iter().zip(&proj[c][j]).map(|(a, b)| a * b).sum();
                let gu = hg[0] * grad_u[j][0] + hg[1] * grad_u[j][1];
                let g = psi * (pf - dt[j]) - gu;
                let tau = [psi * grad_u[j][0], psi * grad_u[j][1]];
                for (i, &d) in dofs.iter().enumerate() {
                    if d != usize::MAX {
                        let phi = quad.rtn_vals[k][i];
                        tau_moments[j][d] += w * (tau[0] * phi[0] + tau[1] * phi[1]);
                    }
                }
                let r = &quad.mult_vals[k];
                for l in 0..nr {
                    g_moments[j][c * nr + l] += w * g * r[l];
                }
                mean[j] += w * g;
                scale[j] += w * ((psi * pf).abs() + (psi * dt[j]).abs() + gu.abs());
                pairing[j] += w * psi * pf;
            }
        }
    }
    let compatibility = mean
        .iter()
        .zip(&scale)
        .map(|(&m, &s)| Residual { absolute: m.abs(), scale: s })
        .collect();
    Ok(PatchData {
        tau_moments,
        g_moments,
        compatibility,
        pairing,
    })
}

/// Per-mode diagnostics of one patch solve.
#[derive(Clone, Debug)]
pub struct PatchReport {
    pub vertex: usize,
    pub interior: bool,
    pub degree: usize,
    /// Patch diameter `h_ω`.
    pub diameter: f64,
    /// `T̃^n` elements in canonical order (the roots of `system`'s geometry).
    pub elements: Vec<usize>,
    pub system: Arc<PatchSystem>,
    pub compatibility: Vec<Residual>,
    pub constraint_res: Vec<f64>,
    pub optimality_res: Vec<f64>,
    pub pairing: Vec<f64>,
}

/// One patch's share of the flux and of `f_hτ` on one `T̃^n` element.
#[derive(Clone, Debug)]
pub struct Contribution {
    pub vertex: usize,
    pub origin: Point,
    /// Frame of the polynomials below, in coordinates relative to `origin`.
    pub frame: Frame,
    pub hat_grad: Point,
    /// `σ^{a,n}` per Legendre mode.
    pub flux: Vec<VecPoly>,
    pub proj_degree: usize,
    /// `Π^{a,n} f` per Legendre mode.
    pub proj: Vec<Vec<f64>>,
}

impl Contribution {
    fn rel(&self, x: &Point) -> Point {
        [x[0] - self.origin[0], x[1] - self.origin[1]]
    }

    pub fn hat(&self, x: &Point) -> f64 {
        let r = self.rel(x);
        1.0 + self.hat_grad[0] * r[0] + self.hat_grad[1] * r[1]
    }
}

/// Solution of one patch: contributions per canonical triangle and diagnostics.
pub struct PatchFlux {
    pub elements: Vec<usize>,
    pub contributions: Vec<Contribution>,
    pub report: PatchReport,
}

pub fn solve_patch(setup: &PatchSetup, data: &PatchData, proj: Vec<Vec<Vec<f64>>>) -> Result<PatchFlux> {
    let sys = &setup.system;
    let a = setup.patch.vertex;
    let nm = data.g_moments.len();
    if setup.interior() {
        for (j, r) in data.compatibility.iter().enumerate() {
            if r.relative() > COMPATIBILITY_REJECT {
                return Err(Error::IncompatiblePatchData {
                    vertex: a,
                    mode: j,
                    mean: r.absolute,
                });
            }
        }
    }
    let mut constraint_res = Vec::with_capacity(nm);
    let mut optimality_res = Vec::with_capacity(nm);
    let mut fluxes: Vec<Vec<VecPoly>> = vec![Vec::with_capacity(nm); setup.elements.len()];
    for j in 0..nm {
        let sol = sys.solve(&data.tau_moments[j], &data.g_moments[j]);
        let (c, o) = sys.kkt_residuals(&sol, &data.tau_moments[j], &data.g_moments[j]);
        constraint_res.push(c);
        optimality_res.push(o);
        for (c, f) in fluxes.iter_mut().enumerate() {
            f.push(sys.elements[c].to_vecpoly(&sys.local_flux(c, &sol.flux)));
        }
    }
    let contributions = fluxes
        .into_iter()
        .zip(proj)
        .enumerate()
        .map(|(c, (flux, proj))| Contribution {
            vertex: a,
            origin: setup.origin,
            frame: sys.frames[c],
            hat_grad: setup.hat_grads[c],
            flux,
            proj_degree: setup.degree() - 1,
            proj,
        })
        .collect();
    Ok(PatchFlux {
        elements: setup.elements.clone(),
        contributions,
        report: PatchReport {
            vertex: a,
            interior: setup.interior(),
            degree: setup.degree(),
            diameter: setup.patch.diameter,
            elements: setup.elements.clone(),
            system: sys.clone(),
            compatibility: data.compatibility.clone(),
            constraint_res,
            optimality_res,
            pairing: data.pairing.clone(),
        },
    })
}

/// `σ_hτ` and `f_hτ` on one step, stored per `T̃^n` element as patch contributions
/// in ascending vertex order.
#[derive(Clone, Debug)]
pub struct StepFlux {
    pub step: usize,
    pub num_modes: usize,
    pub elements: Vec<Vec<Contribution>>,
    pub patches: Vec<PatchReport>,
}

impl StepFlux {
    /// The contribution of vertex `a` on element `s`, if `s` lies in its patch.
    pub fn contribution(&self, s: usize, a: usize) -> Option<&Contribution> {
        self.elements[s].iter().find(|c| c.vertex == a)
    }

    /// Value and divergence of `σ_j` at `x ∈ K̃_s` for every mode `j`.
    pub fn flux_modes(&self, s: usize, x: &Point) -> Vec<(Point, f64)> {
        let mut out = vec![([0.0, 0.0], 0.0); self.num_modes];
        for c in &self.elements[s] {
            let r = c.rel(x);
            for (o, f) in out.iter_mut().zip(&c.flux) {
                let (v, d) = f.eval(&c.frame, &r);
                o.0[0] += v[0];
                o.0[1] += v[1];
                o.1 += d;
            }
        }
        out
    }

    /// `f_hτ` per Legendre mode at `x ∈ K̃_s`.
    pub fn source_modes(&self, s: usize, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.num_modes];
        for c in &self.elements[s] {
            let psi = c.hat(x);
            let m = poly::eval(c.proj_degree, &c.frame.local(&c.rel(x)));
            for (o, pj) in out.iter_mut().zip(&c.proj) {
                *o += psi * m.iter().zip(pj).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }

    /// Largest patch degree contributing on element `s`.
    pub fn degree(&self, s: usize) -> usize {
        self.elements[s].iter().map(|c| c.proj_degree + 1).max().unwrap_or(1)
    }

    /// Writes `patch_id, step, mode, constraint_res, optimality_res` rows.
    pub fn write_kkt_csv(&self, out: &mut impl Write, header: bool) -> Result<()> {
        if header {
            writeln!(out, "patch_id,step,mode,constraint_res,optimality_res")?;
        }
        for r in &self.patches {
            for j in 0..r.constraint_res.len() {
                writeln!(
                    out,
                    "{},{},{},{:e},{:e}",
                    r.vertex, self.step, j, r.constraint_res[j], r.optimality_res[j]
                )?;
            }
        }
        Ok(())
    }
}

/// Sums patch fluxes into the per-element representation (ascending vertex order).
pub fn assemble_flux(ctx: &StepContext, mut patches: Vec<PatchFlux>) -> StepFlux {
    patches.sort_by_key(|p| p.report.vertex);
    let mut elements: Vec<Vec<Contribution>> = vec![Vec::new(); ctx.link.tilde.mesh().num_triangles()];
    let mut reports = Vec::with_capacity(patches.len());
    for p in patches {
        for (s, c) in p.elements.into_iter().zip(p.contributions) {
            elements[s].push(c);
        }
        reports.push(p.report);
    }
    StepFlux {
        step: ctx.n,
        num_modes: ctx.num_modes(),
        elements,
        patches: reports,
    }
}

/// Options for [`equilibrate_step`].
#[derive(Clone, Debug, Default)]
pub struct FluxOptions {
    /// Leave this vertex's patch out of the assembly (sensitivity probe).
    pub skip_vertex: Option<usize>,
}

/// Flux reconstruction for step `n`.
pub fn equilibrate_step(ctx: &StepContext, cache: &PatchCache, options: &FluxOptions) -> Result<StepFlux> {
    let builder = ctx.builder();
    let nv = ctx.link.cur.mesh().num_vertices();
    let patches = (0..nv)
        .into_par_iter()
        .filter(|&a| options.skip_vertex != Some(a))
        .map(|a| {
            let setup = setup_patch(ctx, &builder, cache, a)?;
            let proj = project_data(ctx, &setup)?;
            let data = build_patch_data(ctx, &setup, &proj)?;
            solve_patch(&setup, &data, proj)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_flux(ctx, patches))
}

/// Max over `T̃^n` quadrature points (degree `2 p_a`) and `q_n + 3` Gauss times of
/// `|∂_t I u + ∇·σ − f_hτ|`, against the largest `|f_hτ|` seen (or the largest
/// term when `f_hτ` vanishes).
pub fn verify_equilibration(ctx: &StepContext, flux: &StepFlux) -> Residual {
    let (t0, t1) = ctx.interval;
    let times: Vec<Vec<f64>> = gauss_points(t0, t1, ctx.q + 3)
        .into_iter()
        .map(|(t, _)| legendre_values(ctx.q, to_reference(t0, t1, t)))
        .collect();
    let mesh = ctx.link.tilde.mesh();
    let per_element: Vec<(f64, f64, f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|s| {
            let geo = mesh.geometry(s);
            let (mut res, mut fmax, mut tmax) = (0.0f64, 0.0f64, 0.0f64);
            for qp in &TriangleRule::cached(2 * flux.degree(s)).points {
                let x = geo.point(&qp.bary);
                let (_, dt) = ctx.fields_at(s, &x);
                let sig = flux.flux_modes(s, &x);
                let fh = flux.source_modes(s, &x);
                for l in &times {
                    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                    for j in 0..ctx.num_modes() {
                        a += l[j] * dt[j];
                        b += l[j] * sig[j].1;
                        c += l[j] * fh[j];
                    }
                    res = res.max((a + b - c).abs());
                    fmax = fmax.max(c.abs());
                    tmax = tmax.max(a.abs()).max(b.abs());
                }
            }
            (res, fmax, tmax)
        })
        .collect();
    let res = per_element.iter().fold(0.0f64, |m, e| m.max(e.0));
    let fmax = per_element.iter().fold(0.0f64, |m, e| m.max(e.1));
    let tmax = per_element.iter().fold(0.0f64, |m, e| m.max(e.2));
    Residual {
        absolute: res,
        scale: if fmax > 0.0 { fmax } else { tmax },
    }
}

/// Max normal-component jump of `σ_j` across interior edges of `T̃^n`, relative
/// to the largest `|σ_j|` sampled on those edges.
pub fn audit_normal_continuity(ctx: &StepContext, flux: &StepFlux) -> Residual {
    let mesh = ctx.link.tilde.mesh();
    let mut res = Residual { absolute: 0.0, scale: 0.0 };
    for e in 0..mesh.num_edges() {
        let [t1, t2] = mesh.edge_triangles(e);
        if t2 == crate::mesh::NO_TRIANGLE {
            continue;
        }
        let [a, b] = mesh.edges()[e];
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        let normal = [pb[1] - pa[1], pa[0] - pb[0]];
        let len = normal[0].hypot(normal[1]);
        let rule = GaussRule::cached(flux.degree(t1).max(flux.degree(t2)) + 2);
        for &s in &rule.points {
            let w = 0.5 * (s + 1.0);
            let x = [pa[0] + w * (pb[0] - pa[0]), pa[1] + w * (pb[1] - pa[1])];
            let f1 = flux.flux_modes(t1, &x);
            let f2 = flux.flux_modes(t2, &x);
            for (u, v) in f1.iter().zip(&f2) {
                let n1 = (u.0[0] * normal[0] + u.0[1] * normal[1]) / len;
                let n2 = (v.0[0] * normal[0] + v.0[1] * normal[1]) / len;
                res.absolute = res.absolute.max((n1 - n2).abs());
                res.scale = res.scale.max(u.0[0].hypot(u.0[1])).max(v.0[0].hypot(v.0[1]));
            }
        }
    }
    res
}

/// ψ-weighted Galerkin orthogonality of [`project_data`]: max over modes and test
/// monomials of `|Σ w ψ (Π f_j − f_j) r|` relative to `Σ w ψ |f_j r|`.
pub fn projection_orthogonality(ctx: &StepContext, setup: &PatchSetup, proj: &[Vec<Vec<f64>>]) -> Residual {
    let d = setup.degree() - 1;
    let mut res = Residual { absolute: 0.0, scale: 0.0 };
    for (c, &s) in setup.elements.iter().enumerate() {
        let frame = setup.system.frames[c];
        let el = &ctx.samples.elements[s];
        let nb = poly::dim(d);
        for j in 0..ctx.num_modes() {
            let mut err = DVector::<f64>::zeros(nb);
            let mut mag = DVector::<f64>::zeros(nb);
            for k in 0..el.quad.len() {
                let x = &el.quad.points[k];
                let wpsi = el.quad.weights[k] * setup.hat(c, x);
                let r = poly::eval(d, &frame.local(&setup.rel(x)));
                let fj = el.moments[j][k] * (2 * j + 1) as f64 / ctx.tau;
                let pf: f64 = r.iter().zip(&proj[c][j]).map(|(a, b)| a * b).sum();
                for i in 0..nb {
                    err[i] += wpsi * (pf - fj) * r[i];
                    mag[i] += (wpsi * fj * r[i]).abs();
                }
            }
            res.absolute = res.absolute.max(err.amax());
            res.scale = res.scale.max(mag.amax());
        }
    }
    res
}
