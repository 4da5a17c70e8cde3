//! A posteriori estimators, exact-error norms and efficiency reports.

mod oscillation;
mod problems;

pub use oscillation::{local_oscillation, DualNormCache, DualNormProblem};
pub use problems::{Domain, ManufacturedProblem, ScalarFn, VectorFn, BUMP_EPS};

use crate::error::Result;
use crate::fespace::{combine, ElementQuadrature, FESpace, SpaceTimeFunction};
use crate::flux::{self, FluxOptions, PatchCache, StepContext, StepFlux};
use crate::geometry::Point;
use crate::solver::{pointwise_identity_check, DiscreteSolution, Reconstruction, Residual, StepSolver};
use crate::temporal::{gauss_points, jump_factor, legendre_mass, legendre_values, to_reference};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Leading constant of the oscillation estimator, `(1 + √2) / 2`.
pub const OSC_CONSTANT: f64 = 1.207_106_781_186_547_5;

/// `[η_F,K]² = ∫_{I_n} ‖σ + ∇u‖²_K dt` for every `K ∈ T^n`, summed over the
/// `T̃^n` sub-elements of `K`. Time integration uses Legendre orthogonality.
pub fn eta_f_sq(ctx: &StepContext, flux: &StepFlux) -> Vec<f64> {
    let tilde = &ctx.link.tilde;
    let mesh = tilde.mesh();
    let per_sub: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|s| {
            let quad = ElementQuadrature::new(&mesh.geometry(s), 2 * flux.degree(s) + 2);
            let dofs = tilde.element_dofs(s);
            let (mut vals, mut grads) = (Vec::new(), Vec::new());
            let mut acc = 0.0;
            for k in 0..quad.len() {
                tilde.shape(s, &quad.bary[k], &mut vals, &mut grads);
                let sig = flux.flux_modes(s, &quad.points[k]);
                for (j, um) in ctx.u_modes.iter().enumerate() {
                    let g = combine(dofs, um, &vals, &grads).1;
                    let d = [sig[j].0[0] + g[0], sig[j].0[1] + g[1]];
                    acc += quad.weights[k] * ctx.tau / (2 * j + 1) as f64 * (d[0] * d[0] + d[1] * d[1]);
                }
            }
            acc
        })
        .collect();
    to_coarse(ctx, &per_sub)
}

fn to_coarse(ctx: &StepContext, per_sub: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ctx.link.cur.mesh().num_triangles()];
    for (s, v) in per_sub.iter().enumerate() {
        out[ctx.link.overlay.parent_b[s]] += v;
    }
    out
}

/// Per `K ∈ T^n`: both evaluations of `[η_J,K]²` and the size of their rounding errors.
pub struct JumpSquares {
    /// Space-time integral of `‖∇(u − I u)‖²_K` (Gauss rule in time).
    pub integral: Vec<f64>,
    /// Closed form `τ(q+1)/((2q+1)(2q+3)) ‖∇⟦u⟧‖²_K`.
    pub closed: Vec<f64>,
    /// `h_K⁻² ∫_{I_n} ‖u‖²_K dt`: the size of gradients of rounding errors in `u` and `I u`.
    pub magnitude: Vec<f64>,
}

/// `∇(u − I u)` is formed by cancellation between coefficients of size `|u|`,
/// which costs about `ε|u|/h_K`. Jumps below this fraction of `|u|/h_K` are
/// compared in units of it.
pub const JUMP_FLOOR: f64 = 1e-3;

impl JumpSquares {
    /// Largest relative disagreement of the two evaluations of `η_J,K`.
    pub fn identity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.integral.len() {
            let (a, b) = (self.integral[k].sqrt(), self.closed[k].sqrt());
            let r = Residual {
                absolute: (a - b).abs(),
                scale: a.max(b).max(JUMP_FLOOR * self.magnitude[k].sqrt()),
            };
            worst = worst.max(r.relative());
        }
        worst
    }
}

pub fn eta_j_sq(ctx: &StepContext, u: &SpaceTimeFunction, iu: &Reconstruction) -> Result<JumpSquares> {
    let tilde = &ctx.link.tilde;
    let mesh = tilde.mesh();
    let jump = u.jump(ctx.n - 1)?;
    let iu_modes = iu.modes(ctx.n);
    let (t0, t1) = ctx.interval;
    let times: Vec<(f64, Vec<f64>)> = gauss_points(t0, t1, ctx.q + 3)
        .into_iter()
        .map(|(t, w)| (w, legendre_values(ctx.q + 1, to_reference(t0, t1, t))))
        .collect();
    let factor = jump_factor(ctx.tau, ctx.q);
    let per_sub: Vec<[f64; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|s| {
            let quad = ElementQuadrature::new(&mesh.geometry(s), 2 * tilde.degree(s));
            let dofs = tilde.element_dofs(s);
            let (mut vals, mut grads) = (Vec::new(), Vec::new());
            let (mut integral, mut closed, mut magnitude) = (0.0, 0.0, 0.0);
            for k in 0..quad.len() {
                tilde.shape(s, &quad.bary[k], &mut vals, &mut grads);
                let gu: Vec<Point> = ctx.u_modes.iter().map(|m| combine(dofs, m, &vals, &grads).1).collect();
                let gi: Vec<Point> = iu_modes.iter().map(|m| combine(dofs, m, &vals, &grads).1).collect();
                for (w, l) in &times {
                    let mut d = [0.0, 0.0];
                    for (j, g) in gu.iter().enumerate() {
                        d[0] += l[j] * g[0];
                        d[1] += l[j] * g[1];
                    }
                    for (j, g) in gi.iter().enumerate() {
                        d[0] -= l[j] * g[0];
                        d[1] -= l[j] * g[1];
                    }
                    integral += quad.weights[k] * w * (d[0] * d[0] + d[1] * d[1]);
                }
                let gj = combine(dofs, &jump, &vals, &grads).1;
                closed += quad.weights[k] * factor * (gj[0] * gj[0] + gj[1] * gj[1]);
                for (j, m) in ctx.u_modes.iter().enumerate() {
                    let v = combine(dofs, m, &vals, &grads).0;
                    magnitude += quad.weights[k] * legendre_mass(ctx.tau, j) * v * v;
                }
            }
            let h = mesh.geometry(s).diameter();
            [integral, closed, magnitude / (h * h)]
        })
        .collect();
    let column = |i: usize| to_coarse(ctx, &per_sub.iter().map(|v| v[i]).collect::<Vec<_>>());
    Ok(JumpSquares {
        integral: column(0),
        closed: column(1),
        magnitude: column(2),
    })
}

/// `η_osc,hτ^n` with a `2(q+2)`-point Gauss rule in time and spatial degree
/// `2 p_a + 4` on each `T̃^n` element.
pub fn eta_osc(ctx: &StepContext, flux: &StepFlux, f: &(dyn Fn(&Point, f64) -> f64 + Sync)) -> f64 {
    let mesh = ctx.link.tilde.mesh();
    let (t0, t1) = ctx.interval;
    let times: Vec<(f64, f64, Vec<f64>)> = gauss_points(t0, t1, 2 * (ctx.q + 2))
        .into_iter()
        .map(|(t, w)| (t, w, legendre_values(ctx.q, to_reference(t0, t1, t))))
        .collect();
    let per_sub: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|s| {
            let geo = mesh.geometry(s);
            let quad = ElementQuadrature::new(&geo, 2 * flux.degree(s) + 4);
            let mut acc = 0.0;
            for k in 0..quad.len() {
                let x = &quad.points[k];
                let fh = flux.source_modes(s, x);
                for (t, w, l) in &times {
                    let approx: f64 = fh.iter().zip(l).map(|(a, b)| a * b).sum();
                    let d = f(x, *t) - approx;
                    acc += quad.weights[k] * w * d * d;
                }
            }
            let h = geo.diameter();
            (ctx.tau / std::f64::consts::PI + h * h / (std::f64::consts::PI * std::f64::consts::PI)) * acc
        })
        .collect();
    (OSC_CONSTANT * per_sub.iter().sum::<f64>()).sqrt()
}

/// `‖u_0 − Π_h u_0‖` with a rule of degree `2p + 8`.
pub fn eta_osc_init(space: &FESpace, initial: &[f64], u0: &(dyn Fn(&Point) -> f64 + Sync)) -> f64 {
    let mesh = space.mesh();
    let total: f64 = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let quad = ElementQuadrature::new(&mesh.geometry(t), 2 * space.degree(t) + 8);
            let dofs = space.element_dofs(t);
            let (mut vals, mut grads) = (Vec::new(), Vec::new());
            let mut acc = 0.0;
            for k in 0..quad.len() {
                space.shape(t, &quad.bary[k], &mut vals, &mut grads);
                let d = u0(&quad.points[k]) - combine(dofs, initial, &vals, &grads).0;
                acc += quad.weights[k] * d * d;
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total.sqrt()
}

/// Pieces entering `η_X` for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPieces {
    /// `Σ_K [η_F,K]² + [η_J,K]²`.
    pub flux_jump_sq: f64,
    pub osc: f64,
}

/// `η_X² = Σ_n {(Σ_K η_F² + η_J²)^{1/2} + η_osc^n}² + η_osc,init²`.
pub fn eta_total(steps: &[StepPieces], osc_init: f64) -> f64 {
    let mut sum = 0.0;
    for s in steps {
        let v = s.flux_jump_sq.sqrt() + s.osc;
        sum += v * v;
    }
    (sum + osc_init * osc_init).sqrt()
}

/// `E_X = max(‖u − u_hτ‖_X, ‖u − I u_hτ‖_X)`.
pub fn error_measure(err_u: f64, err_iu: f64) -> f64 {
    err_u.max(err_iu)
}

/// Quadrature used for exact-error integrals at refinement `level`: temporal
/// Gauss points `2(q+2) + 2·level` and spatial degree `2p + 4 + 4·level`.
pub fn error_rule(q: usize, p: usize, level: usize) -> (usize, usize) {
    (2 * (q + 2) + 2 * level, 2 * p + 4 + 4 * level)
}

/// `∫_{I_n} ‖∇(u − w)‖²_{K̃} dt` per `T̃^n` element, where `w` has the given
/// Legendre modes in `Ṽ^n`.
pub fn step_error_sq(
    ctx: &StepContext,
    modes: &[Vec<f64>],
    grad_exact: &(dyn Fn(&Point, f64) -> Point + Sync),
    level: usize,
) -> Vec<f64> {
    let tilde = &ctx.link.tilde;
    let mesh = tilde.mesh();
    let (t0, t1) = ctx.interval;
    let qm = modes.len() - 1;
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|s| {
            let (nt, deg) = error_rule(qm, tilde.degree(s), level);
            let times: Vec<(f64, f64, Vec<f64>)> = gauss_points(t0, t1, nt)
                .into_iter()
                .map(|(t, w)| (t, w, legendre_values(qm, to_reference(t0, t1, t))))
                .collect();
            let quad = ElementQuadrature::new(&mesh.geometry(s), deg);
            let dofs = tilde.element_dofs(s);
            let (mut vals, mut grads) = (Vec::new(), Vec::new());
            let mut acc = 0.0;
            for k in 0..quad.len() {
                tilde.shape(s, &quad.bary[k], &mut vals, &mut grads);
                let g: Vec<Point> = modes.iter().map(|m| combine(dofs, m, &vals, &grads).1).collect();
                for (t, w, l) in &times {
                    let e = grad_exact(&quad.points[k], *t);
                    let mut d = e;
                    for (j, gj) in g.iter().enumerate() {
                        d[0] -= l[j] * gj[0];
                        d[1] -= l[j] * gj[1];
                    }
                    acc += quad.weights[k] * w * (d[0] * d[0] + d[1] * d[1]);
                }
            }
            acc
        })
        .collect()
}

/// Options controlling [`analyze`].
#[derive(Clone, Debug)]
pub struct EstimatorOptions {
    /// Compute local oscillations and efficiency ratios.
    pub efficiency: bool,
    /// Elements whose vertex patches all satisfy `h_ω² ≤ γ τ` count as
    /// satisfying the efficiency condition.
    pub gamma_threshold: f64,
    /// Bisection rounds of the patch mesh for the local dual norms.
    pub oscillation_rounds: usize,
    /// Run the per-step invariant battery (pointwise identity, audits).
    pub verify: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            efficiency: false,
            gamma_threshold: 1.0,
            oscillation_rounds: 2,
            verify: true,
        }
    }
}

/// Invariant checks of one step (relative residuals).
#[derive(Clone, Debug, Default, Serialize)]
pub struct StepChecks {
    pub equilibration: f64,
    pub normal_continuity: f64,
    pub compatibility: f64,
    pub kkt_constraint: f64,
    pub kkt_optimality: f64,
    pub pointwise_identity: f64,
    pub jump_identity: f64,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub interval: (f64, f64),
    pub q: usize,
    /// Per `K ∈ T^n`.
    pub eta_f: Vec<f64>,
    pub eta_j: Vec<f64>,
    pub eta_j_closed: Vec<f64>,
    pub eta_osc: f64,
    /// `∫_{I_n} ‖∇(u − u_hτ)‖²_K dt` per `K ∈ T^n` (refined quadrature).
    pub error_sq: Vec<f64>,
    pub error_sq_total: f64,
    pub error_sq_coarse: f64,
    pub error_iu_sq: f64,
    pub error_iu_sq_coarse: f64,
    /// `h_ω² / τ` per vertex of `T^n`.
    pub patch_gamma: Vec<f64>,
    /// `η_osc^{a,n}` per vertex (empty unless requested).
    pub local_osc: Vec<f64>,
    pub checks: StepChecks,
}

impl StepReport {
    pub fn gamma(&self) -> f64 {
        self.patch_gamma.iter().copied().fold(0.0, f64::max)
    }

    pub fn pieces(&self) -> StepPieces {
        StepPieces {
            flux_jump_sq: self.eta_f.iter().zip(&self.eta_j).map(|(f, j)| f * f + j * j).sum(),
            osc: self.eta_osc,
        }
    }

    /// `[η_F,K]² + [η_J,K]²` per element: the adaptive indicator.
    pub fn indicators(&self) -> Vec<f64> {
        self.eta_f.iter().zip(&self.eta_j).map(|(f, j)| f * f + j * j).collect()
    }
}

/// Everything [`analyze`] computes for one step, including the flux.
pub struct StepAnalysis {
    pub report: StepReport,
    pub flux: StepFlux,
}

/// Flux reconstruction, estimators, errors and checks for step `n`.
#[allow(clippy::too_many_arguments)]
pub fn analyze_step(
    problem: &ManufacturedProblem,
    solver: &StepSolver,
    sol: &DiscreteSolution,
    iu: &Reconstruction,
    n: usize,
    patches: &PatchCache,
    duals: &DualNormCache,
    options: &EstimatorOptions,
) -> Result<StepAnalysis> {
    let u = &sol.u;
    let ctx = StepContext::new(u, iu, n, sol.samples(n));
    let flux = flux::equilibrate_step(&ctx, patches, &FluxOptions::default())?;
    let eta_f: Vec<f64> = eta_f_sq(&ctx, &flux).iter().map(|v| v.sqrt()).collect();
    let jumps = eta_j_sq(&ctx, u, iu)?;
    let f = problem.f.as_ref();
    let osc = eta_osc(&ctx, &flux, f);

    let grad = problem.grad_u.as_ref();
    let u_fine = step_error_sq(&ctx, &ctx.u_modes, grad, 1);
    let u_coarse: f64 = step_error_sq(&ctx, &ctx.u_modes, grad, 0).iter().sum();
    let iu_fine: f64 = step_error_sq(&ctx, iu.modes(n), grad, 1).iter().sum();
    let iu_coarse: f64 = step_error_sq(&ctx, iu.modes(n), grad, 0).iter().sum();

    let cur = ctx.link.cur.mesh();
    let mut patch_gamma = vec![0.0; cur.num_vertices()];
    for r in &flux.patches {
        patch_gamma[r.vertex] = r.diameter * r.diameter / ctx.tau;
    }

    let mut checks = StepChecks::default();
    if options.verify {
        checks.equilibration = flux::verify_equilibration(&ctx, &flux).relative();
        checks.normal_continuity = flux::audit_normal_continuity(&ctx, &flux).relative();
        checks.jump_identity = jumps.identity_residual();
        for r in &flux.patches {
            checks.kkt_constraint = r.constraint_res.iter().fold(checks.kkt_constraint, |m, &v| m.max(v));
            checks.kkt_optimality = r.optimality_res.iter().fold(checks.kkt_optimality, |m, &v| m.max(v));
            if r.interior {
                checks.compatibility = r.compatibility.iter().fold(checks.compatibility, |m, c| m.max(c.relative()));
            }
        }
        let pointwise: Vec<f64> = flux
            .patches
            .par_iter()
            .filter(|r| r.interior)
            .map(|r| pointwise_identity_check(solver, u, iu, n, r.vertex, &r.pairing).map(|c| c.relative()))
            .collect::<Result<Vec<_>>>()?;
        checks.pointwise_identity = pointwise.into_iter().fold(0.0, f64::max);
    }

    let local_osc = if options.efficiency {
        flux.patches
            .par_iter()
            .map(|r| local_oscillation(&flux, r, f, ctx.interval, options.oscillation_rounds, duals))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let error_sq = to_coarse(&ctx, &u_fine);
    let report = StepReport {
        step: n,
        interval: ctx.interval,
        q: ctx.q,
        eta_f,
        eta_j: jumps.integral.iter().map(|v| v.sqrt()).collect(),
        eta_j_closed: jumps.closed.iter().map(|v| v.sqrt()).collect(),
        eta_osc: osc,
        error_sq_total: error_sq.iter().sum(),
        error_sq,
        error_sq_coarse: u_coarse,
        error_iu_sq: iu_fine,
        error_iu_sq_coarse: iu_coarse,
        patch_gamma,
        local_osc,
        checks,
    };
    Ok(StepAnalysis { report, flux })
}

/// Local efficiency ratio of one element.
#[derive(Clone, Debug, Serialize)]
pub struct LocalEfficiency {
    pub step: usize,
    pub element: usize,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    pub condition: bool,
}

/// Estimator and error summary of a complete run.
#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub problem: String,
    pub steps: Vec<StepReport>,
    pub eta_osc_init: f64,
    pub eta_x: f64,
    pub error_x: f64,
    pub error_iu: f64,
    pub error_uh_iu: f64,
    pub e_x: f64,
    /// `|‖u − u_hτ‖_X(level 1) − ‖u − u_hτ‖_X(level 0)|`.
    pub delta_quad_abs: f64,
    /// `delta_quad_abs` relative to `error_x`.
    pub delta_quad: f64,
    pub effectivity: Option<f64>,
    pub gamma_max: f64,
    pub global_efficiency_ratio: Option<f64>,
    pub local_efficiency: Vec<LocalEfficiency>,
}

/// Squared norms below this are treated as zero when forming ratios.
pub const NEGLIGIBLE_SQ: f64 = 1e-24;

impl EstimatorReport {
    pub fn from_steps(
        problem: &str,
        steps: Vec<StepReport>,
        eta_osc_init: f64,
        vertex_elements: impl Fn(usize, usize) -> Vec<Vec<usize>>,
        element_vertices: impl Fn(usize, usize) -> [usize; 3],
        gamma_threshold: f64,
    ) -> Self {
        let pieces: Vec<StepPieces> = steps.iter().map(|s| s.pieces()).collect();
        let eta_x = eta_total(&pieces, eta_osc_init);
        let err_sq: f64 = steps.iter().map(|s| s.error_sq_total).sum();
        let err_sq_coarse: f64 = steps.iter().map(|s| s.error_sq_coarse).sum();
        let iu_sq: f64 = steps.iter().map(|s| s.error_iu_sq).sum();
        let jump_sq: f64 = steps.iter().flat_map(|s| s.eta_j.iter().map(|v| v * v)).sum();
        let error_x = err_sq.sqrt();
        let error_iu = iu_sq.sqrt();
        let delta_quad_abs = (error_x - err_sq_coarse.sqrt()).abs();
        let delta_quad = if error_x > 0.0 { delta_quad_abs / error_x } else { delta_quad_abs };
        let effectivity = (err_sq > NEGLIGIBLE_SQ).then(|| eta_x / error_x);
        let gamma_max = steps.iter().map(|s| s.gamma()).fold(0.0, f64::max);

        let have_osc = steps.iter().all(|s| !s.local_osc.is_empty());
        let mut global_efficiency_ratio = None;
        let mut local_efficiency = Vec::new();
        if have_osc {
            let flux_sq: f64 = steps.iter().flat_map(|s| s.eta_f.iter().map(|v| v * v)).sum();
            let osc_sq: f64 = steps.iter().flat_map(|s| s.local_osc.iter().map(|v| v * v)).sum();
            let denom = err_sq + jump_sq + osc_sq;
            global_efficiency_ratio = (denom > NEGLIGIBLE_SQ).then(|| flux_sq / denom);
            for s in &steps {
                let patches = vertex_elements(s.step, s.patch_gamma.len());
                let patch_sum: Vec<f64> = patches
                    .iter()
                    .enumerate()
                    .map(|(a, els)| {
                        let e: f64 = els.iter().map(|&k| s.error_sq[k] + s.eta_j[k] * s.eta_j[k]).sum();
                        e + s.local_osc[a] * s.local_osc[a]
                    })
                    .collect();
                for k in 0..s.eta_f.len() {
                    let vs = element_vertices(s.step, k);
                    let denom: f64 = vs.iter().map(|&a| patch_sum[a]).sum();
                    local_efficiency.push(LocalEfficiency {
                        step: s.step,
                        element: k,
                        ratio: (denom > NEGLIGIBLE_SQ).then(|| s.eta_f[k] * s.eta_f[k] / denom),
                        condition: vs.iter().all(|&a| s.patch_gamma[a] <= gamma_threshold),
                    });
                }
            }
        }
        Self {
            problem: problem.to_string(),
            steps,
            eta_osc_init,
            eta_x,
            error_x,
            error_iu,
            error_uh_iu: jump_sq.sqrt(),
            e_x: error_measure(error_x, error_iu),
            delta_quad_abs,
            delta_quad,
            effectivity,
            gamma_max,
            global_efficiency_ratio,
            local_efficiency,
        }
    }

    /// `η_X` recomputed from the stored pieces.
    pub fn recompute_eta_x(&self) -> f64 {
        let pieces: Vec<StepPieces> = self.steps.iter().map(|s| s.pieces()).collect();
        eta_total(&pieces, self.eta_osc_init)
    }

    /// Worst value of each invariant over all steps.
    pub fn worst_checks(&self) -> StepChecks {
        let mut w = StepChecks::default();
        for s in &self.steps {
            let c = &s.checks;
            w.equilibration = w.equilibration.max(c.equilibration);
            w.normal_continuity = w.normal_continuity.max(c.normal_continuity);
            w.compatibility = w.compatibility.max(c.compatibility);
            w.kkt_constraint = w.kkt_constraint.max(c.kkt_constraint);
            w.kkt_optimality = w.kkt_optimality.max(c.kkt_optimality);
            w.pointwise_identity = w.pointwise_identity.max(c.pointwise_identity);
            w.jump_identity = w.jump_identity.max(c.jump_identity);
        }
        w
    }

    /// Writes `step, element, eta_F, eta_J` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "step,element,eta_F,eta_J")?;
        for s in &self.steps {
            for k in 0..s.eta_f.len() {
                writeln!(out, "{},{},{:e},{:e}", s.step, k, s.eta_f[k], s.eta_j[k])?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> Summary {
        Summary {
            eta_x: self.eta_x,
            error_x: self.error_x,
            effectivity: self.effectivity,
            delta_quad: self.delta_quad,
            gamma_max: self.gamma_max,
            global_efficiency_ratio: self.global_efficiency_ratio,
            metadata: SummaryMetadata {
                problem: self.problem.clone(),
                steps: self.steps.len(),
                error_iu: self.error_iu,
                error_uh_iu: self.error_uh_iu,
                e_x: self.e_x,
                eta_osc_init: self.eta_osc_init,
                osc_constant: OSC_CONSTANT,
                local_oscillation: "APPROXIMATE",
                checks: self.worst_checks(),
            },
        }
    }
}

/// JSON summary of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    #[serde(rename = "eta_X")]
    pub eta_x: f64,
    #[serde(rename = "error_X")]
    pub error_x: f64,
    pub effectivity: Option<f64>,
    pub delta_quad: f64,
    pub gamma_max: f64,
    pub global_efficiency_ratio: Option<f64>,
    pub metadata: SummaryMetadata,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryMetadata {
    pub problem: String,
    pub steps: usize,
    pub error_iu: f64,
    pub error_uh_iu: f64,
    #[serde(rename = "E_X")]
    pub e_x: f64,
    pub eta_osc_init: f64,
    pub osc_constant: f64,
    pub local_oscillation: &'static str,
    pub checks: StepChecks,
}

/// Runs [`analyze_step`] on every step of a solution and aggregates.
pub fn analyze(
    problem: &ManufacturedProblem,
    solver: &StepSolver,
    sol: &DiscreteSolution,
    options: &EstimatorOptions,
) -> Result<EstimatorReport> {
    analyze_with(problem, solver, sol, options, &mut |_| Ok(()))
}

/// [`analyze`] with a callback that sees every step's flux before it is dropped.
pub fn analyze_with(
    problem: &ManufacturedProblem,
    solver: &StepSolver,
    sol: &DiscreteSolution,
    options: &EstimatorOptions,
    on_step: &mut dyn FnMut(&StepAnalysis) -> Result<()>,
) -> Result<EstimatorReport> {
    let iu = crate::solver::reconstruct(&sol.u)?;
    let patches = PatchCache::new(1024);
    let duals = DualNormCache::default();
    let mut steps = Vec::with_capacity(sol.u.num_steps());
    for n in 1..=sol.u.num_steps() {
        let a = analyze_step(problem, solver, sol, &iu, n, &patches, &duals, options)?;
        on_step(&a)?;
        steps.push(a.report);
    }
    let init = eta_osc_init(sol.u.space(0), sol.u.initial(), &|x: &Point| problem.u0(x));
    Ok(report_for(problem, &sol.u, steps, init, options.gamma_threshold))
}

/// Aggregates step reports of a solution into an [`EstimatorReport`].
pub fn report_for(
    problem: &ManufacturedProblem,
    u: &SpaceTimeFunction,
    steps: Vec<StepReport>,
    eta_osc_init: f64,
    gamma_threshold: f64,
) -> EstimatorReport {
    EstimatorReport::from_steps(
        problem.name,
        steps,
        eta_osc_init,
        |n, nv| {
            let mesh = u.space(n).mesh();
            (0..nv).map(|a| mesh.vertex_triangles(a).to_vec()).collect()
        },
        |n, k| u.space(n).mesh().triangle(k),
        gamma_threshold,
    )
}
