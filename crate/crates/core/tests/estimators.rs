use heatflux::estimators::{
    analyze, analyze_step, eta_f_sq, eta_total, step_error_sq, DualNormCache, EstimatorOptions, ManufacturedProblem,
    StepPieces,
};
use heatflux::experiments::{run_on_spaces, run_uniform, verify_report};
use heatflux::fespace::{combine, BoundaryCondition, ElementQuadrature, FESpace};
use heatflux::flux::{self, FluxOptions, PatchCache, StepContext};
use heatflux::geometry::Point;
use heatflux::mesh::{Forest, SimplicialMesh};
use heatflux::solver::{reconstruct, solve, StepSolver};
use heatflux::temporal::{gauss_points, legendre_values, to_reference, TimePartition};
use std::f64::consts::PI;
use std::sync::Arc;

fn quiet() -> EstimatorOptions {
    EstimatorOptions {
        verify: false,
        ..Default::default()
    }
}

#[test]
fn s1_energy_norm_matches_closed_form() {
    let problem = ManufacturedProblem::s1();
    let partition = TimePartition::uniform(1.0, 4, 0).unwrap();
    let run = run_uniform(&problem, 1, 1, &partition, &quiet()).unwrap();
    let u = &run.solution.u;
    let iu = reconstruct(u).unwrap();
    let mut norm_sq = 0.0;
    for n in 1..=u.num_steps() {
        let ctx = StepContext::new(u, &iu, n, run.solution.samples(n));
        let zero = vec![vec![0.0; ctx.link.tilde.num_dofs()]; ctx.num_modes()];
        norm_sq += step_error_sq(&ctx, &zero, problem.grad_u.as_ref(), 2).iter().sum::<f64>();
    }
    let exact = PI * PI * (1.0 - (-2.0f64).exp()) / 4.0;
    assert!((norm_sq - exact).abs() <= 1e-10 * exact, "{norm_sq} vs {exact}");
}

#[test]
fn discrete_exact_problem_has_vanishing_estimators() {
    let problem = ManufacturedProblem::s3();
    let partition = TimePartition::uniform(problem.t_end, 3, 1).unwrap();
    let options = EstimatorOptions {
        efficiency: true,
        ..Default::default()
    };
    let run = run_uniform(&problem, 1, 3, &partition, &options).unwrap();
    let r = &run.report;
    let scale = 1e-10;
    for s in &r.steps {
        assert!(s.eta_f.iter().all(|v| *v <= scale), "eta_F {:?}", s.eta_f);
        assert!(s.eta_j.iter().all(|v| *v <= scale), "eta_J {:?}", s.eta_j);
        assert!(s.eta_osc <= scale, "eta_osc {}", s.eta_osc);
        assert!(s.local_osc.iter().all(|v| *v <= scale));
    }
    assert!(r.error_x <= scale && r.eta_x <= scale, "{} {}", r.error_x, r.eta_x);
    assert!(r.effectivity.is_none());
    assert!(r.global_efficiency_ratio.is_none());
    assert!(r.local_efficiency.iter().all(|l| l.ratio.is_none()));
    for c in verify_report(r) {
        assert!(c.pass, "{} {:e}", c.name, c.value);
    }
}

#[test]
fn jump_estimator_matches_closed_form_for_all_degrees() {
    let problem = ManufacturedProblem::s2();
    for q in 0..=3 {
        let partition = TimePartition::uniform(0.5, 3, q).unwrap();
        let run = run_uniform(&problem, 1, 2, &partition, &EstimatorOptions::default()).unwrap();
        for s in &run.report.steps {
            for (a, b) in s.eta_j.iter().zip(&s.eta_j_closed) {
                assert!((a - b).abs() <= 1e-12 * a.max(*b).max(1e-300), "q={q}: {a} vs {b}");
            }
            assert!(s.checks.jump_identity <= 1e-12);
        }
        // jumps are genuinely nonzero
        assert!(run.report.error_uh_iu > 1e-6);
    }
}

#[test]
fn flux_estimator_agrees_with_global_quadrature_pass() {
    let problem = ManufacturedProblem::s2();
    let partition = TimePartition::uniform(0.5, 2, 1).unwrap();
    let mesh = Arc::new(problem.root_mesh().refine_uniform(3));
    let space = Arc::new(FESpace::uniform(mesh, 2, BoundaryCondition::Dirichlet).unwrap());
    let spaces = vec![space; 3];
    let solver = StepSolver::new();
    let sol = solve(&solver, &partition, &spaces, &|x: &Point| problem.u0(x), problem.f.as_ref()).unwrap();
    let iu = reconstruct(&sol.u).unwrap();
    for n in 1..=2 {
        let ctx = StepContext::new(&sol.u, &iu, n, sol.samples(n));
        let flux = flux::equilibrate_step(&ctx, &PatchCache::default(), &FluxOptions::default()).unwrap();
        let per_element: f64 = eta_f_sq(&ctx, &flux).iter().sum();
        let tilde = &ctx.link.tilde;
        let (t0, t1) = ctx.interval;
        let times: Vec<(f64, Vec<f64>)> = gauss_points(t0, t1, ctx.q + 2)
            .into_iter()
            .map(|(t, w)| (w, legendre_values(ctx.q, to_reference(t0, t1, t))))
            .collect();
        let mut global = 0.0;
        let (mut vals, mut grads) = (Vec::new(), Vec::new());
        for s in 0..tilde.mesh().num_triangles() {
            let quad = ElementQuadrature::new(&tilde.mesh().geometry(s), 2 * flux.degree(s) + 4);
            for k in 0..quad.len() {
                tilde.shape(s, &quad.bary[k], &mut vals, &mut grads);
                let sigma = flux.flux_modes(s, &quad.points[k]);
                let grad: Vec<Point> = ctx
                    .u_modes
                    .iter()
                    .map(|m| combine(tilde.element_dofs(s), m, &vals, &grads).1)
                    .collect();
                for (w, l) in &times {
                    let mut d = [0.0, 0.0];
                    for j in 0..ctx.num_modes() {
                        d[0] += l[j] * (sigma[j].0[0] + grad[j][0]);
                        d[1] += l[j] * (sigma[j].0[1] + grad[j][1]);
                    }
                    global += quad.weights[k] * w * (d[0] * d[0] + d[1] * d[1]);
                }
            }
        }
        assert!((global - per_element).abs() <= 1e-13 * global, "{global} vs {per_element}");
    }
}

fn polynomial_source_problem() -> ManufacturedProblem {
    ManufacturedProblem {
        f: Arc::new(|x: &Point, t: f64| 1.0 + x[0] * t - 0.5 * x[1]),
        ..ManufacturedProblem::s1()
    }
}

#[test]
fn oscillation_vanishes_for_source_in_projection_space() {
    let problem = polynomial_source_problem();
    let partition = TimePartition::uniform(0.5, 2, 1).unwrap();
    let options = EstimatorOptions {
        efficiency: true,
        ..Default::default()
    };
    let run = run_uniform(&problem, 1, 1, &partition, &options).unwrap();
    for s in &run.report.steps {
        assert!(s.eta_osc <= 1e-13, "{}", s.eta_osc);
        assert!(s.local_osc.iter().all(|v| *v <= 1e-12), "{:?}", s.local_osc);
    }
    // a source outside the space does oscillate
    let run = run_uniform(&ManufacturedProblem::s1(), 1, 1, &partition, &options).unwrap();
    assert!(run.report.steps.iter().all(|s| s.eta_osc > 1e-6));
}

#[test]
fn local_oscillation_grows_with_dual_mesh_refinement() {
    let problem = ManufacturedProblem::s1();
    let partition = TimePartition::uniform(0.5, 2, 0).unwrap();
    let mesh = Arc::new(problem.root_mesh().refine_uniform(2));
    let space = Arc::new(FESpace::uniform(mesh, 1, BoundaryCondition::Dirichlet).unwrap());
    let solver = StepSolver::new();
    let sol = solve(&solver, &partition, &vec![space; 3], &|x: &Point| problem.u0(x), problem.f.as_ref()).unwrap();
    let iu = reconstruct(&sol.u).unwrap();
    let patches = PatchCache::default();
    let local = |rounds: usize| {
        let options = EstimatorOptions {
            efficiency: true,
            oscillation_rounds: rounds,
            verify: false,
            ..Default::default()
        };
        let duals = DualNormCache::default();
        analyze_step(&problem, &solver, &sol, &iu, 1, &patches, &duals, &options).unwrap().report.local_osc
    };
    let (one, two) = (local(2), local(4));
    assert_eq!(one.len(), two.len());
    for (a, b) in one.iter().zip(&two) {
        assert!(*b >= a - 1e-12, "{b} < {a}");
    }
}

#[test]
fn aggregation_is_reproducible_and_order_independent() {
    let problem = ManufacturedProblem::s2();
    let partition = TimePartition::uniform(0.5, 4, 1).unwrap();
    let run = run_uniform(&problem, 1, 1, &partition, &quiet()).unwrap();
    let r = &run.report;
    assert_eq!(r.recompute_eta_x().to_bits(), r.eta_x.to_bits());

    let mut pieces: Vec<StepPieces> = r.steps.iter().map(|s| s.pieces()).collect();
    let reference = eta_total(&pieces, r.eta_osc_init);
    pieces.reverse();
    let reversed = eta_total(&pieces, r.eta_osc_init);
    assert!((reference - reversed).abs() <= 1e-13 * reference);

    // per-element sums in a different order
    let mut steps = r.steps.clone();
    for s in &mut steps {
        s.eta_f.reverse();
        s.eta_j.reverse();
    }
    let pieces: Vec<StepPieces> = steps.iter().map(|s| s.pieces()).collect();
    assert!((eta_total(&pieces, r.eta_osc_init) - reference).abs() <= 1e-13 * reference);
}

#[test]
fn estimator_is_invariant_under_root_relabeling() {
    let problem = ManufacturedProblem::s1();
    let partition = TimePartition::uniform(0.5, 2, 1).unwrap();
    let relabeled = Forest::from_triangulation(
        vec![[1.0, 1.0], [0.0, 1.0], [1.0, 0.0], [0.0, 0.0]],
        &[[1, 3, 0], [2, 0, 3]],
    )
    .unwrap();
    let meshes = [
        SimplicialMesh::unit_square().refine_uniform(3),
        SimplicialMesh::root(&relabeled).refine_uniform(3),
    ];
    let eta: Vec<(f64, f64)> = meshes
        .into_iter()
        .map(|m| {
            let space = Arc::new(FESpace::uniform(Arc::new(m), 2, BoundaryCondition::Dirichlet).unwrap());
            let run = run_on_spaces(&problem, &partition, &vec![space; 3], &quiet()).unwrap();
            (run.report.eta_x, run.report.error_x)
        })
        .collect();
    assert!((eta[0].0 - eta[1].0).abs() <= 1e-13 * eta[0].0, "{:?}", eta);
    assert!((eta[0].1 - eta[1].1).abs() <= 1e-13 * eta[0].1, "{:?}", eta);
}

#[test]
fn quadrature_uncertainty_is_small_on_smooth_problems() {
    for (problem, p, q) in [(ManufacturedProblem::s1(), 1, 0), (ManufacturedProblem::s2(), 2, 1)] {
        let partition = TimePartition::uniform(0.5, 4, q).unwrap();
        let run = run_uniform(&problem, 2, p, &partition, &quiet()).unwrap();
        assert!(run.report.delta_quad <= 1e-8, "{}: {}", problem.name, run.report.delta_quad);
        let e = run.report.effectivity.unwrap();
        assert!(e >= 1.0 - run.report.delta_quad, "{e}");
    }
}

#[test]
fn analyze_matches_step_by_step_analysis() {
    let problem = ManufacturedProblem::s1();
    let partition = TimePartition::uniform(0.5, 2, 0).unwrap();
    let run = run_uniform(&problem, 1, 1, &partition, &quiet()).unwrap();
    let again = analyze(&problem, &StepSolver::new(), &run.solution, &quiet()).unwrap();
    assert_eq!(again.eta_x.to_bits(), run.report.eta_x.to_bits());
    assert_eq!(again.error_x.to_bits(), run.report.error_x.to_bits());
}
