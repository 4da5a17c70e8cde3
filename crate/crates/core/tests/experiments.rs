mod common;

use common::{backward_euler, square_space};
use heatflux::estimators::{EstimatorOptions, ManufacturedProblem, BUMP_EPS};
use heatflux::experiments::{
    run_adaptive, run_config, run_convergence, uniform_mesh, verify_meshes, verify_report, AdaptiveOptions,
    ConvergenceOptions, Coupling, ExperimentConfig,
};
use heatflux::fespace::project_l2;
use heatflux::geometry::Point;
use heatflux::solver::{solve, StepSolver};
use heatflux::temporal::TimePartition;
use nalgebra::DVector;
use std::fs;
use std::path::PathBuf;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatflux-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn dg0_matches_backward_euler() {
    let problem = ManufacturedProblem::s1();
    let space = square_space(3, 2);
    let partition = TimePartition::geometric(0.5, 4, 1.5, 0).unwrap();
    let initial = project_l2(&space, &|x: &Point| problem.u0(x)).unwrap();
    let spaces = vec![space.clone(); 5];
    let sol = solve(&StepSolver::new(), &partition, &spaces, &|x: &Point| problem.u0(x), problem.f.as_ref()).unwrap();
    let reference = backward_euler(&space, &partition, &initial, problem.f.as_ref());
    for (n, be) in reference.iter().enumerate() {
        let dg = DVector::from_column_slice(&sol.u.modes(n + 1)[0]);
        let diff = (&dg - be).amax() / be.amax();
        assert!(diff <= 1e-12, "step {}: {diff:e}", n + 1);
    }
}

#[test]
fn adaptive_run_tracks_the_moving_source() {
    let problem = ManufacturedProblem::s4();
    let partition = TimePartition::uniform(problem.t_end, 10, 0).unwrap();
    let run = run_adaptive(&problem, &partition, &AdaptiveOptions::default()).unwrap();
    let radius = 3.0 * BUMP_EPS.sqrt();
    for s in &run.steps {
        let (c, x) = (s.source_center.unwrap(), s.refined_centroid.expect("something is refined"));
        let d = ((c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2)).sqrt();
        assert!(d <= radius, "step {}: centroid {x:?} is {d} from {c:?}", s.step);
    }
    assert!(run.steps.iter().any(|s| s.marked > 0));
    assert!(run.steps.iter().any(|s| s.coarsened > 0));
    for c in verify_report(&run.report) {
        assert!(c.pass, "{} {:e}", c.name, c.value);
    }
    assert!(verify_meshes(&run.solution).pass);
}

#[test]
fn full_marking_refines_uniformly_each_step() {
    let problem = ManufacturedProblem::s1();
    let partition = TimePartition::uniform(0.5, 2, 0).unwrap();
    let options = AdaptiveOptions {
        initial_level: 1,
        theta: 1.0,
        coarsen_fraction: 0.0,
        estimator: EstimatorOptions {
            verify: false,
            ..Default::default()
        },
        ..Default::default()
    };
    let run = run_adaptive(&problem, &partition, &options).unwrap();
    let initial = run.solution.u.space(0).mesh();
    assert_eq!(initial.num_triangles(), uniform_mesh(&problem, 1).num_triangles());
    for n in 1..=2 {
        let expected = initial.refine_uniform(n);
        assert!(run.solution.u.space(n).mesh().same_elements(&expected), "step {n}");
    }
}

#[test]
fn identical_configs_give_identical_outputs() {
    let text = "problem = S2\np = 2\nq = 1\nlevels = 1\nsteps = 3\nt_end = 0.5\nefficiency = true\n";
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        let dir = scratch_dir(name);
        cfg.output = Some(dir.clone());
        let record = run_config(&cfg, true).unwrap();
        assert!(record.passed());
        let read = |f: &str| fs::read(dir.join(f)).unwrap();
        outputs.push((
            record.config_hash,
            read("level1_estimators.csv"),
            read("level1_kkt.csv"),
            read("level1_summary.json"),
        ));
        fs::remove_dir_all(&dir).unwrap();
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn adaptive_config_writes_step_table() {
    let text = "problem = S4\nschedule = adaptive\nlevels = 1\nsteps = 3\nt_end = 0.3\ntheta = 0.4\n";
    let mut cfg = ExperimentConfig::parse(text).unwrap();
    let dir = scratch_dir("adaptive");
    cfg.output = Some(dir.clone());
    let record = run_config(&cfg, true).unwrap();
    assert!(record.passed(), "{:?}", record.checks);
    let table = fs::read_to_string(dir.join("level1_adaptive.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(dir.join("run.json").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn short_convergence_study_reports_orders() {
    let problem = ManufacturedProblem::s1();
    let options = ConvergenceOptions {
        levels: vec![2, 3],
        p: 1,
        q: 0,
        coupling: Coupling::Linear,
        base_steps: 1,
        t_end: None,
        estimator: EstimatorOptions::default(),
    };
    let table = run_convergence(&problem, &options).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[1].steps, 2 * table.rows[0].steps);
    assert!((table.orders[0] - 1.0).abs() < 0.2, "{:?}", table.orders);
    assert!(table.rows.iter().all(|r| r.failed_checks.is_empty()));
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}
