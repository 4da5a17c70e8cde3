use super::{uniform_mesh, SolverStats};
use crate::error::Result;
use crate::estimators::{analyze_step, analyze_with, DualNormCache, EstimatorOptions, EstimatorReport, ManufacturedProblem};
use crate::fespace::{project_l2, BoundaryCondition, FESpace, SpaceTimeFunction, StepLink};
use crate::flux::PatchCache;
use crate::geometry::Point;
use crate::mesh::{dorfler_mark, SimplicialMesh};
use crate::solver::{reconstruct, DiscreteSolution, StepSolver};
use crate::temporal::TimePartition;
use std::io::Write;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct AdaptiveOptions {
    pub initial_level: usize,
    pub theta: f64,
    /// Elements with indicator below this fraction of the mean are coarsened.
    pub coarsen_fraction: f64,
    /// Elements at this bisection depth are not refined further.
    pub max_depth: u8,
    pub p: usize,
    pub estimator: EstimatorOptions,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            initial_level: 2,
            theta: 0.5,
            coarsen_fraction: 0.1,
            max_depth: 12,
            p: 1,
            estimator: EstimatorOptions::default(),
        }
    }
}

/// Result of one marking round.
#[derive(Clone, Debug)]
pub struct Adapted {
    pub mesh: SimplicialMesh,
    pub marked: usize,
    /// Elements of the input mesh merged away by coarsening.
    pub coarsened: usize,
}

/// Dörfler-marks `indicators` (one per element of `mesh`), bisects the marked
/// elements, then coarsens elements whose indicator is below
/// `coarsen_fraction` times the mean and that survived the refinement.
pub fn adapt_mesh(mesh: &SimplicialMesh, indicators: &[f64], theta: f64, coarsen_fraction: f64, max_depth: u8) -> Adapted {
    let keys = mesh.keys();
    let marked: Vec<usize> = dorfler_mark(indicators, theta)
        .into_iter()
        .filter(|&t| keys[t].depth < max_depth)
        .collect();
    let refined = mesh.bisect(&marked);
    let mean = indicators.iter().sum::<f64>() / indicators.len().max(1) as f64;
    let index = refined.key_index();
    let candidates: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| indicators[t] < coarsen_fraction * mean)
        .filter_map(|t| index.get(&keys[t]).copied())
        .collect();
    let out = refined.coarsen(&candidates);
    let coarsened = refined.num_triangles() - out.num_triangles();
    Adapted {
        mesh: out,
        marked: marked.len(),
        coarsened: coarsened * 2,
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveStep {
    pub step: usize,
    pub elements: usize,
    pub dofs: usize,
    pub marked: usize,
    pub coarsened: usize,
    /// Sum of `[η_F,K]² + [η_J,K]²` on the trial mesh that was marked.
    pub trial_indicator: f64,
    /// Mean centroid of elements finer than the initial mesh.
    pub refined_centroid: Option<Point>,
    pub source_center: Option<Point>,
}

pub struct AdaptiveRun {
    pub steps: Vec<AdaptiveStep>,
    pub solution: DiscreteSolution,
    pub report: EstimatorReport,
    pub stats: SolverStats,
    pub kkt_csv: String,
}

impl AdaptiveRun {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "step,elements,dofs,marked,coarsened,trial_indicator,refined_x,refined_y")?;
        for s in &self.steps {
            let (x, y) = s.refined_centroid.map_or((String::new(), String::new()), |c| {
                (format!("{:.6}", c[0]), format!("{:.6}", c[1]))
            });
            writeln!(
                out,
                "{},{},{},{},{},{:e},{},{}",
                s.step, s.elements, s.dofs, s.marked, s.coarsened, s.trial_indicator, x, y
            )?;
        }
        Ok(())
    }
}

fn refined_centroid(mesh: &SimplicialMesh, base_depth: u8) -> Option<Point> {
    let mut acc = [0.0, 0.0];
    let mut count = 0usize;
    for (t, k) in mesh.keys().iter().enumerate() {
        if k.depth > base_depth {
            let c = mesh.geometry(t).centroid();
            acc[0] += c[0];
            acc[1] += c[1];
            count += 1;
        }
    }
    (count > 0).then(|| [acc[0] / count as f64, acc[1] / count as f64])
}

/// Per step: solve on `T^{n-1}`, mark the step indicators `[η_F,K]² + [η_J,K]²`,
/// refine and coarsen to get `T^n`, then solve the step again on `T^n`.
/// The finished solution is analyzed with `options.estimator`.
pub fn run_adaptive(problem: &ManufacturedProblem, partition: &TimePartition, options: &AdaptiveOptions) -> Result<AdaptiveRun> {
    let solver = StepSolver::new();
    let base = uniform_mesh(problem, options.initial_level);
    let base_depth = 2 * options.initial_level as u8;
    let space0 = Arc::new(FESpace::uniform(Arc::new(base), options.p, BoundaryCondition::Dirichlet)?);
    let initial = project_l2(&space0, &|x: &Point| problem.u0(x))?;
    let u = SpaceTimeFunction::new(partition.clone(), space0, initial)?;
    let mut sol = DiscreteSolution { u, samples: Vec::new() };
    let f = problem.f.as_ref();
    let patches = PatchCache::new(1024);
    let duals = DualNormCache::default();
    let trial_options = EstimatorOptions {
        efficiency: false,
        verify: false,
        ..options.estimator.clone()
    };
    let mut steps = Vec::with_capacity(partition.num_steps());
    for n in 1..=partition.num_steps() {
        let prev = sol.u.space(n - 1).clone();
        let prev_value = sol.u.node_value(n - 1)?;

        let trial_link = Arc::new(StepLink::new(prev.clone(), prev.clone())?);
        let out = solver.solve_step(partition, n, &trial_link, &prev_value, f)?;
        sol.u.push_step(trial_link, out.modes)?;
        sol.samples.push(out.samples);
        let iu = reconstruct(&sol.u)?;
        let trial = analyze_step(problem, &solver, &sol, &iu, n, &patches, &duals, &trial_options)?;
        let indicators = trial.report.indicators();
        sol.u.pop_step();
        sol.samples.pop();

        let adapted = adapt_mesh(
            prev.mesh(),
            &indicators,
            options.theta,
            options.coarsen_fraction,
            options.max_depth,
        );
        let mesh = Arc::new(adapted.mesh);
        let space = if mesh.same_elements(prev.mesh()) {
            prev.clone()
        } else {
            Arc::new(FESpace::uniform(mesh.clone(), options.p, BoundaryCondition::Dirichlet)?)
        };
        let link = Arc::new(StepLink::new(prev, space.clone())?);
        let out = solver.solve_step(partition, n, &link, &prev_value, f)?;
        sol.u.push_step(link, out.modes)?;
        sol.samples.push(out.samples);
        let (t0, t1) = partition.interval(n);
        steps.push(AdaptiveStep {
            step: n,
            elements: mesh.num_triangles(),
            dofs: space.num_dofs(),
            marked: adapted.marked,
            coarsened: adapted.coarsened,
            trial_indicator: indicators.iter().sum(),
            refined_centroid: refined_centroid(&mesh, base_depth),
            source_center: problem.source_center(0.5 * (t0 + t1)),
        });
    }
    let mut kkt = Vec::new();
    let mut patch_problems = 0;
    let report = analyze_with(problem, &solver, &sol, &options.estimator, &mut |a| {
        patch_problems += a.flux.patches.len() * a.flux.num_modes;
        a.flux.write_kkt_csv(&mut kkt, a.report.step == 1)
    })?;
    let stats = SolverStats {
        steps: partition.num_steps(),
        max_elements: steps.iter().map(|s| s.elements).max().unwrap_or(0),
        max_dofs: steps.iter().map(|s| s.dofs).max().unwrap_or(0),
        patch_problems,
    };
    Ok(AdaptiveRun {
        steps,
        solution: sol,
        report,
        stats,
        kkt_csv: String::from_utf8(kkt).expect("csv is ascii"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_marking_is_one_uniform_round() {
        let mesh = SimplicialMesh::unit_square().refine_uniform(2);
        let ind: Vec<f64> = (0..mesh.num_triangles()).map(|t| 1.0 + t as f64).collect();
        let adapted = adapt_mesh(&mesh, &ind, 1.0, 0.1, 30);
        assert!(adapted.mesh.same_elements(&mesh.refine_uniform(1)));
        assert_eq!(adapted.coarsened, 0);
    }

    #[test]
    fn coarsening_undoes_refinement_of_quiet_elements() {
        let fine = SimplicialMesh::unit_square().refine_uniform(4);
        let ind = vec![1e-6; fine.num_triangles()];
        let mut ind2 = ind.clone();
        ind2[0] = 1.0;
        let adapted = adapt_mesh(&fine, &ind2, 0.5, 0.1, 30);
        assert!(adapted.coarsened > 0);
        assert!(adapted.mesh.audit_conformity(true).is_ok());
        // the root is never coarsened away
        let root = SimplicialMesh::unit_square();
        let adapted = adapt_mesh(&root, &[1e-9, 1e-9], 0.0, 0.1, 30);
        assert!(adapted.mesh.same_elements(&root));
    }
}
