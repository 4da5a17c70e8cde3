//! Manufactured-solution runs: convergence tables, `(h, τ)` regime scans,
//! adaptive runs with refinement and coarsening, and the invariant battery.

mod adaptive;
mod config;

pub use adaptive::{adapt_mesh, Adapted, run_adaptive, AdaptiveOptions, AdaptiveRun, AdaptiveStep};
pub use config::{ExperimentConfig, Schedule, TimeSpec};

use crate::error::{Error, Result};
use crate::estimators::{analyze_with, EstimatorOptions, EstimatorReport, ManufacturedProblem, StepChecks, Summary};
use crate::fespace::{BoundaryCondition, FESpace};
use crate::geometry::Point;
use crate::mesh::SimplicialMesh;
use crate::solver::{solve, DiscreteSolution, StepSolver};
use crate::temporal::TimePartition;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Mesh of uniform level `level` (`2·level` bisection rounds of the root).
pub fn uniform_mesh(problem: &ManufacturedProblem, level: usize) -> SimplicialMesh {
    problem.root_mesh().refine_uniform(2 * level)
}

/// Size statistics of a run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub max_elements: usize,
    pub max_dofs: usize,
    pub patch_problems: usize,
}

/// One solve-and-estimate run on a fixed space sequence.
pub struct UniformRun {
    pub solution: DiscreteSolution,
    pub report: EstimatorReport,
    pub stats: SolverStats,
    /// `patch_id, step, mode, constraint_res, optimality_res` rows.
    pub kkt_csv: String,
}

/// Solves and analyzes `problem` on the uniform mesh of `level` for all steps.
pub fn run_uniform(
    problem: &ManufacturedProblem,
    level: usize,
    p: usize,
    partition: &TimePartition,
    options: &EstimatorOptions,
) -> Result<UniformRun> {
    let mesh = Arc::new(uniform_mesh(problem, level));
    let space = Arc::new(FESpace::uniform(mesh, p, BoundaryCondition::Dirichlet)?);
    let spaces = vec![space; partition.num_steps() + 1];
    run_on_spaces(problem, partition, &spaces, options)
}

/// Solves and analyzes `problem` on a prescribed sequence `V^0..V^N`.
pub fn run_on_spaces(
    problem: &ManufacturedProblem,
    partition: &TimePartition,
    spaces: &[Arc<FESpace>],
    options: &EstimatorOptions,
) -> Result<UniformRun> {
    let solver = StepSolver::new();
    let solution = solve(&solver, partition, spaces, &|x: &Point| problem.u0(x), problem.f.as_ref())?;
    let mut kkt = Vec::new();
    let mut patch_problems = 0;
    let report = analyze_with(problem, &solver, &solution, options, &mut |a| {
        patch_problems += a.flux.patches.len() * a.flux.num_modes;
        a.flux.write_kkt_csv(&mut kkt, a.report.step == 1)
    })?;
    let stats = SolverStats {
        steps: partition.num_steps(),
        max_elements: spaces.iter().map(|s| s.mesh().num_triangles()).max().unwrap_or(0),
        max_dofs: spaces.iter().map(|s| s.num_dofs()).max().unwrap_or(0),
        patch_problems,
    };
    Ok(UniformRun {
        solution,
        report,
        stats,
        kkt_csv: String::from_utf8(kkt).expect("csv is ascii"),
    })
}

/// Coupling of the time step to the mesh size in convergence studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// `τ ∝ h`: the number of steps doubles per level.
    Linear,
    /// `τ ∝ h²`: the number of steps quadruples per level.
    Quadratic,
}

impl std::str::FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(' ', "").as_str() {
            "tau~h" | "h" | "1" => Ok(Coupling::Linear),
            "tau~h^2" | "tau~h2" | "h^2" | "h2" | "2" => Ok(Coupling::Quadratic),
            other => Err(Error::Config(format!("unknown coupling `{other}` (expected tau~h or tau~h^2)"))),
        }
    }
}

impl Coupling {
    pub fn steps(&self, base_steps: usize, level: usize) -> usize {
        match self {
            Coupling::Linear => base_steps << level,
            Coupling::Quadratic => base_steps << (2 * level),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceOptions {
    pub levels: Vec<usize>,
    pub p: usize,
    pub q: usize,
    pub coupling: Coupling,
    /// Steps at level 0; level `L` uses `coupling.steps(base_steps, L)`.
    pub base_steps: usize,
    pub t_end: Option<f64>,
    pub estimator: EstimatorOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub elements: usize,
    pub dofs: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    pub error_x: f64,
    pub eta_x: f64,
    pub effectivity: Option<f64>,
    pub global_efficiency_ratio: Option<f64>,
    pub delta_quad: f64,
    pub e_x: f64,
    pub gamma_max: f64,
    pub seconds: f64,
    pub checks: StepChecks,
    /// Names of failed checks of the invariant battery.
    pub failed_checks: Vec<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub problem: String,
    pub p: usize,
    pub q: usize,
    pub rows: Vec<ConvergenceRow>,
    /// `log₂(e_L / e_{L+1}) / log₂(h_L / h_{L+1})` between successive rows.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log(effectivity)` against `log h`.
    pub effectivity_slope: Option<f64>,
    pub efficiency_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`; `None` for fewer than two
/// usable points.
pub fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run_convergence(problem: &ManufacturedProblem, options: &ConvergenceOptions) -> Result<ConvergenceTable> {
    if options.levels.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two levels".into()));
    }
    let t_end = options.t_end.unwrap_or(problem.t_end);
    let mut rows = Vec::with_capacity(options.levels.len());
    for &level in &options.levels {
        let start = Instant::now();
        let steps = options.coupling.steps(options.base_steps, level);
        let partition = TimePartition::uniform(t_end, steps, options.q)?;
        let run = run_uniform(problem, level, options.p, &partition, &options.estimator)?;
        let r = &run.report;
        let mesh = run.solution.u.space(0).mesh();
        rows.push(ConvergenceRow {
            level,
            elements: mesh.num_triangles(),
            dofs: run.stats.max_dofs,
            steps,
            h: mesh.max_diameter(),
            tau: partition.max_tau(),
            error_x: r.error_x,
            eta_x: r.eta_x,
            effectivity: r.effectivity,
            global_efficiency_ratio: r.global_efficiency_ratio,
            delta_quad: r.delta_quad,
            e_x: r.e_x,
            gamma_max: r.gamma_max,
            seconds: start.elapsed().as_secs_f64(),
            checks: r.worst_checks(),
            failed_checks: failed(r, &run.solution),
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| (w[0].error_x / w[1].error_x).ln() / (w[0].h / w[1].h).ln())
        .collect();
    let eff: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.effectivity.map(|e| (r.h, e))).collect();
    let gre: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.global_efficiency_ratio.map(|e| (r.h, e)))
        .collect();
    Ok(ConvergenceTable {
        problem: problem.name.to_string(),
        p: options.p,
        q: options.q,
        orders,
        effectivity_slope: log_slope(&eff),
        efficiency_slope: log_slope(&gre),
        rows,
    })
}

impl ConvergenceTable {
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(
            out,
            "level,elements,dofs,steps,h,tau,error_X,eta_X,effectivity,global_efficiency_ratio,delta_quad,order"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:.6}", self.orders[i - 1]) };
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e},{:e},{},{},{:e},{}",
                r.level,
                r.elements,
                r.dofs,
                r.steps,
                r.h,
                r.tau,
                r.error_x,
                r.eta_x,
                opt(r.effectivity),
                opt(r.global_efficiency_ratio),
                r.delta_quad,
                order
            )?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Grid of the regime scan.
#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub levels: Vec<usize>,
    /// Step counts on `(0, t_end)`.
    pub step_counts: Vec<usize>,
    pub t_end: f64,
    pub p: usize,
    pub q: usize,
    pub estimator: EstimatorOptions,
}

impl ScanOptions {
    /// Levels with `h ∈ [hmin, hmax]` and steps `τ = t_end / 2^k ∈ [taumin, taumax]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_ranges(
        problem: &ManufacturedProblem,
        (hmin, hmax): (f64, f64),
        (taumin, taumax): (f64, f64),
        t_end: f64,
        p: usize,
        q: usize,
        estimator: EstimatorOptions,
    ) -> Result<Self> {
        let root_h = problem.root_mesh().max_diameter();
        let rel = 1e-9;
        let levels: Vec<usize> = (0..12)
            .filter(|&l| {
                let h = root_h / (1u64 << l) as f64;
                h >= hmin * (1.0 - rel) && h <= hmax * (1.0 + rel)
            })
            .collect();
        let step_counts: Vec<usize> = (0..20)
            .map(|k| 1usize << k)
            .filter(|&n| {
                let tau = t_end / n as f64;
                tau >= taumin * (1.0 - rel) && tau <= taumax * (1.0 + rel)
            })
            .collect();
        if levels.is_empty() || step_counts.is_empty() {
            return Err(Error::Config("scan ranges contain no grid points".into()));
        }
        Ok(Self {
            levels,
            step_counts,
            t_end,
            p,
            q,
            estimator,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanCell {
    pub level: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    pub gamma_max: f64,
    pub effectivity: Option<f64>,
    pub delta_quad: f64,
    pub global_efficiency_ratio: Option<f64>,
    /// `γ_max ≤ γ` threshold.
    pub condition: bool,
    pub checks: StepChecks,
    pub failed_checks: Vec<&'static str>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanTable {
    pub problem: String,
    pub gamma_threshold: f64,
    pub cells: Vec<ScanCell>,
}

pub fn run_regime_scan(problem: &ManufacturedProblem, options: &ScanOptions) -> Result<ScanTable> {
    let mut estimator = options.estimator.clone();
    estimator.efficiency = true;
    let mut cells = Vec::new();
    for &level in &options.levels {
        for &steps in &options.step_counts {
            let partition = TimePartition::uniform(options.t_end, steps, options.q)?;
            let run = run_uniform(problem, level, options.p, &partition, &estimator)?;
            let r = &run.report;
            cells.push(ScanCell {
                level,
                steps,
                h: run.solution.u.space(0).mesh().max_diameter(),
                tau: partition.max_tau(),
                gamma_max: r.gamma_max,
                effectivity: r.effectivity,
                delta_quad: r.delta_quad,
                global_efficiency_ratio: r.global_efficiency_ratio,
                condition: r.gamma_max <= estimator.gamma_threshold,
                checks: r.worst_checks(),
                failed_checks: failed(r, &run.solution),
            });
        }
    }
    Ok(ScanTable {
        problem: problem.name.to_string(),
        gamma_threshold: estimator.gamma_threshold,
        cells,
    })
}

impl ScanTable {
    /// Per level, the condition-satisfying cell with the smallest `τ`: the
    /// cells closest to the `h_ω² = γ τ` boundary of the regime.
    pub fn boundary_cells(&self) -> Vec<&ScanCell> {
        let mut levels: Vec<usize> = self.cells.iter().map(|c| c.level).collect();
        levels.dedup();
        levels
            .into_iter()
            .filter_map(|l| {
                self.cells
                    .iter()
                    .filter(|c| c.level == l && c.condition)
                    .min_by(|a, b| a.tau.total_cmp(&b.tau))
            })
            .collect()
    }

    /// Log-slope of the global efficiency ratio against `h` over [`Self::boundary_cells`].
    pub fn efficiency_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .boundary_cells()
            .iter()
            .filter_map(|c| c.global_efficiency_ratio.map(|r| (c.h, r)))
            .collect();
        log_slope(&pts)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "level,steps,h,tau,gamma_max,effectivity,delta_quad,global_efficiency_ratio,condition")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{},{:e},{},{}",
                c.level,
                c.steps,
                c.h,
                c.tau,
                c.gamma_max,
                opt(c.effectivity),
                c.delta_quad,
                opt(c.global_efficiency_ratio),
                c.condition
            )?;
        }
        Ok(())
    }
}

/// Tolerances of the invariant battery.
pub mod tolerance {
    pub const EQUILIBRATION: f64 = 1e-10;
    pub const JUMP_IDENTITY: f64 = 1e-12;
    pub const POINTWISE_IDENTITY: f64 = 1e-11;
    pub const COMPATIBILITY: f64 = 1e-11;
    pub const KKT: f64 = 1e-11;
    pub const NORMAL_CONTINUITY: f64 = 1e-11;
    pub const DELTA_QUAD: f64 = 1e-6;
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// The invariant battery on a finished run: flux and scheme identities at
/// their tolerances, the upper bound `η_X ≥ (1 − δ) ‖u − u_hτ‖_X` and
/// `E_X ≤ 2η_X + δ`.
pub fn verify_report(report: &EstimatorReport) -> Vec<Check> {
    let w = report.worst_checks();
    let mut checks = vec![
        Check::at_most("equilibration", w.equilibration, tolerance::EQUILIBRATION),
        Check::at_most("normal_continuity", w.normal_continuity, tolerance::NORMAL_CONTINUITY),
        Check::at_most("jump_identity", w.jump_identity, tolerance::JUMP_IDENTITY),
        Check::at_most("pointwise_identity", w.pointwise_identity, tolerance::POINTWISE_IDENTITY),
        Check::at_most("compatibility", w.compatibility, tolerance::COMPATIBILITY),
        Check::at_most("kkt_constraint", w.kkt_constraint, tolerance::KKT),
        Check::at_most("kkt_optimality", w.kkt_optimality, tolerance::KKT),
    ];
    let shortfall = match report.effectivity {
        Some(e) => (1.0 - report.delta_quad) - e,
        None => 0.0,
    };
    checks.push(Check::at_most("upper_bound_shortfall", shortfall, 0.0));
    let excess = report.e_x - 2.0 * report.eta_x - report.delta_quad_abs;
    checks.push(Check::at_most("e_x_bound_excess", excess, 0.0));
    checks
}

fn failed(report: &EstimatorReport, solution: &DiscreteSolution) -> Vec<&'static str> {
    let mut checks = verify_report(report);
    checks.push(verify_meshes(solution));
    checks.into_iter().filter(|c| !c.pass).map(|c| c.name).collect()
}

/// Conformity audit of every mesh of a solution.
pub fn verify_meshes(solution: &DiscreteSolution) -> Check {
    let failures = (0..=solution.u.num_steps())
        .filter(|&n| solution.u.space(n).mesh().audit_conformity(true).is_err())
        .count();
    Check::at_most("mesh_conformity_failures", failures as f64, 0.0)
}

/// Record of a configured run.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub problem: String,
    pub levels: Vec<LevelRecord>,
    pub wall_clock_seconds: f64,
    pub stats: SolverStats,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub h: f64,
    pub tau_max: f64,
    pub summary: Summary,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs a configuration and writes its outputs when an output directory is set.
pub fn run_config(config: &ExperimentConfig, verify: bool) -> Result<RunRecord> {
    let start = Instant::now();
    let problem = config.problem();
    let partition = config.partition()?;
    let estimator = EstimatorOptions {
        efficiency: config.efficiency,
        gamma_threshold: config.gamma_threshold,
        oscillation_rounds: config.oscillation_rounds,
        verify,
    };
    let mut levels = Vec::new();
    let mut stats = SolverStats::default();
    let mut checks = Vec::new();
    let mut record_level = |level: usize, report: &EstimatorReport, sol: &DiscreteSolution, kkt: &str, extra: Option<&str>| -> Result<()> {
        let mesh = sol.u.space(0).mesh();
        levels.push(LevelRecord {
            level,
            h: mesh.max_diameter(),
            tau_max: partition.max_tau(),
            summary: report.summary(),
        });
        if verify {
            checks.extend(verify_report(report));
            checks.push(verify_meshes(sol));
        }
        if let Some(dir) = &config.output {
            let tag = format!("level{level}");
            write_outputs(dir, &tag, report, kkt)?;
            if let Some(extra) = extra {
                fs::write(dir.join(format!("{tag}_adaptive.csv")), extra)?;
            }
        }
        Ok(())
    };
    match &config.schedule {
        Schedule::Uniform { levels: ls } => {
            for &level in ls {
                let run = run_uniform(&problem, level, config.p, &partition, &estimator)?;
                record_level(level, &run.report, &run.solution, &run.kkt_csv, None)?;
                stats.steps = stats.steps.max(run.stats.steps);
                stats.max_elements = stats.max_elements.max(run.stats.max_elements);
                stats.max_dofs = stats.max_dofs.max(run.stats.max_dofs);
                stats.patch_problems += run.stats.patch_problems;
            }
        }
        Schedule::Adaptive {
            level,
            theta,
            coarsen_fraction,
            max_depth,
        } => {
            let options = AdaptiveOptions {
                initial_level: *level,
                theta: *theta,
                coarsen_fraction: *coarsen_fraction,
                max_depth: *max_depth,
                p: config.p,
                estimator: estimator.clone(),
            };
            let run = run_adaptive(&problem, &partition, &options)?;
            let mut table = Vec::new();
            run.write_csv(&mut table)?;
            let table = String::from_utf8(table).expect("csv is ascii");
            record_level(*level, &run.report, &run.solution, &run.kkt_csv, Some(&table))?;
            stats = run.stats.clone();
        }
    }
    let record = RunRecord {
        config_hash: config.hash(),
        problem: problem.name.to_string(),
        levels,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        stats,
        checks,
    };
    if let Some(dir) = &config.output {
        fs::write(dir.join("run.json"), serde_json::to_string_pretty(&record)?)?;
    }
    Ok(record)
}

/// Writes `<tag>_estimators.csv`, `<tag>_kkt.csv` and `<tag>_summary.json`.
pub fn write_outputs(dir: &Path, tag: &str, report: &EstimatorReport, kkt_csv: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(dir.join(format!("{tag}_estimators.csv")), csv)?;
    fs::write(dir.join(format!("{tag}_kkt.csv")), kkt_csv)?;
    fs::write(
        dir.join(format!("{tag}_summary.json")),
        serde_json::to_string_pretty(&report.summary())?,
    )?;
    Ok(())
}
