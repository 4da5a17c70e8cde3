use clap::{Args, Parser, Subcommand};
use heatflux::estimators::{EstimatorOptions, ManufacturedProblem};
use heatflux::experiments::{
    run_adaptive, run_config, run_convergence, run_regime_scan, verify_meshes, verify_report, write_outputs,
    AdaptiveOptions, ConvergenceOptions, Coupling, ExperimentConfig, ScanOptions,
};
use heatflux::temporal::TimePartition;
use heatflux::Result;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "heatflux", version, about = "Heat equation solver with guaranteed a posteriori error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run the full invariant battery and exit nonzero on any failure.
    #[arg(long)]
    verify: bool,
    /// Directory for CSV and JSON outputs.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flat key=value configuration file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Uniform refinement study with coupled time steps.
    Convergence {
        #[arg(long, default_value = "S1")]
        problem: String,
        /// Number of levels.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// First level (level L is 2L bisection rounds of the root mesh).
        #[arg(long, default_value_t = 1)]
        start_level: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// `tau~h` or `tau~h^2`.
        #[arg(long, default_value = "tau~h")]
        coupling: String,
        /// Steps at level 0.
        #[arg(long, default_value_t = 1)]
        base_steps: usize,
        /// Also compute local oscillations and efficiency ratios.
        #[arg(long)]
        efficiency: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Grid of (h, tau) cells probing the h² ≲ tau condition.
    Scan {
        #[arg(long, default_value = "S1")]
        problem: String,
        #[arg(long)]
        hmin: f64,
        #[arg(long)]
        hmax: f64,
        #[arg(long)]
        taumin: f64,
        #[arg(long)]
        taumax: f64,
        #[arg(long, default_value_t = 0.25)]
        t_end: f64,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// Threshold on max h_ω²/τ for condition-satisfying cells.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Dörfler refinement with coarsening between time steps.
    Adaptive {
        #[arg(long, default_value = "S4")]
        problem: String,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        #[arg(long, default_value_t = 0.1)]
        coarsen_fraction: f64,
        #[arg(long, default_value_t = 12)]
        max_depth: u8,
        #[command(flatten)]
        common: Common,
    },
}

fn estimator(verify: bool, efficiency: bool, gamma: f64) -> EstimatorOptions {
    EstimatorOptions {
        efficiency,
        gamma_threshold: gamma,
        verify,
        ..Default::default()
    }
}

fn write(output: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { config, common } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if common.output.is_some() {
                cfg.output = common.output;
            }
            let record = run_config(&cfg, common.verify)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
            Ok(record.passed())
        }
        Command::Convergence {
            problem,
            levels,
            start_level,
            p,
            q,
            coupling,
            base_steps,
            efficiency,
            common,
        } => {
            let problem = ManufacturedProblem::by_name(&problem)?;
            let options = ConvergenceOptions {
                levels: (start_level..start_level + levels).collect(),
                p,
                q,
                coupling: coupling.parse::<Coupling>()?,
                base_steps,
                t_end: None,
                estimator: estimator(common.verify, efficiency, 1.0),
            };
            let table = run_convergence(&problem, &options)?;
            let mut csv = Vec::new();
            table.write_csv(&mut csv)?;
            print!("{}", String::from_utf8_lossy(&csv));
            write(&common.output, "convergence.csv", &csv)?;
            write(&common.output, "convergence.json", serde_json::to_string_pretty(&table)?.as_bytes())?;
            Ok(table.rows.iter().all(|r| r.failed_checks.is_empty()))
        }
        Command::Scan {
            problem,
            hmin,
            hmax,
            taumin,
            taumax,
            t_end,
            p,
            q,
            gamma,
            common,
        } => {
            let problem = ManufacturedProblem::by_name(&problem)?;
            let options = ScanOptions::from_ranges(
                &problem,
                (hmin, hmax),
                (taumin, taumax),
                t_end,
                p,
                q,
                estimator(common.verify, true, gamma),
            )?;
            let table = run_regime_scan(&problem, &options)?;
            let mut csv = Vec::new();
            table.write_csv(&mut csv)?;
            print!("{}", String::from_utf8_lossy(&csv));
            write(&common.output, "scan.csv", &csv)?;
            write(&common.output, "scan.json", serde_json::to_string_pretty(&table)?.as_bytes())?;
            Ok(table.cells.iter().all(|c| c.failed_checks.is_empty()))
        }
        Command::Adaptive {
            problem,
            theta,
            steps,
            t_end,
            level,
            p,
            q,
            coarsen_fraction,
            max_depth,
            common,
        } => {
            let problem = ManufacturedProblem::by_name(&problem)?;
            let partition = TimePartition::uniform(t_end.unwrap_or(problem.t_end), steps, q)?;
            let options = AdaptiveOptions {
                initial_level: level,
                theta,
                coarsen_fraction,
                max_depth,
                p,
                estimator: estimator(common.verify, false, 1.0),
            };
            let run = run_adaptive(&problem, &partition, &options)?;
            let mut csv = Vec::new();
            run.write_csv(&mut csv)?;
            print!("{}", String::from_utf8_lossy(&csv));
            println!("{}", serde_json::to_string_pretty(&run.report.summary())?);
            if let Some(dir) = &common.output {
                write_outputs(dir, "adaptive", &run.report, &run.kkt_csv)?;
                write(&common.output, "adaptive_steps.csv", &csv)?;
            }
            let mut checks = verify_report(&run.report);
            checks.push(verify_meshes(&run.solution));
            for c in checks.iter().filter(|c| !c.pass) {
                eprintln!("check {} failed: {:e} > {:e}", c.name, c.value, c.tolerance);
            }
            Ok(!common.verify || checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verify = match &cli.command {
        Command::Solve { common, .. }
        | Command::Convergence { common, .. }
        | Command::Scan { common, .. }
        | Command::Adaptive { common, .. } => common.verify,
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if !verify => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
