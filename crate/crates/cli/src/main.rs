use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use ppredict_cli::bench::{run_bench, BenchConfig, BenchSolver};
use ppredict_cli::config::{ExperimentConfig, SolverChoice};
use ppredict_cli::pipeline;
use ppredict_cli::CliError;
use ppredict_core::predict::{evaluation_times, write_intensity_csv};
use ppredict_core::{CovarianceGrid, KernelGrid};

/// Linear prediction experiments for multivariate temporal point processes.
#[derive(Parser)]
#[command(name = "ppredict", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicate streams of the configured model
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate mean rates and the covariance density from stream files
    EstimateCov {
        #[arg(long)]
        config: PathBuf,
        /// directory of rep_*.csv streams
        #[arg(long)]
        streams: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the discretised Wiener-Hopf equation for the prediction kernel
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// covariance JSON produced by estimate-cov (or an oracle)
        #[arg(long)]
        cov: PathBuf,
        /// override the config solver
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the innovations recursion on a covariance input
    Innovations {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cov: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble a predictor from a solved kernel and score it on streams
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        streams: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// json: score report only; csv: also per-time intensities of the
        /// first stream
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Wall-time scaling of the solvers on synthetic covariances
    Bench {
        /// comma-separated ascending problem sizes, at least four
        #[arg(long, default_value = "256,512,1024,2048,4096")]
        sizes: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// comma-separated: dense, whittle, bellman_krein
        #[arg(long, default_value = "dense,whittle")]
        solvers: String,
        /// timed repetitions per size (median reported), at least 5
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// simulate -> estimate-cov -> solve -> predict, with a manifest
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        solver: Option<String>,
    },
}

fn parse_solver(s: Option<String>) -> Result<Option<SolverChoice>, CliError> {
    s.map(|s| s.parse::<SolverChoice>().map_err(CliError::config)).transpose()
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    // a file that exists but fails to parse is a configuration problem,
    // not an I/O one
    ExperimentConfig::from_path(path).map_err(|e| match e {
        ppredict_core::Error::Json(_) => CliError::config(e.to_string()),
        other => CliError::stage("config", other),
    })
}

fn ensure_dir(path: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::stage("io", e.into()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = load_config(&config)?;
            ensure_dir(&out)?;
            let streams = pipeline::simulate_streams(&cfg, seed.unwrap_or(cfg.seed))?;
            let paths = pipeline::write_streams(&streams, &out)?;
            println!("wrote {} streams under {}", paths.len(), out.display());
            Ok(())
        }
        Command::EstimateCov { config, streams, out } => {
            let cfg = load_config(&config)?;
            ensure_dir(&out)?;
            let data = pipeline::read_streams(&streams.join("streams"))
                .or_else(|_| pipeline::read_streams(&streams))?;
            let cov = pipeline::estimate_stage(&cfg, &data)?;
            let path = out.join("covariance.json");
            cov.write_json(&path).map_err(|e| CliError::stage("estimate", e))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Solve { config, cov, solver, out } => {
            let cfg = load_config(&config)?;
            ensure_dir(&out)?;
            let cov = CovarianceGrid::read_json(&cov).map_err(|e| CliError::stage("solve", e))?;
            let solver = parse_solver(solver)?.unwrap_or(cfg.solver);
            let (kernel, diag) = pipeline::solve_stage(&cfg, &cov, solver)?;
            let kpath = out.join("kernel.json");
            kernel.write_json(&kpath).map_err(|e| CliError::stage("solve", e))?;
            let dpath = out.join("diagnostics.json");
            std::fs::write(&dpath, serde_json::to_vec_pretty(&diag).expect("serializable"))
                .map_err(|e| CliError::stage("solve", e.into()))?;
            println!("wrote {} and {}", kpath.display(), dpath.display());
            Ok(())
        }
        Command::Innovations { config, cov, out } => {
            let cfg = load_config(&config)?;
            ensure_dir(&out)?;
            let cov =
                CovarianceGrid::read_json(&cov).map_err(|e| CliError::stage("innovations", e))?;
            let (sol, diag) = pipeline::innovations_stage(&cfg, &cov)?;
            let ipath = out.join("innovations.json");
            sol.write_json(&ipath).map_err(|e| CliError::stage("innovations", e))?;
            let dpath = out.join("diagnostics.json");
            std::fs::write(&dpath, serde_json::to_vec_pretty(&diag).expect("serializable"))
                .map_err(|e| CliError::stage("innovations", e.into()))?;
            println!("wrote {} and {}", ipath.display(), dpath.display());
            Ok(())
        }
        Command::Predict { config, kernel, streams, out, format } => {
            let cfg = load_config(&config)?;
            ensure_dir(&out)?;
            let kernel =
                KernelGrid::read_json(&kernel).map_err(|e| CliError::stage("predict", e))?;
            let data = pipeline::read_streams(&streams.join("streams"))
                .or_else(|_| pipeline::read_streams(&streams))?;
            let report = pipeline::predict_stage(&cfg, &data, Some(kernel.clone()), None)?;
            let spath = out.join("score.json");
            report.write_json(&spath).map_err(|e| CliError::stage("predict", e))?;
            if matches!(format, OutputFormat::Csv) {
                let rates = ppredict_core::moments::estimate_mean_rates(&data)
                    .map_err(|e| CliError::stage("predict", e))?;
                let pred = ppredict_core::predict::assemble_predictor(kernel, rates)
                    .map_err(|e| CliError::stage("predict", e))?;
                let first = &data[0];
                let times =
                    evaluation_times(first.horizon(), cfg.eval_delta, pred.eval_window_start());
                let lam =
                    pred.intensity(first, &times).map_err(|e| CliError::stage("predict", e))?;
                let cpath = out.join("intensity.csv");
                write_intensity_csv(&cpath, &times, &lam, None)
                    .map_err(|e| CliError::stage("predict", e))?;
                println!("wrote {} and {}", spath.display(), cpath.display());
            } else {
                println!("wrote {}", spath.display());
            }
            Ok(())
        }
        Command::Bench { sizes, dim, solvers, runs, seed, out } => {
            ensure_dir(&out)?;
            let sizes: Vec<usize> = sizes
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| CliError::config(e.to_string())))
                .collect::<Result<_, _>>()?;
            let solvers: Vec<BenchSolver> = solvers
                .split(',')
                .map(|s| s.trim().parse::<BenchSolver>().map_err(CliError::config))
                .collect::<Result<_, _>>()?;
            let report = run_bench(&BenchConfig { sizes, dim, solvers, runs, seed })?;
            let path = out.join("bench.json");
            std::fs::write(&path, serde_json::to_vec_pretty(&report).expect("serializable"))
                .map_err(|e| CliError::stage("bench", e.into()))?;
            for r in &report.results {
                println!(
                    "{}: slope {:.3} (95% CI {:.3}..{:.3}), medians {:?}",
                    r.solver, r.slope, r.slope_ci.0, r.slope_ci.1, r.median_seconds
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Pipeline { config, out, seed, solver } => {
            let cfg = load_config(&config)?;
            let solver = parse_solver(solver)?;
            let manifest = pipeline::run_pipeline(&cfg, &out, seed, solver)?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", serde_json::to_string(&err.to_json()).expect("error object"));
        std::process::exit(err.exit_code());
    }
}
