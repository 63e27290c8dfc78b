//! Solver wall-time benchmark: dense reference vs Toeplitz-aware
//! recursions on seeded synthetic covariances, with a correctness gate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use ppredict_core::wh::{
    integrate_bellman_krein, solve_direct, solve_whittle, synthetic_stationary_covariance,
    DiscretisedWh,
};
use ppredict_core::KernelGrid;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchSolver {
    Dense,
    Whittle,
    BellmanKrein,
}

impl std::str::FromStr for BenchSolver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" | "direct" => Ok(Self::Dense),
            "whittle" | "levinson" => Ok(Self::Whittle),
            "bellman_krein" | "bk" => Ok(Self::BellmanKrein),
            other => Err(format!("unknown bench solver '{other}'")),
        }
    }
}

impl std::fmt::Display for BenchSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dense => "dense",
            Self::Whittle => "whittle",
            Self::BellmanKrein => "bellman_krein",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub dim: usize,
    pub solvers: Vec<BenchSolver>,
    /// timed repetitions per size; the report carries the median
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverTiming {
    pub solver: BenchSolver,
    /// median wall-time per size, seconds
    pub median_seconds: Vec<f64>,
    /// least-squares slope of log time vs log p
    pub slope: f64,
    /// 95% confidence interval for the slope
    pub slope_ci: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub sizes: Vec<usize>,
    pub dim: usize,
    pub runs: usize,
    pub seed: u64,
    pub results: Vec<SolverTiming>,
    /// sup-norm disagreement between solver outputs, relative to the kernel
    /// scale, maximised over sizes (correctness gate: must be <= 1e-6)
    pub max_relative_disagreement: f64,
}

fn solve_with(solver: BenchSolver, problem: &DiscretisedWh) -> Result<KernelGrid, CliError> {
    let res = match solver {
        BenchSolver::Dense => solve_direct(problem),
        BenchSolver::Whittle => solve_whittle(problem).map(|s| s.kernel(problem)),
        BenchSolver::BellmanKrein => integrate_bellman_krein(problem).map(|s| s.kernel()),
    };
    res.map_err(|e| CliError::stage("bench", e))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// two-sided 97.5% Student-t quantile for small residual degrees of freedom
fn t_quantile_975(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        1 => 12.706,
        2 => 4.303,
        3 => 3.182,
        4 => 2.776,
        5 => 2.571,
        6 => 2.447,
        7 => 2.365,
        8 => 2.306,
        _ => 1.96,
    }
}

fn loglog_slope(sizes: &[usize], times: &[f64]) -> (f64, (f64, f64)) {
    let n = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|&p| (p as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 =
        xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = sizes.len().saturating_sub(2);
    let se = if df > 0 { (rss / df as f64 / sxx).sqrt() } else { f64::INFINITY };
    let t = t_quantile_975(df);
    (slope, (slope - t * se, slope + t * se))
}

/// Run the benchmark. Problem generation is excluded from the timings;
/// solvers run strictly one at a time. Solver outputs are compared at every
/// size and the run fails if they disagree beyond 1e-6 relative sup-norm.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, CliError> {
    if cfg.sizes.len() < 4 {
        return Err(CliError::config("bench needs at least 4 sizes"));
    }
    if cfg.sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("bench sizes must be strictly ascending"));
    }
    if cfg.solvers.is_empty() {
        return Err(CliError::config("bench needs at least one solver"));
    }
    if cfg.runs < 5 {
        return Err(CliError::config("bench needs at least 5 runs per size"));
    }

    let mut times: Vec<Vec<f64>> = vec![Vec::new(); cfg.solvers.len()];
    let mut max_disagreement = 0.0f64;

    for &p in &cfg.sizes {
        let cov = synthetic_stationary_covariance(cfg.dim, p, cfg.seed ^ p as u64);
        let problem = DiscretisedWh::new(cov, p).map_err(|e| CliError::stage("bench", e))?;
        let mut outputs: Vec<KernelGrid> = Vec::new();
        for (si, &solver) in cfg.solvers.iter().enumerate() {
            let mut runs = Vec::with_capacity(cfg.runs);
            let mut kept: Option<KernelGrid> = None;
            for _ in 0..cfg.runs {
                let t0 = Instant::now();
                let kernel = solve_with(solver, &problem)?;
                runs.push(t0.elapsed().as_secs_f64().max(1e-9));
                kept.get_or_insert(kernel);
            }
            times[si].push(median(runs));
            outputs.push(kept.expect("runs >= 1"));
        }
        // cross-solver agreement at this size
        let scale = outputs[0].sup_norm().max(f64::MIN_POSITIVE);
        for a in 1..outputs.len() {
            let mut worst = 0.0f64;
            for k in 0..p {
                for (x, y) in outputs[0].values[k].iter().zip(outputs[a].values[k].iter()) {
                    worst = worst.max((x - y).abs());
                }
            }
            max_disagreement = max_disagreement.max(worst / scale);
        }
    }

    if max_disagreement > 1e-6 {
        return Err(CliError::agreement_gate(max_disagreement));
    }

    let results = cfg
        .solvers
        .iter()
        .enumerate()
        .map(|(si, &solver)| {
            let (slope, slope_ci) = loglog_slope(&cfg.sizes, &times[si]);
            SolverTiming { solver, median_seconds: times[si].clone(), slope, slope_ci }
        })
        .collect();

    Ok(BenchReport {
        sizes: cfg.sizes.clone(),
        dim: cfg.dim,
        runs: cfg.runs,
        seed: cfg.seed,
        results,
        max_relative_disagreement: max_disagreement,
    })
}
