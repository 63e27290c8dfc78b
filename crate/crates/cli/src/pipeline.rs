//! Stage implementations shared by the subcommands and the full pipeline.
//!
//! Every stage reads/writes the interchange formats of the core crate.
//! Artifacts are deterministic for a fixed config and seed; the pipeline
//! manifest records the config hash, the derived replicate seeds, and a
//! SHA-256 digest per artifact, so reruns can be compared byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ppredict_core::grids::LagGrid;
use ppredict_core::innovations::{solve_innovations, InnovationsSolution};
use ppredict_core::moments::{estimate_covariance_density, estimate_mean_rates};
use ppredict_core::predict::{assemble_predictor, evaluate_predictor, Predictor, ScoreReport};
use ppredict_core::simulate::{
    simulate_hawkes, simulate_neyman_scott, simulate_poisson, HawkesKernel, HawkesParams,
    NeymanScottParams,
};
use ppredict_core::wh::{
    integrate_bellman_krein, solve_direct_toeplitz, solve_direct_with_diagnostics,
    solve_whittle, DiscretisedWh, PartialCorrelations, SolveDiagnostics,
};
use ppredict_core::{CovarianceGrid, Error as CoreError, EventStream, KernelGrid};

use crate::config::{ExperimentConfig, ModelConfig, SolverChoice};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn io_stage<T>(stage: &'static str, r: ppredict_core::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::stage(stage, e))
}

/// Replicate seeds derive from the base seed by index.
pub fn replicate_seeds(seed: u64, replicates: usize) -> Vec<u64> {
    (0..replicates as u64).map(|i| seed.wrapping_add(i)).collect()
}

/// Simulate the configured model once per replicate.
pub fn simulate_streams(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<EventStream>> {
    let seeds = replicate_seeds(seed, cfg.replicates);
    let mut out = Vec::with_capacity(seeds.len());
    for s in seeds {
        let stream = match &cfg.model {
            ModelConfig::Poisson { rates } => simulate_poisson(rates, cfg.horizon, s),
            ModelConfig::Hawkes { baseline, kernel } => kernel
                .build()
                .and_then(|mk| HawkesParams::new(baseline.clone(), HawkesKernel::Spec(mk)))
                .and_then(|params| simulate_hawkes(&params, cfg.horizon, s)),
            ModelConfig::NeymanScott { latent_rates, shot } => shot
                .build()
                .and_then(|mk| NeymanScottParams::new(latent_rates.clone(), mk))
                .and_then(|params| simulate_neyman_scott(&params, cfg.horizon, s)),
        };
        out.push(io_stage("simulate", stream)?);
    }
    Ok(out)
}

/// Write streams under `dir/streams/rep_NNNN.csv` (+ sidecars).
pub fn write_streams(streams: &[EventStream], dir: &Path) -> Result<Vec<PathBuf>> {
    let sdir = dir.join("streams");
    std::fs::create_dir_all(&sdir).map_err(|e| CliError::stage("simulate", e.into()))?;
    let mut paths = Vec::with_capacity(streams.len());
    for (i, s) in streams.iter().enumerate() {
        let path = sdir.join(format!("rep_{i:04}.csv"));
        io_stage("simulate", s.write_csv(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Read every `rep_*.csv` stream in a directory, in name order.
pub fn read_streams(dir: &Path) -> Result<Vec<EventStream>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::stage("estimate", e.into()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|x| x == "csv").unwrap_or(false)
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("rep_"))
                    .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::stage("estimate", CoreError::EmptyInput));
    }
    files
        .into_iter()
        .map(|p| io_stage("estimate", EventStream::read_csv(&p)))
        .collect()
}

pub fn estimate_stage(cfg: &ExperimentConfig, streams: &[EventStream]) -> Result<CovarianceGrid> {
    let grid =
        io_stage("estimate", LagGrid::new(cfg.grid.delta, cfg.grid.p))?;
    io_stage("estimate", estimate_covariance_density(streams, &grid))
}

/// Solve for the prediction kernel and assemble per-solver diagnostics.
pub fn solve_stage(
    cfg: &ExperimentConfig,
    cov: &CovarianceGrid,
    solver: SolverChoice,
) -> Result<(KernelGrid, SolveDiagnostics)> {
    let order = cfg.grid.p.min(cov.grid.len());
    let problem = io_stage("solve", DiscretisedWh::new(cov.clone(), order))?
        .with_ridge(cfg.ridge);
    match solver {
        SolverChoice::Direct => {
            let (kernel, rcond) =
                io_stage("solve", solve_direct_with_diagnostics(&problem))?;
            let diag = io_stage(
                "solve",
                SolveDiagnostics::from_kernel("direct", &problem, &kernel, Some(rcond)),
            )?;
            Ok((kernel, diag))
        }
        SolverChoice::DirectToeplitz => {
            let kernel = io_stage("solve", solve_direct_toeplitz(&problem))?;
            let diag = io_stage(
                "solve",
                SolveDiagnostics::from_kernel("direct_toeplitz", &problem, &kernel, None),
            )?;
            Ok((kernel, diag))
        }
        SolverChoice::Whittle => {
            let sol = io_stage("solve", solve_whittle(&problem))?;
            let kernel = sol.kernel(&problem);
            let diag = io_stage(
                "solve",
                SolveDiagnostics::from_kernel("whittle", &problem, &kernel, None),
            )?
            .with_gammas(&sol.gamma_sequence());
            let diag = io_stage("solve", diag.with_error_covs(&sol.error_covs))?;
            Ok((kernel, diag))
        }
        SolverChoice::BellmanKrein => {
            let sol = io_stage("solve", integrate_bellman_krein(&problem))?;
            let kernel = sol.kernel();
            let diag = io_stage(
                "solve",
                SolveDiagnostics::from_kernel("bellman_krein", &problem, &kernel, None),
            )?
            .with_gammas(&sol.gamma_sequence());
            let diag = io_stage("solve", diag.with_error_covs(&sol.error_covs))?;
            Ok((kernel, diag))
        }
        SolverChoice::Innovations => Err(CliError::config(
            "the innovations solver is exposed through the `innovations` stage; use it as the pipeline solver instead",
        )),
    }
}

#[derive(Serialize, Deserialize)]
pub struct InnovationsDiagnostics {
    pub steps: usize,
    pub delta: f64,
    pub boundary_identity_error: f64,
}

pub fn innovations_stage(
    cfg: &ExperimentConfig,
    cov: &CovarianceGrid,
) -> Result<(InnovationsSolution, InnovationsDiagnostics)> {
    let steps = cfg.innovation_steps.unwrap_or(cfg.grid.p).min(cov.grid.len());
    let sol = io_stage("innovations", solve_innovations(cov, steps))?;
    let diag = InnovationsDiagnostics {
        steps,
        delta: sol.delta(),
        boundary_identity_error: sol.boundary_identity_error(cov),
    };
    Ok((sol, diag))
}

/// Assemble the predictor named by the solver choice and score it.
pub fn predict_stage(
    cfg: &ExperimentConfig,
    streams: &[EventStream],
    kernel: Option<KernelGrid>,
    innovations: Option<InnovationsSolution>,
) -> Result<ScoreReport> {
    let rates = io_stage("predict", estimate_mean_rates(streams))?;
    let predictor = match (kernel, innovations) {
        (Some(k), None) => io_stage("predict", assemble_predictor(k, rates))?,
        (None, Some(sol)) => io_stage("predict", Predictor::moving_average(sol, rates))?,
        _ => return Err(CliError::config("predict needs exactly one of kernel / innovations")),
    };
    io_stage("predict", evaluate_predictor(&predictor, streams, cfg.eval_delta, None))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::stage("manifest", e.into()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub config_sha256: String,
    pub seed: u64,
    pub replicate_seeds: Vec<u64>,
    pub solver: String,
    /// relative artifact path -> SHA-256
    pub artifacts: BTreeMap<String, String>,
}

/// Full pipeline: simulate, estimate, solve, assemble, evaluate; write all
/// artifacts plus the reproducibility manifest.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    out: &Path,
    seed_override: Option<u64>,
    solver_override: Option<SolverChoice>,
) -> Result<PathBuf> {
    let seed = seed_override.unwrap_or(cfg.seed);
    let solver = solver_override.unwrap_or(cfg.solver);
    std::fs::create_dir_all(out).map_err(|e| CliError::stage("pipeline", e.into()))?;

    let streams = simulate_streams(cfg, seed)?;
    let stream_paths = write_streams(&streams, out)?;

    let cov = estimate_stage(cfg, &streams)?;
    let cov_path = out.join("covariance.json");
    io_stage("estimate", cov.write_json(&cov_path))?;

    let mut artifact_paths: Vec<PathBuf> = stream_paths;
    artifact_paths.push(cov_path);

    let score = if solver == SolverChoice::Innovations {
        let (sol, diag) = innovations_stage(cfg, &cov)?;
        let ipath = out.join("innovations.json");
        io_stage("innovations", sol.write_json(&ipath))?;
        let dpath = out.join("diagnostics.json");
        std::fs::write(&dpath, serde_json::to_vec_pretty(&diag).map_err(CoreError::from).map_err(|e| CliError::stage("innovations", e))?)
            .map_err(|e| CliError::stage("innovations", e.into()))?;
        artifact_paths.push(ipath);
        artifact_paths.push(dpath);
        predict_stage(cfg, &streams, None, Some(sol))?
    } else {
        let (kernel, diag) = solve_stage(cfg, &cov, solver)?;
        let kpath = out.join("kernel.json");
        io_stage("solve", kernel.write_json(&kpath))?;
        let dpath = out.join("diagnostics.json");
        std::fs::write(&dpath, serde_json::to_vec_pretty(&diag).map_err(CoreError::from).map_err(|e| CliError::stage("solve", e))?)
            .map_err(|e| CliError::stage("solve", e.into()))?;
        artifact_paths.push(kpath);
        artifact_paths.push(dpath);
        predict_stage(cfg, &streams, Some(kernel), None)?
    };
    let spath = out.join("score.json");
    io_stage("predict", score.write_json(&spath))?;
    artifact_paths.push(spath);

    // sidecars participate in the manifest as well
    let mut with_sidecars = Vec::new();
    for p in &artifact_paths {
        with_sidecars.push(p.clone());
        let sidecar = p.with_extension("meta.json");
        if sidecar.exists() {
            with_sidecars.push(sidecar);
        }
    }

    let mut artifacts = BTreeMap::new();
    for p in &with_sidecars {
        let rel = p
            .strip_prefix(out)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/");
        artifacts.insert(rel, file_sha256(p)?);
    }

    let manifest = Manifest {
        schema_version: crate::config::SCHEMA_VERSION,
        tool: format!("ppredict {}", env!("CARGO_PKG_VERSION")),
        config_sha256: sha256_hex(
            &cfg.to_canonical_json().map_err(|e| CliError::stage("manifest", e))?,
        ),
        seed,
        replicate_seeds: replicate_seeds(seed, cfg.replicates),
        solver: solver.to_string(),
        artifacts,
    };
    let mpath = out.join("manifest.json");
    std::fs::write(
        &mpath,
        serde_json::to_vec_pretty(&manifest)
            .map_err(CoreError::from)
            .map_err(|e| CliError::stage("manifest", e))?,
    )
    .map_err(|e| CliError::stage("manifest", e.into()))?;
    Ok(mpath)
}
