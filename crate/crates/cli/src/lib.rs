//! The `ordsel` command line: `simulate`, `bounds`, `calibrate` and `verify`.
//!
//! Every command reads a JSON config, writes CSV/JSON artifacts into an output
//! directory and records them with their SHA-256 digests in `manifest.json`.

pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use ordsel::calibration::calibrate;
use ordsel::estimation::plugin_estimate;
use ordsel::fdrbounds::{bound_curve, combine_terms, factorized_terms, BoundInput, PrTable};
use ordsel::io;
use ordsel::linmodel::{fdp_of_dim, orthonormalize, DEFAULT_RANK_TOL};
use ordsel::simulation::{CoefRule, DesignKind, Scenario, ScenarioKind, ScenarioSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoundSource, BoundsConfig, CalibrateConfig, SimulateConfig, VerifyConfig};
use crate::manifest::{Outputs, RunManifest};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_CALIBRATION: u8 = 4;
pub const EXIT_VERIFY: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "ordsel", version, about = "Penalized selection over nested linear models with FDR bounds")]
pub struct Cli {
    /// Overrides the seed found in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true, env = "ORDSEL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical FDR and PR curves over seeded replicates of a scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lower bound, upper bound and floor of the FDR on a K grid.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Data-driven choice of K for a CSV dataset.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares the factorized FDR with a full-selection simulation.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplies every P_r estimate; used to check that faults are caught.
        #[arg(long, hide = true, default_value_t = 1.0)]
        fault_pr_scale: f64,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ordsel::Error> for CliError {
    fn from(e: ordsel::Error) -> Self {
        use ordsel::Error as E;
        let code = match e {
            E::DegenerateFit { .. } | E::SaturatedModel { .. } | E::RankDeficient { .. } => EXIT_DEGENERATE,
            E::CalibrationFailed { .. } => EXIT_CALIBRATION,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

/// Four significant digits for human-readable summaries.
fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Runs a parsed command line in a thread pool capped by `--threads`.
pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::config(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let (name, config, data, out, seed, outputs, outcome) = match &cli.command {
        Command::Simulate { config, out } => {
            let mut outs = Outputs::new(out)?;
            let seed = cmd_simulate(config, cli.seed, &mut outs)?;
            ("simulate", config, None, Some(out), seed, outs, Ok(()))
        }
        Command::Bounds { config, out } => {
            let mut outs = Outputs::new(out)?;
            let seed = cmd_bounds(config, cli.seed, &mut outs)?;
            ("bounds", config, None, Some(out), seed, outs, Ok(()))
        }
        Command::Calibrate { data, config, out } => {
            let mut outs = Outputs::new(out)?;
            let (seed, outcome) = cmd_calibrate(data, config, cli.seed, &mut outs)?;
            ("calibrate", config, Some(data), Some(out), seed, outs, outcome)
        }
        Command::Verify { config, out, fault_pr_scale } => {
            let mut outs = match out {
                Some(dir) => Outputs::new(dir)?,
                None => Outputs::discard(),
            };
            let (seed, outcome) = cmd_verify(config, cli.seed, *fault_pr_scale, &mut outs)?;
            ("verify", config, None, out.as_ref(), seed, outs, outcome)
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: config.clone(),
        data_path: data.cloned(),
        seed,
        outputs: outputs.digests().to_vec(),
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    if let Some(dir) = out {
        manifest.write(dir)?;
    }
    outcome.map(|()| manifest)
}

fn cmd_simulate(config: &Path, seed: Option<u64>, outs: &mut Outputs) -> Result<u64, CliError> {
    let cfg: SimulateConfig = config::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    if cfg.replicates < 2 {
        return Err(CliError::config(format!("replicates = {} must be at least 2", cfg.replicates)));
    }
    let grid = cfg.k_grid.values()?;
    let scenario = Scenario::new(cfg.scenario.to_spec(seed)?)?;
    let curve = scenario.empirical_curves(&grid, cfg.replicates)?;
    let mut csv = Vec::new();
    io::write_empirical_curve(&curve, &mut csv)?;
    outs.write("curve.csv", &csv)?;
    outs.write_json("curve.json", &serde_json::json!({ "seed": seed, "curve": curve }))?;
    let i = grid.iter().position(|&k| k == 2.0).unwrap_or(0);
    eprintln!(
        "K = {}: fdr {} ± {}, pr {} ± {}, mean dim {}",
        grid[i],
        sig4(curve.fdr[i]),
        sig4(curve.fdr_ci[i]),
        sig4(curve.pr[i]),
        sig4(curve.pr_ci[i]),
        sig4(curve.mean_dim[i])
    );
    Ok(seed)
}

fn cmd_bounds(config: &Path, seed: Option<u64>, outs: &mut Outputs) -> Result<u64, CliError> {
    let cfg: BoundsConfig = config::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let input = match &cfg.input {
        BoundSource::Scenario { scenario } => {
            let sc = Scenario::new(scenario.to_spec(seed)?)?;
            BoundInput::from_truth(sc.basis(), sc.truth())?
        }
        BoundSource::Orthogonal { beta, sigma2, q } => {
            if beta.len() > *q && beta[*q..].iter().any(|&b| b != 0.0) {
                return Err(CliError::config(format!("beta has nonzero entries beyond q = {q}")));
            }
            BoundInput::orthogonal(&beta[..beta.len().min(*q)], *sigma2, *q)?
        }
    };
    if input.is_saturated() {
        return Err(ordsel::Error::SaturatedModel { dim: input.d_star(), q: input.q() }.into());
    }
    if cfg.mc_samples == 0 {
        return Err(CliError::config("mc_samples must be positive"));
    }
    let grid = cfg.k_grid.values()?;
    let table = PrTable::estimate(input.q(), &grid, cfg.mc_samples, seed)?;
    let curve = bound_curve(&input, &grid, &table)?;
    let mut csv = Vec::new();
    io::write_bound_curve(&curve, &mut csv)?;
    outs.write("bounds.csv", &csv)?;
    outs.write_json("bounds.json", &serde_json::json!({ "input": input, "curve": curve }))?;
    let last = grid.len() - 1;
    eprintln!(
        "D* = {}, q = {}: B({}) = {}, B({}) = {}",
        input.d_star(),
        input.q(),
        grid[0],
        sig4(curve.upper[0]),
        grid[last],
        sig4(curve.upper[last])
    );
    Ok(seed)
}

type Outcome = Result<(), CliError>;

fn cmd_calibrate(data: &Path, config: &Path, seed: Option<u64>, outs: &mut Outputs) -> Result<(u64, Outcome), CliError> {
    let mut cfg: CalibrateConfig = config::load(config)?;
    if let Some(s) = seed {
        cfg.calibration.seed = s;
    }
    let seed = cfg.calibration.seed;
    cfg.calibration.validate()?;
    let dataset = io::read_dataset_path(data).map_err(|e| match e {
        ordsel::Error::Io(err) => CliError::config(format!("{}: {err}", data.display())),
        other => CliError::config(format!("{}: {other}", data.display())),
    })?;
    let model = orthonormalize(&dataset, DEFAULT_RANK_TOL)?;
    let plugin = plugin_estimate(&model, &cfg.plugin)?;
    let result = match calibrate(&model, &plugin, &cfg.calibration) {
        Ok(r) => r,
        Err(ordsel::Error::CalibrationFailed { alpha, curve }) => {
            let mut csv = Vec::new();
            io::write_bound_curve(&curve, &mut csv)?;
            outs.write("bounds.csv", &csv)?;
            outs.write_json(
                "calibration_failed.json",
                &serde_json::json!({ "alpha": alpha, "sigma2_hat": plugin.sigma2_hat, "d_hat": plugin.d_hat, "curve": curve }),
            )?;
            let err = ordsel::Error::CalibrationFailed { alpha, curve };
            return Ok((seed, Err(err.into())));
        }
        Err(e) => return Err(e.into()),
    };
    let selected = model.select_model(result.k_star, plugin.sigma2_hat)?;
    let mut csv = Vec::new();
    io::write_bound_curve(&result.curve, &mut csv)?;
    outs.write("bounds.csv", &csv)?;
    let mut sel = String::from("index,beta\n");
    for (j, b) in selected.beta_hat.iter().enumerate() {
        sel.push_str(&format!("{},{}\n", j + 1, io::fmt_num(*b)));
    }
    outs.write("selected_model.csv", sel.as_bytes())?;
    outs.write_json(
        "calibration.json",
        &serde_json::json!({
            "seed": seed,
            "mc_samples": cfg.calibration.mc_samples,
            "plugin_k": cfg.plugin.plugin_k,
            "result": result,
            "selected": { "k": selected.k, "dim": selected.dim, "rss": selected.rss },
        }),
    )?;
    eprintln!(
        "K* = {} ({}), B(K*) = {}, σ̂² = {}, D̂ = {}, selected dim {}",
        sig4(result.k_star),
        if result.fallback_used { "min I1, I1 ∩ I2 empty" } else { "min I1 ∩ I2" },
        sig4(result.bound_at_k),
        sig4(plugin.sigma2_hat),
        plugin.d_hat,
        selected.dim
    );
    Ok((seed, Ok(())))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub k: f64,
    pub factorized: f64,
    pub factorized_se: f64,
    pub simulated: f64,
    pub simulated_se: f64,
    pub terms: usize,
    pub pass: bool,
}

fn cmd_verify(config: &Path, seed: Option<u64>, pr_scale: f64, outs: &mut Outputs) -> Result<(u64, Outcome), CliError> {
    let cfg: VerifyConfig = config::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    if cfg.q == 0 || cfg.q > 10 {
        return Err(CliError::config(format!("verify expects a small instance with 1 ≤ q ≤ 10, got q = {}", cfg.q)));
    }
    if cfg.beta.len() > cfg.q {
        return Err(CliError::config(format!("beta has {} entries, q = {}", cfg.beta.len(), cfg.q)));
    }
    if cfg.samples < 2 || cfg.mc_samples == 0 {
        return Err(CliError::config("samples must be at least 2 and mc_samples positive"));
    }
    if cfg.k_values.is_empty() || cfg.k_values.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(CliError::config("k_values must be nonempty, positive and finite"));
    }
    let input = BoundInput::orthogonal(&cfg.beta, cfg.sigma2, cfg.q)?;
    if input.is_saturated() {
        return Err(ordsel::Error::SaturatedModel { dim: input.d_star(), q: input.q() }.into());
    }
    let mut beta = cfg.beta.clone();
    beta.resize(cfg.q, 0.0);
    let spec = ScenarioSpec {
        name: ScenarioKind::Custom,
        n: cfg.q,
        p: cfg.q,
        d_star: input.d_star(),
        sigma2: cfg.sigma2,
        coef: CoefRule::Explicit { beta },
        design: DesignKind::Canonical,
        seed,
    };
    let scenario = Scenario::new(spec)?;
    let fdps = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|r| {
            let model = scenario.model(r)?;
            Ok(cfg.k_values.iter().map(|&k| fdp_of_dim(model.selected_dim(k, cfg.sigma2), input.d_star())).collect())
        })
        .collect::<Result<Vec<Vec<f64>>, ordsel::Error>>()?;
    let n = cfg.samples as f64;
    let mut rows = Vec::new();
    for (i, &k) in cfg.k_values.iter().enumerate() {
        let mean = fdps.iter().map(|v| v[i]).sum::<f64>() / n;
        let var = fdps.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let terms = factorized_terms(&input, k, cfg.mc_samples, seed)?;
        let fact = combine_terms(&terms, pr_scale);
        let sim_se = (var / n).sqrt();
        let se = (sim_se * sim_se + fact.std_err * fact.std_err).sqrt();
        let row = VerifyRow {
            k,
            factorized: fact.value,
            factorized_se: fact.std_err,
            simulated: mean,
            simulated_se: sim_se,
            terms: terms.len(),
            pass: (fact.value - mean).abs() <= 3.0 * se,
        };
        println!(
            "K={} factorized={} se={} simulated={} se={} terms={} {}",
            io::fmt_num(k),
            io::fmt_num(row.factorized),
            io::fmt_num(row.factorized_se),
            io::fmt_num(row.simulated),
            io::fmt_num(row.simulated_se),
            row.terms,
            if row.pass { "ok" } else { "MISMATCH" }
        );
        rows.push(row);
    }
    let all_pass = rows.iter().all(|r| r.pass);
    outs.write_json(
        "verify.json",
        &serde_json::json!({ "seed": seed, "d_star": input.d_star(), "q": cfg.q, "samples": cfg.samples,
            "mc_samples": cfg.mc_samples, "pr_scale": pr_scale, "rows": rows, "pass": all_pass }),
    )?;
    let outcome = if all_pass {
        Ok(())
    } else {
        Err(CliError { code: EXIT_VERIFY, message: "factorized FDR disagrees with simulation beyond 3 standard errors".into() })
    };
    Ok((seed, outcome))
}
