//! Data-driven choice of the penalty multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{diff_pr, PluginEstimate};
use crate::fdrbounds::{bound_curve, BoundCurve, PrTable, DEFAULT_MC_SAMPLES};
use crate::linmodel::OrthoModel;

/// Finite set of candidate penalty multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KGrid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Default for KGrid {
    fn default() -> Self {
        KGrid::Range { start: 2.0, stop: 10.0, step: 0.1 }
    }
}

impl KGrid {
    /// Grid points, with range endpoints rounded to the step's decimal
    /// resolution so `2.0, 2.1, …` prints cleanly.
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match *self {
            KGrid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::Config(format!("invalid K range {start}..={stop} step {step}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(Error::Config(format!("K range has {count} points")));
                }
                let scale = 1e12;
                (0..count).map(|i| ((start + i as f64 * step) * scale).round() / scale).collect()
            }
            KGrid::List(ref v) => v.clone(),
        };
        check_grid(&v, 0.0)?;
        Ok(v)
    }
}

/// Nonempty, finite, strictly increasing and bounded below by `min`.
pub fn check_grid(grid: &[f64], min: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("K grid is empty".into()));
    }
    if grid.iter().any(|k| !k.is_finite() || *k <= 0.0 || *k < min) {
        return Err(Error::Config(format!("K grid values must be finite, positive and ≥ {min}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("K grid must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Threshold on the estimated FDR upper bound.
    pub alpha: f64,
    /// Prediction-gap threshold, in units of `σ̂²`.
    pub gamma: f64,
    pub k_grid: KGrid,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { alpha: 0.05, gamma: 0.1, k_grid: KGrid::default(), mc_samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<Vec<f64>> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        let grid = self.k_grid.values()?;
        check_grid(&grid, 2.0)?;
        Ok(grid)
    }
}

/// Closed K interval made of consecutive grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KInterval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub k_star: f64,
    pub k_star_index: usize,
    #[serde(skip)]
    pub i1: Vec<usize>,
    #[serde(skip)]
    pub i2: Vec<usize>,
    pub i1_intervals: Vec<KInterval>,
    pub i2_intervals: Vec<KInterval>,
    pub fallback_used: bool,
    pub bound_at_k: f64,
    pub diff_pr_at_k: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma2_hat: f64,
    pub d_hat: usize,
    pub diff_pr: Vec<f64>,
    pub curve: BoundCurve,
}

fn intervals(grid: &[f64], idx: &[usize]) -> Vec<KInterval> {
    let mut out: Vec<KInterval> = Vec::new();
    let mut prev: Option<usize> = None;
    for &i in idx {
        match (prev, out.last_mut()) {
            (Some(p), Some(last)) if p + 1 == i => last.hi = grid[i],
            _ => out.push(KInterval { lo: grid[i], hi: grid[i] }),
        }
        prev = Some(i);
    }
    out
}

/// Runs the calibration, estimating `P_r` on the configured grid.
pub fn calibrate(model: &OrthoModel, plugin: &PluginEstimate, cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    let grid = cfg.validate()?;
    let table = PrTable::estimate(model.q(), &grid, cfg.mc_samples, cfg.seed)?;
    calibrate_with_table(model, plugin, cfg, &table)
}

/// Same as [`calibrate`] with a precomputed `P_r` table, which depends only on
/// `q`, the grid and the Monte-Carlo seed and can be shared across datasets.
pub fn calibrate_with_table(
    model: &OrthoModel,
    plugin: &PluginEstimate,
    cfg: &CalibrationConfig,
    table: &PrTable,
) -> Result<CalibrationResult> {
    let grid = cfg.validate()?;
    let q = model.q();
    if plugin.d_hat >= q {
        return Err(Error::SaturatedModel { dim: plugin.d_hat, q });
    }
    let input = plugin.bound_input(q)?;
    let curve = bound_curve(&input, &grid, table)?;
    let diffs: Vec<f64> = grid.iter().map(|&k| diff_pr(model, plugin.sigma2_hat, k)).collect();

    let i1: Vec<usize> = (0..grid.len()).filter(|&i| curve.upper[i] > 0.0 && curve.upper[i] < cfg.alpha).collect();
    let i2: Vec<usize> = (0..grid.len()).filter(|&i| diffs[i] < cfg.gamma * plugin.sigma2_hat).collect();
    let Some(&first1) = i1.first() else {
        return Err(Error::CalibrationFailed { alpha: cfg.alpha, curve: Box::new(curve) });
    };
    let both = i1.iter().copied().find(|i| i2.binary_search(i).is_ok());
    let (idx, fallback_used) = match both {
        Some(i) => (i, false),
        None => (first1, true),
    };
    Ok(CalibrationResult {
        k_star: grid[idx],
        k_star_index: idx,
        i1_intervals: intervals(&grid, &i1),
        i2_intervals: intervals(&grid, &i2),
        i1,
        i2,
        fallback_used,
        bound_at_k: curve.upper[idx],
        diff_pr_at_k: diffs[idx],
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        sigma2_hat: plugin.sigma2_hat,
        d_hat: plugin.d_hat,
        diff_pr: diffs,
        curve,
    })
}
