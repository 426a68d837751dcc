//! JSON configuration files for each subcommand.

use std::path::Path;

use ordsel::calibration::{CalibrationConfig, KGrid};
use ordsel::estimation::PluginConfig;
use ordsel::fdrbounds::DEFAULT_MC_SAMPLES;
use ordsel::simulation::ScenarioSpec;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// Reads and parses a config, reporting serde's line and column on failure.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// A named scenario preset or a fully specified scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Toy,
    Sparsity { d_star: usize },
    Complexity { config: u8 },
    #[serde(alias = "high_dimension")]
    HighDimension { n: usize },
    Noise { sigma2: f64 },
    Custom(ScenarioSpec),
}

impl ScenarioConfig {
    /// The seed argument replaces any seed stored in a custom spec.
    pub fn to_spec(&self, seed: u64) -> Result<ScenarioSpec, CliError> {
        Ok(match *self {
            ScenarioConfig::Toy => ScenarioSpec::toy(seed),
            ScenarioConfig::Sparsity { d_star } => ScenarioSpec::sparsity(d_star, seed),
            ScenarioConfig::Complexity { config } => ScenarioSpec::complexity(config, seed)?,
            ScenarioConfig::HighDimension { n } => ScenarioSpec::high_dimension(n, seed),
            ScenarioConfig::Noise { sigma2 } => ScenarioSpec::noise(sigma2, seed),
            ScenarioConfig::Custom(ref spec) => ScenarioSpec { seed, ..spec.clone() },
        })
    }
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub k_grid: KGrid,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Where the bound curves get `(β*, σ², D*)` from.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BoundSource {
    /// Truth of a generated scenario.
    Scenario { scenario: ScenarioConfig },
    /// Orthonormal design with the given coefficients.
    Orthogonal { beta: Vec<f64>, sigma2: f64, q: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub input: BoundSource,
    #[serde(default)]
    pub k_grid: KGrid,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_mc() -> usize {
    DEFAULT_MC_SAMPLES
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct CalibrateConfig {
    #[serde(flatten)]
    pub calibration: CalibrationConfig,
    pub plugin: PluginConfig,
}

fn default_verify_k() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Coefficients on an orthonormal design; `D*` is the last nonzero index.
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub q: usize,
    #[serde(default = "default_verify_k")]
    pub k_values: Vec<f64>,
    /// Simulated datasets for the end-to-end FDR.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Draws per `P_r` and `Q_r` estimate.
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let c: SimulateConfig = serde_json::from_str(r#"{"scenario": {"preset": "sparsity", "d_star": 20}}"#).unwrap();
        assert_eq!(c.scenario.to_spec(3).unwrap().d_star, 20);
        assert_eq!(c.replicates, 1000);
        let c: SimulateConfig =
            serde_json::from_str(r#"{"scenario": {"preset": "high-dimension", "n": 300}, "replicates": 10}"#).unwrap();
        assert_eq!(c.scenario.to_spec(3).unwrap().n, 300);
    }

    #[test]
    fn custom_scenario_parses() {
        let text = r#"{"scenario": {"preset": "custom", "name": "custom", "n": 20, "p": 10, "d_star": 2,
            "sigma2": 0.5, "coef": {"kind": "explicit", "beta": [3, 1, 0, 0, 0, 0, 0, 0, 0, 0]},
            "design": "gaussian"}, "k_grid": [2, 3, 4]}"#;
        let c: SimulateConfig = serde_json::from_str(text).unwrap();
        let spec = c.scenario.to_spec(9).unwrap();
        assert_eq!((spec.n, spec.p, spec.seed), (20, 10, 9));
        assert_eq!(c.k_grid.values().unwrap(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn bounds_sources_parse() {
        let c: BoundsConfig = serde_json::from_str(r#"{"input": {"beta": [3, 2, 1], "sigma2": 1, "q": 8}}"#).unwrap();
        assert!(matches!(c.input, BoundSource::Orthogonal { q: 8, .. }));
        let c: BoundsConfig = serde_json::from_str(r#"{"input": {"scenario": {"preset": "toy"}}}"#).unwrap();
        assert!(matches!(c.input, BoundSource::Scenario { .. }));
    }

    #[test]
    fn calibrate_defaults() {
        let c: CalibrateConfig = serde_json::from_str(r#"{"alpha": 0.1}"#).unwrap();
        assert_eq!(c.calibration.alpha, 0.1);
        assert_eq!(c.calibration.gamma, 0.1);
        assert_eq!(c.plugin.plugin_k, 4.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<SimulateConfig>(r#"{"scenario": {"preset": "toy"}, "replicate": 3}"#).is_err());
    }
}
