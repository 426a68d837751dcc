//! Data-driven stand-ins for σ², β* and D*.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdrbounds::BoundInput;
use crate::linmodel::OrthoModel;

const SIGMA2_FLOOR: f64 = 1e-12;

/// How the residual profile is regressed on the model dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeFit {
    /// `RSS_j ≈ σ²(n − j)`: the line is pinned at `(n, 0)`, where the residual
    /// of an n-dimensional fit vanishes.
    #[default]
    Anchored,
    /// Ordinary affine fit with a free intercept.
    Affine,
}

/// Variance estimator used by the plug-in step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceEstimator {
    Slope { window_fraction: f64, fit: SlopeFit },
    /// `RSS_q / (n − q)`, only offered when `n > q + 10`.
    Residual,
}

impl Default for VarianceEstimator {
    fn default() -> Self {
        VarianceEstimator::Slope { window_fraction: 0.5, fit: SlopeFit::Anchored }
    }
}

fn slope_window(q: usize, window_fraction: f64) -> Result<std::ops::RangeInclusive<usize>> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::domain(format!("window fraction {window_fraction} must lie in (0, 1)")));
    }
    if q < 4 {
        return Err(Error::domain(format!("slope heuristic needs q ≥ 4, got {q}")));
    }
    let start = ((1.0 - window_fraction) * q as f64).ceil() as usize;
    if q + 1 - start.min(q + 1) < 3 {
        return Err(Error::domain("slope window holds fewer than 3 dimensions"));
    }
    Ok(start..=q)
}

/// Slope-heuristic σ̂² from the top `window_fraction` of dimensions (anchored fit).
pub fn slope_sigma2(model: &OrthoModel, window_fraction: f64) -> Result<f64> {
    slope_sigma2_with(model, window_fraction, SlopeFit::Anchored)
}

pub fn slope_sigma2_with(model: &OrthoModel, window_fraction: f64, fit: SlopeFit) -> Result<f64> {
    let window = slope_window(model.q(), window_fraction)?;
    let rss = model.rss_profile();
    let n = model.n() as f64;
    let slope = match fit {
        SlopeFit::Anchored => {
            // rss_j / n = −s (j − n)  ⇒  s = Σ (n − j) rss_j / (n Σ (n − j)²)
            let (num, den) = window.fold((0.0, 0.0), |(num, den), j| {
                let w = n - j as f64;
                (num + w * rss[j], den + w * w)
            });
            if den == 0.0 {
                return Err(Error::DegenerateFit { slope: 0.0 });
            }
            -num / (n * den)
        }
        SlopeFit::Affine => {
            let pts: Vec<(f64, f64)> = window.map(|j| (j as f64, rss[j] / n)).collect();
            let m = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            sxy / sxx
        }
    };
    if !(slope < 0.0) {
        return Err(Error::DegenerateFit { slope });
    }
    Ok((-n * slope).max(SIGMA2_FLOOR))
}

/// Unbiased `RSS_q / (n − q)`; needs `n > q + 10`.
pub fn residual_sigma2(model: &OrthoModel) -> Result<f64> {
    let (n, q) = (model.n(), model.q());
    if n <= q + 10 {
        return Err(Error::Config(format!("residual variance needs n > q + 10 (n = {n}, q = {q})")));
    }
    let rss = model.rss_profile()[q];
    if !(rss > 0.0) {
        return Err(Error::DegenerateFit { slope: 0.0 });
    }
    Ok(rss / (n - q) as f64)
}

pub fn estimate_sigma2(model: &OrthoModel, estimator: VarianceEstimator) -> Result<f64> {
    match estimator {
        VarianceEstimator::Slope { window_fraction, fit } => slope_sigma2_with(model, window_fraction, fit),
        VarianceEstimator::Residual => residual_sigma2(model),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PluginConfig {
    pub variance: VarianceEstimator,
    /// Penalty multiplier of the selection that stands in for β*.
    pub plugin_k: f64,
}

impl Default for PluginConfig {
    fn default() -> Self {
        Self { variance: VarianceEstimator::default(), plugin_k: 4.0 }
    }
}

/// `(σ̂², β̂_{m̂(4)}, D̂)`.
#[derive(Debug, Clone, Serialize)]
pub struct PluginEstimate {
    pub sigma2_hat: f64,
    pub beta_hat: Array1<f64>,
    pub d_hat: usize,
    /// `⟨Xβ̂, u_k⟩` for k ≤ D̂, which are just the response coefficients.
    pub signal_coef: Vec<f64>,
}

impl PluginEstimate {
    pub fn bound_input(&self, q: usize) -> Result<BoundInput> {
        BoundInput::new(self.signal_coef.clone(), self.sigma2_hat, q)
    }
}

pub fn plugin_estimate(model: &OrthoModel, cfg: &PluginConfig) -> Result<PluginEstimate> {
    let sigma2_hat = estimate_sigma2(model, cfg.variance)?;
    let sel = model.select_model(cfg.plugin_k, sigma2_hat)?;
    Ok(PluginEstimate {
        sigma2_hat,
        d_hat: sel.dim,
        signal_coef: model.y_coef().iter().take(sel.dim).copied().collect(),
        beta_hat: sel.beta_hat,
    })
}

/// `(1/n) ‖Xβ̂_{m̂(2)} − Xβ̂_{m̂(K)}‖²`: the nested fits differ only by the
/// coefficients between the two selected dimensions.
pub fn diff_pr(model: &OrthoModel, sigma2_hat: f64, k: f64) -> f64 {
    let d2 = model.selected_dim(2.0, sigma2_hat);
    let dk = model.selected_dim(k, sigma2_hat);
    let (lo, hi) = (d2.min(dk), d2.max(dk));
    model.y_coef().slice(ndarray::s![lo..hi]).iter().map(|c| c * c).sum::<f64>() / model.n() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{orthonormalize, Dataset, DEFAULT_RANK_TOL};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal));
        let y = Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal));
        Dataset::new(y, x).unwrap()
    }

    fn noise_model(n: usize, p: usize, seed: u64) -> OrthoModel {
        orthonormalize(&noise_data(n, p, seed), DEFAULT_RANK_TOL).unwrap()
    }

    fn signal_model(seed: u64) -> OrthoModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = Array1::from_shape_fn(50, |i| {
            let z: f64 = rng.sample(StandardNormal);
            if i < 5 { 10.0 + z } else { z }
        });
        orthonormalize(&Dataset::new(y, Array2::eye(50)).unwrap(), DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn slope_recovers_unit_noise() {
        // Over j ≥ 25 the profile carries a χ²₁₇₅ worth of information, so
        // even an efficient estimator lands in [0.8, 1.2] with probability 0.939.
        let reps = 400;
        let vals: Vec<f64> = (0..reps).map(|s| slope_sigma2(&noise_model(200, 50, 1000 + s), 0.5).unwrap()).collect();
        let hits = vals.iter().filter(|v| (0.8..=1.2).contains(*v)).count() as f64 / reps as f64;
        let mean = vals.iter().sum::<f64>() / reps as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(hits > 0.9, "{hits}");
    }

    #[test]
    fn slope_is_quadratic_in_the_response() {
        let data = noise_data(60, 30, 4);
        let m = orthonormalize(&data, DEFAULT_RANK_TOL).unwrap();
        let scaled = m.with_response((data.y() * 3.0).view()).unwrap();
        for fit in [SlopeFit::Anchored, SlopeFit::Affine] {
            let a = slope_sigma2_with(&m, 0.5, fit).unwrap();
            let b = slope_sigma2_with(&scaled, 0.5, fit).unwrap();
            assert!((b - 9.0 * a).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn slope_window_preconditions() {
        let m = noise_model(10, 3, 1);
        assert!(slope_sigma2(&m, 0.5).is_err());
        let m = noise_model(40, 20, 1);
        assert!(slope_sigma2(&m, 0.0).is_err());
        assert!(slope_sigma2(&m, 0.05).is_err());
    }

    #[test]
    fn zero_response_is_degenerate() {
        let m = noise_model(30, 20, 1).with_response(Array1::zeros(30).view()).unwrap();
        assert!(matches!(slope_sigma2(&m, 0.5), Err(Error::DegenerateFit { .. })));
        assert!(matches!(plugin_estimate(&m, &PluginConfig::default()), Err(Error::DegenerateFit { .. })));
        // With a known variance the K = 4 fit of a null response is empty.
        let sel = m.select_model(4.0, 1.0).unwrap();
        assert_eq!(sel.dim, 0);
        assert!(sel.beta_hat.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn residual_estimator_requires_spare_rows() {
        assert!(residual_sigma2(&noise_model(20, 15, 1)).is_err());
        let v = residual_sigma2(&noise_model(400, 20, 2)).unwrap();
        assert!((v - 1.0).abs() < 0.25);
    }

    #[test]
    fn plugin_finds_strong_signal() {
        // Missing a coefficient of size 10 is negligible; the exact-recovery
        // rate is the chance that no noise coefficient is added at K = 4.
        let reps = 400;
        let hits = (0..reps)
            .filter(|&s| plugin_estimate(&signal_model(s), &PluginConfig::default()).unwrap().d_hat == 5)
            .count() as f64;
        let p = crate::fdrbounds::pr_monte_carlo(5, 50, &[4.0], 20_000, 1).unwrap()[0];
        let sd = (p * (1.0 - p) / reps as f64).sqrt();
        assert!(p > 0.9);
        assert!((hits / reps as f64 - p).abs() < 4.0 * sd + 0.02, "{hits}/{reps} vs P = {p}");
    }

    #[test]
    fn plugin_support_is_leading() {
        let est = plugin_estimate(&signal_model(3), &PluginConfig::default()).unwrap();
        assert!(est.beta_hat.iter().skip(est.d_hat).all(|&b| b == 0.0));
        assert_eq!(est.beta_hat.iter().filter(|&&b| b != 0.0).count(), est.d_hat);
        assert_eq!(est.signal_coef.len(), est.d_hat);
    }

    #[test]
    fn diff_pr_at_two_is_zero() {
        let m = signal_model(9);
        assert_eq!(diff_pr(&m, 1.0, 2.0), 0.0);
    }

    #[test]
    fn diff_pr_matches_dense_projection() {
        for s in 0..20 {
            let m = noise_model(40, 40, 500 + s);
            let sigma2 = 0.6;
            for k in [0.5, 1.0, 3.0, 6.0] {
                let d2 = m.selected_dim(2.0, sigma2);
                let dk = m.selected_dim(k, sigma2);
                let dense = &m.fitted(d2) - &m.fitted(dk);
                let oracle = dense.dot(&dense) / 40.0;
                assert!((diff_pr(&m, sigma2, k) - oracle).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn diff_pr_nonnegative(seed in any::<u64>(), k in 0.1f64..10.0) {
            let m = noise_model(30, 20, seed);
            prop_assert!(diff_pr(&m, 0.8, k) >= 0.0);
        }

        #[test]
        fn plugin_dimension_shrinks_with_k(seed in any::<u64>(), k in 0.5f64..6.0, dk in 0.0f64..6.0) {
            let m = signal_model(seed);
            let s2 = slope_sigma2(&m, 0.5).unwrap();
            let small = plugin_estimate(&m, &PluginConfig { plugin_k: k, ..Default::default() }).unwrap();
            let large = plugin_estimate(&m, &PluginConfig { plugin_k: k + dk, ..Default::default() }).unwrap();
            prop_assert!(small.d_hat >= large.d_hat);
            prop_assert_eq!(small.sigma2_hat, s2);
        }

        #[test]
        fn slope_ignores_columns_beyond_q(seed in any::<u64>()) {
            // Extra columns past q = n never enter the nested collection.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_simple_fn((30, 40), || rng.sample(StandardNormal));
            let y = Array1::from_shape_simple_fn(30, || rng.sample(StandardNormal));
            let wide = orthonormalize(&Dataset::new(y.clone(), x.clone()).unwrap(), DEFAULT_RANK_TOL).unwrap();
            let narrow_x = x.slice(ndarray::s![.., ..30]).to_owned();
            let narrow = orthonormalize(&Dataset::new(y, narrow_x).unwrap(), DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(slope_sigma2(&wide, 0.5).unwrap(), slope_sigma2(&narrow, 0.5).unwrap());
        }
    }
}
