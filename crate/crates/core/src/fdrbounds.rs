//! Explicit FDR bounds for the nested-collection selector.
//!
//! The exact FDR factorizes as `Σ_{r > D*} (r − D*)/r · P_r(K) · Q_r(K)`.
//! `P_r` is data free and estimated by Monte Carlo; `Q_r` depends on the
//! signal and is replaced by an explicit lower recursion (`f̲_r`) or a
//! chi-squared upper term (`f̄_r`).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linmodel::{GroundTruth, OrthoBasis};
use crate::numerics::{chi2_sf_raw, phi_sf};
use crate::seed::{self, Stream};

/// Number of Monte-Carlo vectors per `P_r` column by default.
pub const DEFAULT_MC_SAMPLES: usize = 5000;

/// Everything the bounds need: `⟨Xβ*, u_k⟩` for `k ≤ D*`, σ² and `q`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundInput {
    signal_coef: Vec<f64>,
    sigma2: f64,
    q: usize,
}

impl BoundInput {
    /// `D*` is the length of `signal_coef`; `D* = q` is allowed and yields
    /// identically zero bounds.
    pub fn new(signal_coef: Vec<f64>, sigma2: f64, q: usize) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("noise variance {sigma2} must be positive")));
        }
        if signal_coef.len() > q {
            return Err(Error::domain(format!("D* = {} exceeds q = {q}", signal_coef.len())));
        }
        if q == 0 {
            return Err(Error::domain("q must be positive"));
        }
        if signal_coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("signal coefficients must be finite"));
        }
        Ok(Self { signal_coef, sigma2, q })
    }

    /// Signal coefficients from the design's Gram–Schmidt factors.
    pub fn from_truth(basis: &OrthoBasis, truth: &GroundTruth) -> Result<Self> {
        let coefs = basis.signal_coefficients(truth.beta_star().view())?;
        Self::new(coefs.iter().take(truth.d_star()).copied().collect(), truth.sigma2(), basis.q())
    }

    /// Orthonormal design: `⟨Xβ*, u_k⟩ = β*_k`.
    pub fn orthogonal(beta_star: &[f64], sigma2: f64, q: usize) -> Result<Self> {
        let d = beta_star.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);
        Self::new(beta_star[..d].to_vec(), sigma2, q)
    }

    pub fn signal_coef(&self) -> &[f64] {
        &self.signal_coef
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn d_star(&self) -> usize {
        self.signal_coef.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn is_saturated(&self) -> bool {
        self.d_star() == self.q
    }

    fn check_r(&self, r: usize) -> Result<()> {
        if r <= self.d_star() || r > self.q {
            return Err(Error::domain(format!("r = {r} outside {}..={}", self.d_star() + 1, self.q)));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// Sorted critical values `max_{ℓ>r} (Σ_{k=r+1}^ℓ Z_k²)/(ℓ − r)`; the event
/// defining `P_r(K)` is `critical < K`.
fn pr_critical_values(r: usize, q: usize, mc_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, Stream::Pr, r as u64);
    let mut out: Vec<f64> = (0..mc_samples)
        .map(|_| {
            let mut sum = 0.0;
            let mut worst = f64::NEG_INFINITY;
            for len in 1..=(q - r) {
                let z: f64 = rng.sample(StandardNormal);
                sum += z * z;
                worst = worst.max(sum / len as f64);
            }
            worst
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `P̂_r(K)` for every `K` in `k_grid`, sharing the same draws across the grid.
pub fn pr_monte_carlo(r: usize, q: usize, k_grid: &[f64], mc_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if r > q {
        return Err(Error::domain(format!("r = {r} exceeds q = {q}")));
    }
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be at least 1"));
    }
    if r == q {
        return Ok(vec![1.0; k_grid.len()]);
    }
    let crit = pr_critical_values(r, q, mc_samples, seed);
    let m = mc_samples as f64;
    Ok(k_grid.iter().map(|&k| crit.partition_point(|&t| t < k) as f64 / m).collect())
}

/// `P̂_r(K_i)` for all `r ∈ 0..=q` on a shared K grid.
#[derive(Debug, Clone, Serialize)]
pub struct PrTable {
    q: usize,
    k_grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    mc_samples: usize,
    seed: u64,
}

impl PrTable {
    /// Rows are computed in parallel; each row has its own derived stream, so
    /// the table does not depend on scheduling.
    pub fn estimate(q: usize, k_grid: &[f64], mc_samples: usize, seed: u64) -> Result<Self> {
        if mc_samples == 0 {
            return Err(Error::domain("mc_samples must be at least 1"));
        }
        let values = (0..=q)
            .into_par_iter()
            .map(|r| pr_monte_carlo(r, q, k_grid, mc_samples, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { q, k_grid: k_grid.to_vec(), values, mc_samples, seed })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `P̂_r` on the grid.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r]
    }

    pub fn get(&self, r: usize, i: usize) -> f64 {
        self.values[r][i]
    }

    /// Multiplies every estimate by `factor`; only used to inject faults in
    /// verification runs.
    pub fn scaled(mut self, factor: f64) -> Self {
        for row in &mut self.values {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        self
    }
}

/// Recursive lower term `f̲_r(K)`.
pub fn lower_term(input: &BoundInput, r: usize, k: f64) -> f64 {
    let sigma = input.sigma2.sqrt();
    let root_k = k.sqrt();
    let mut f = 0.0;
    for l in 1..=r {
        let root_lk = (l as f64 * k).sqrt();
        let (g, h) = match input.signal_coef.get(l - 1) {
            Some(&a) => {
                let a = a / sigma;
                // 2 − Φ(s − a) − Φ(s + a) written with upper tails.
                let g = phi_sf(root_lk - a) + phi_sf(root_lk + a);
                let h = (phi_sf(root_k - a) - phi_sf(root_lk - a)) + (phi_sf(root_k + a) - phi_sf(root_lk + a));
                (g, h)
            }
            None => (2.0 * phi_sf(root_lk), 2.0 * (phi_sf(root_k) - phi_sf(root_lk))),
        };
        let g = g.clamp(0.0, 1.0);
        let h = h.clamp(0.0, 1.0);
        f = if l == 1 { g } else { (g + h * f).clamp(0.0, 1.0) };
    }
    f
}

/// Chi-squared upper term `f̄_r(K)`, computed as the smallest survival
/// probability rather than `1 − max CDF`.
pub fn upper_term(input: &BoundInput, r: usize, k: f64) -> f64 {
    let d = input.d_star();
    let free = r - d;
    let mut best = 1.0f64;
    for l in 1..=free {
        best = best.min(chi2_sf_raw(l as u32, l as f64 * k));
    }
    // ℓ = free + m uses the signal coefficients k = d − m + 1 ..= d.
    let mut shift = 0.0;
    for m in 1..=d {
        let a = input.signal_coef[d - m];
        shift += a * a / input.sigma2;
        let l = free + m;
        best = best.min(chi2_sf_raw(l as u32, 0.5 * l as f64 * k - shift));
    }
    best.clamp(0.0, 1.0)
}

/// σ²-free floor term of the lower bound.
pub fn floor_term(r: usize, k: f64) -> f64 {
    let rk = r as f64 * k;
    2.0 * std::f64::consts::SQRT_2 / (std::f64::consts::PI.sqrt() * (rk.sqrt() + (rk + 4.0).sqrt())) * (-0.5 * rk).exp()
}

/// Lower bound `b`, upper bound `B` and the positive floor on a K grid.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub k_grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub floor: Vec<f64>,
    /// Monte-Carlo standard error carried by the shared `P̂_r` factor in `upper`.
    pub upper_mc_err: Vec<f64>,
    /// Same for `lower`.
    pub lower_mc_err: Vec<f64>,
    pub d_star: usize,
    pub q: usize,
    pub sigma2: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

pub fn bound_curve(input: &BoundInput, k_grid: &[f64], pr: &PrTable) -> Result<BoundCurve> {
    if pr.k_grid() != k_grid {
        return Err(Error::DimensionMismatch("P_r table was estimated on a different K grid".into()));
    }
    if pr.q() != input.q() {
        return Err(Error::DimensionMismatch(format!("P_r table has q = {}, input has q = {}", pr.q(), input.q())));
    }
    let d = input.d_star();
    let m = pr.mc_samples() as f64;
    let len = k_grid.len();
    let mut curve = BoundCurve {
        k_grid: k_grid.to_vec(),
        lower: vec![0.0; len],
        upper: vec![0.0; len],
        floor: vec![0.0; len],
        upper_mc_err: vec![0.0; len],
        lower_mc_err: vec![0.0; len],
        d_star: d,
        q: input.q(),
        sigma2: input.sigma2(),
        mc_samples: pr.mc_samples(),
        seed: pr.seed(),
    };
    for (i, &k) in k_grid.iter().enumerate() {
        let (mut var_lo, mut var_hi) = (0.0, 0.0);
        for r in d + 1..=input.q() {
            let w = (r - d) as f64 / r as f64;
            let p = pr.get(r, i);
            let lo = lower_term(input, r, k);
            let hi = upper_term(input, r, k);
            curve.lower[i] += w * p * lo;
            curve.upper[i] += w * p * hi;
            curve.floor[i] += w * p * floor_term(r, k);
            let var_p = p * (1.0 - p) / m;
            var_lo += (w * lo).powi(2) * var_p;
            var_hi += (w * hi).powi(2) * var_p;
        }
        curve.lower_mc_err[i] = var_lo.sqrt();
        curve.upper_mc_err[i] = var_hi.sqrt();
    }
    Ok(curve)
}

/// Monte-Carlo estimate of `Q_r(K)`: all `r` constraints
/// `Σ_{k=ℓ+1}^r ⟨Y, u_k⟩² > Kσ²(r − ℓ)`, ℓ = 0..r.
pub fn qr_monte_carlo(input: &BoundInput, r: usize, k: f64, mc_samples: usize, seed: u64) -> Result<McEstimate> {
    input.check_r(r)?;
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be at least 1"));
    }
    let sigma = input.sigma2.sqrt();
    let threshold = k * input.sigma2;
    let mut rng = seed::rng(seed, Stream::Qr, r as u64);
    let mut coef = vec![0.0; r];
    let mut hits = 0usize;
    for _ in 0..mc_samples {
        for (idx, c) in coef.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let y = input.signal_coef.get(idx).copied().unwrap_or(0.0) + sigma * z;
            *c = y * y;
        }
        let mut sum = 0.0;
        let mut ok = true;
        for (len, c) in coef.iter().rev().enumerate() {
            sum += c;
            if !(sum > threshold * (len + 1) as f64) {
                ok = false;
                break;
            }
        }
        hits += ok as usize;
    }
    let m = mc_samples as f64;
    let p = hits as f64 / m;
    Ok(McEstimate { value: p, std_err: (p * (1.0 - p) / m).sqrt() })
}

/// One summand of the factorized FDR.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FactorizedTerm {
    pub r: usize,
    pub weight: f64,
    pub pr: McEstimate,
    pub qr: McEstimate,
}

/// Independent estimates of `P_r(K)` and `Q_r(K)` for every `r > D*`.
pub fn factorized_terms(input: &BoundInput, k: f64, mc_samples: usize, seed: u64) -> Result<Vec<FactorizedTerm>> {
    if input.is_saturated() {
        return Err(Error::SaturatedModel { dim: input.d_star(), q: input.q() });
    }
    let p_seed = seed::derive(seed, Stream::Factorized, 0);
    let q_seed = seed::derive(seed, Stream::Factorized, 1);
    let m = mc_samples as f64;
    (input.d_star() + 1..=input.q())
        .into_par_iter()
        .map(|r| {
            let p = pr_monte_carlo(r, input.q(), &[k], mc_samples, p_seed)?[0];
            let qr = qr_monte_carlo(input, r, k, mc_samples, q_seed)?;
            let std_err = if r == input.q() { 0.0 } else { (p * (1.0 - p) / m).sqrt() };
            Ok(FactorizedTerm {
                r,
                weight: (r - input.d_star()) as f64 / r as f64,
                pr: McEstimate { value: p, std_err },
                qr,
            })
        })
        .collect()
}

/// Sum of weighted products with the delta-method standard error.
pub fn combine_terms(terms: &[FactorizedTerm], pr_scale: f64) -> McEstimate {
    let mut value = 0.0;
    let mut var = 0.0;
    for t in terms {
        let p = t.pr.value * pr_scale;
        let q = t.qr.value;
        value += t.weight * p * q;
        let sp = t.pr.std_err * pr_scale;
        var += t.weight * t.weight * (q * q * sp * sp + p * p * t.qr.std_err * t.qr.std_err);
    }
    McEstimate { value, std_err: var.sqrt() }
}

/// `Σ_r (r − D*)/r · P̂_r(K) · Q̂_r(K)` with independent streams for P and Q.
pub fn fdr_factorized(input: &BoundInput, k: f64, mc_samples: usize, seed: u64) -> Result<McEstimate> {
    Ok(combine_terms(&factorized_terms(input, k, mc_samples, seed)?, 1.0))
}
