//! Seeded scenario generators, empirical FDR/PR curves and a V-fold
//! cross-validation baseline.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{fdp_of_dim, Dataset, GroundTruth, OrthoBasis, OrthoModel, SelectionResult, DEFAULT_RANK_TOL};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Toy,
    Sparsity,
    Complexity,
    #[serde(alias = "high_dimension")]
    HighDimension,
    Noise,
    Custom,
}

/// How the active coefficients are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefRule {
    /// `β*_D = base`, then `β*_j = β*_{j+1} + Unif(low, high)` going up.
    Increments { base: f64, low: f64, high: f64 },
    /// Fixed coefficients of length p.
    Explicit { beta: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Leading block of the identity: `X_ij = 1` iff `i = j`.
    #[default]
    Canonical,
    /// I.i.d. standard normal entries drawn row by row.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    pub n: usize,
    pub p: usize,
    pub d_star: usize,
    pub sigma2: f64,
    pub coef: CoefRule,
    #[serde(default)]
    pub design: DesignKind,
    #[serde(default)]
    pub seed: u64,
}

const WIDE: CoefRule = CoefRule::Increments { base: 2.0, low: 0.5, high: 1.5 };

impl ScenarioSpec {
    /// `n = p = 50`, `D* = 10`, `σ² = 1`, `β*_10 = 2` with increments in (0.5, 1.5).
    pub fn toy(seed: u64) -> Self {
        Self { name: ScenarioKind::Toy, n: 50, p: 50, d_star: 10, sigma2: 1.0, coef: WIDE, design: DesignKind::Canonical, seed }
    }

    pub fn sparsity(d_star: usize, seed: u64) -> Self {
        Self { name: ScenarioKind::Sparsity, d_star, ..Self::toy(seed) }
    }

    /// Configurations 1 to 3: wide increments above 2, narrow increments
    /// above 0.2, narrow increments above 2.
    pub fn complexity(config: u8, seed: u64) -> Result<Self> {
        let coef = match config {
            1 => WIDE,
            2 => CoefRule::Increments { base: 0.2, low: 0.05, high: 0.15 },
            3 => CoefRule::Increments { base: 2.0, low: 0.05, high: 0.15 },
            _ => return Err(Error::Config(format!("complexity configuration {config} is not in 1..=3"))),
        };
        Ok(Self { name: ScenarioKind::Complexity, coef, ..Self::toy(seed) })
    }

    pub fn high_dimension(n: usize, seed: u64) -> Self {
        Self { name: ScenarioKind::HighDimension, n, ..Self::toy(seed) }
    }

    pub fn noise(sigma2: f64, seed: u64) -> Self {
        Self { name: ScenarioKind::Noise, sigma2, ..Self::toy(seed) }
    }

    /// Every configuration of the four scenarios, toy duplicates removed.
    pub fn table2(seed: u64) -> Vec<Self> {
        let mut out = vec![Self::toy(seed)];
        out.extend([1, 20].map(|d| Self::sparsity(d, seed)));
        out.extend([2, 3].map(|c| Self::complexity(c, seed).expect("valid configuration")));
        out.extend([30, 300].map(|n| Self::high_dimension(n, seed)));
        out.extend([0.1, 4.0].map(|v| Self::noise(v, seed)));
        out
    }

    pub fn q(&self) -> usize {
        self.n.min(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Config(format!("sigma2 = {} must be positive and finite", self.sigma2)));
        }
        if self.d_star > self.q() {
            return Err(Error::Config(format!("d_star = {} exceeds min(n, p) = {}", self.d_star, self.q())));
        }
        match &self.coef {
            CoefRule::Increments { base, low, high } => {
                if !(*base > 0.0 && *low >= 0.0 && *high > *low) || !high.is_finite() {
                    return Err(Error::Config(format!("bad increment rule base={base} low={low} high={high}")));
                }
            }
            CoefRule::Explicit { beta } => {
                if beta.len() != self.p {
                    return Err(Error::Config(format!("explicit beta has length {}, p = {}", beta.len(), self.p)));
                }
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(Error::Config("explicit beta has non-finite entries".into()));
                }
            }
        }
        Ok(())
    }
}

/// A scenario with its design, truth and orthonormal basis precomputed, so
/// replicates only draw noise.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    x: Array2<f64>,
    truth: GroundTruth,
    signal: Array1<f64>,
    basis: Arc<OrthoBasis>,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let beta = draw_beta(&spec)?;
        let truth = GroundTruth::new(beta, spec.sigma2)?;
        if truth.d_star() != spec.d_star {
            return Err(Error::Config(format!(
                "coefficients have {} leading nonzeros but d_star = {}",
                truth.d_star(),
                spec.d_star
            )));
        }
        let x = draw_design(&spec);
        let signal = x.dot(truth.beta_star());
        let basis = Arc::new(OrthoBasis::from_design(&x, DEFAULT_RANK_TOL)?);
        Ok(Self { spec, x, truth, signal, basis })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn basis(&self) -> &Arc<OrthoBasis> {
        &self.basis
    }

    /// `Xβ* + ε` with ε drawn sequentially from the `(seed, stream, replicate)` stream.
    fn response(&self, stream: Stream, replicate: u64) -> Array1<f64> {
        let mut rng = seed::rng(self.spec.seed, stream, replicate);
        let sd = self.spec.sigma2.sqrt();
        self.signal.mapv(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
    }

    pub fn training_response(&self, replicate: u64) -> Array1<f64> {
        self.response(Stream::Noise, replicate)
    }

    pub fn validation_response(&self, replicate: u64) -> Array1<f64> {
        self.response(Stream::Validation, replicate)
    }

    pub fn dataset(&self, replicate: u64) -> Result<Dataset> {
        Dataset::new(self.training_response(replicate), self.x.clone())
    }

    pub fn model(&self, replicate: u64) -> Result<OrthoModel> {
        OrthoModel::new(Arc::clone(&self.basis), self.training_response(replicate).view())
    }
}

fn draw_beta(spec: &ScenarioSpec) -> Result<Array1<f64>> {
    match &spec.coef {
        CoefRule::Explicit { beta } => Ok(Array1::from(beta.clone())),
        &CoefRule::Increments { base, low, high } => {
            let mut rng = seed::rng(spec.seed, Stream::Coefficients, 0);
            let mut beta = Array1::zeros(spec.p);
            if spec.d_star > 0 {
                beta[spec.d_star - 1] = base;
                for j in (0..spec.d_star - 1).rev() {
                    let inc = if high > low { rng.random_range(low..high) } else { low };
                    beta[j] = beta[j + 1] + inc;
                }
            }
            Ok(beta)
        }
    }
}

fn draw_design(spec: &ScenarioSpec) -> Array2<f64> {
    match spec.design {
        DesignKind::Canonical => Array2::from_shape_fn((spec.n, spec.p), |(i, j)| f64::from(u8::from(i == j))),
        DesignKind::Gaussian => {
            let mut rng = seed::rng(spec.seed, Stream::Design, 0);
            Array2::from_shape_simple_fn((spec.n, spec.p), || rng.sample(StandardNormal))
        }
    }
}

/// One replicate dataset together with the truth it was drawn from.
pub fn generate(spec: &ScenarioSpec, replicate: u64) -> Result<(Dataset, GroundTruth)> {
    let sc = Scenario::new(spec.clone())?;
    Ok((sc.dataset(replicate)?, sc.truth.clone()))
}

/// Replicate averages of FDP and validation MSE per K, with 95% CLT half-widths.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCurve {
    pub k_grid: Vec<f64>,
    pub fdr: Vec<f64>,
    pub fdr_ci: Vec<f64>,
    pub pr: Vec<f64>,
    pub pr_ci: Vec<f64>,
    pub mean_dim: Vec<f64>,
    pub replicates: usize,
    pub spec: ScenarioSpec,
}

/// Mean and `1.96·sd/√m` with the unbiased sample standard deviation.
pub fn mean_ci(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.clone().sum::<f64>() / m;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, 1.96 * var.sqrt() / m.sqrt())
}

/// `(dim, fdp, mse)` for every K on one replicate.
pub fn replicate_outcomes(sc: &Scenario, k_grid: &[f64], replicate: u64) -> Result<Vec<(usize, f64, f64)>> {
    let model = sc.model(replicate)?;
    let valid = OrthoModel::new(Arc::clone(&sc.basis), sc.validation_response(replicate).view())?;
    let (c, v) = (model.y_coef(), valid.y_coef());
    // ‖Ỹ − Xβ̂_d‖² = Σ_{k<d} (ṽ_k − c_k)² + Σ_{k≥d} ṽ_k² + ‖Ỹ outside span‖²
    let q = sc.basis.q();
    let mut tail = vec![0.0; q + 1];
    for j in (0..q).rev() {
        tail[j] = tail[j + 1] + v[j] * v[j];
    }
    let mut head = vec![0.0; q + 1];
    for j in 0..q {
        head[j + 1] = head[j] + (v[j] - c[j]) * (v[j] - c[j]);
    }
    let n = sc.spec.n as f64;
    let d_star = sc.truth.d_star();
    let sigma2 = sc.spec.sigma2;
    Ok(k_grid
        .iter()
        .map(|&k| {
            let d = model.selected_dim(k, sigma2);
            (d, fdp_of_dim(d, d_star), (head[d] + tail[d] + valid.resid_sq()) / n)
        })
        .collect())
}

impl Scenario {
    pub fn empirical_curves(&self, k_grid: &[f64], replicates: usize) -> Result<EmpiricalCurve> {
        if replicates < 2 {
            return Err(Error::Config(format!("need at least 2 replicates, got {replicates}")));
        }
        if k_grid.is_empty() || k_grid.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Err(Error::Config("K grid must be nonempty with positive finite values".into()));
        }
        let rows = (0..replicates as u64)
            .into_par_iter()
            .map(|r| replicate_outcomes(self, k_grid, r))
            .collect::<Result<Vec<_>>>()?;
        let len = k_grid.len();
        let mut curve = EmpiricalCurve {
            k_grid: k_grid.to_vec(),
            fdr: vec![0.0; len],
            fdr_ci: vec![0.0; len],
            pr: vec![0.0; len],
            pr_ci: vec![0.0; len],
            mean_dim: vec![0.0; len],
            replicates,
            spec: self.spec.clone(),
        };
        for i in 0..len {
            (curve.fdr[i], curve.fdr_ci[i]) = mean_ci(rows.iter().map(|row| row[i].1));
            (curve.pr[i], curve.pr_ci[i]) = mean_ci(rows.iter().map(|row| row[i].2));
            curve.mean_dim[i] = rows.iter().map(|row| row[i].0 as f64).sum::<f64>() / replicates as f64;
        }
        Ok(curve)
    }
}

pub fn empirical_curves(spec: &ScenarioSpec, k_grid: &[f64], replicates: usize) -> Result<EmpiricalCurve> {
    Scenario::new(spec.clone())?.empirical_curves(k_grid, replicates)
}

/// Outcome of the cross-validated choice of dimension.
#[derive(Debug, Clone, Serialize)]
pub struct CvSelection {
    pub selection: SelectionResult,
    /// Mean held-out error per dimension; `None` when no fold could fit it.
    pub scores: Vec<Option<f64>>,
    /// Number of (fold, dimension) pairs left out for rank deficiency.
    pub skipped_pairs: usize,
}

/// Held-out squared errors of the nested fits `j = 0..=q` for one fold;
/// stops at the first dimension whose training design is rank deficient.
fn fold_errors(x: &Array2<f64>, y: &Array1<f64>, train: &[usize], test: &[usize], q: usize) -> Vec<f64> {
    let nt = train.len();
    let mut u: Vec<Array1<f64>> = Vec::with_capacity(q);
    let mut r = Array2::<f64>::zeros((q, q));
    let y_train = Array1::from_iter(train.iter().map(|&i| y[i]));
    let mut resid = y_train.clone();
    // w[v] holds R^{-T} x_v incrementally; pred[v] the running prediction.
    let mut w = Array2::<f64>::zeros((test.len(), q));
    let mut pred = vec![0.0; test.len()];
    let sse = |pred: &[f64]| test.iter().zip(pred).map(|(&i, p)| (y[i] - p) * (y[i] - p)).sum::<f64>();
    let mut out = vec![sse(&pred) / test.len() as f64];
    for j in 0..q.min(nt) {
        let mut v = Array1::from_iter(train.iter().map(|&i| x[[i, j]]));
        let norm0 = v.dot(&v).sqrt();
        if norm0 == 0.0 {
            break;
        }
        for _pass in 0..2 {
            for (k, uk) in u.iter().enumerate() {
                let c = uk.dot(&v);
                v.scaled_add(-c, uk);
                r[[k, j]] += c;
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm < DEFAULT_RANK_TOL * norm0 {
            break;
        }
        r[[j, j]] = norm;
        v /= norm;
        let c = v.dot(&resid);
        resid.scaled_add(-c, &v);
        u.push(v);
        for (t, &i) in test.iter().enumerate() {
            let acc = x[[i, j]] - (0..j).map(|k| r[[k, j]] * w[[t, k]]).sum::<f64>();
            w[[t, j]] = acc / norm;
            pred[t] += w[[t, j]] * c;
        }
        out.push(sse(&pred) / test.len() as f64);
    }
    out
}

/// V-fold cross-validation over the nested collection: rows are shuffled with
/// the given seed and cut into contiguous folds, each dimension is scored by
/// its mean held-out error and the winner is refit on all rows.
pub fn vfold_cv_select(data: &Dataset, folds: usize, seed: u64) -> Result<CvSelection> {
    let n = data.n();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("folds = {folds} must lie in 2..={n}")));
    }
    let q = data.q();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed, Stream::Folds, 0));
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
            let test = &perm[lo..hi];
            let train: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
            fold_errors(data.x(), data.y(), &train, test, q)
        })
        .collect();
    let mut scores = vec![None; q + 1];
    let mut skipped = 0;
    for (j, score) in scores.iter_mut().enumerate() {
        let vals: Vec<f64> = per_fold.iter().filter_map(|e| e.get(j).copied()).collect();
        skipped += folds - vals.len();
        if !vals.is_empty() {
            *score = Some(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    if skipped > 0 {
        log::warn!("cross-validation skipped {skipped} rank-deficient (fold, dimension) pairs");
    }
    let mut best = 0;
    for (j, s) in scores.iter().enumerate() {
        if let (Some(s), Some(b)) = (s, scores[best]) {
            if *s < b {
                best = j;
            }
        }
    }
    let model = crate::linmodel::orthonormalize(data, DEFAULT_RANK_TOL)?;
    Ok(CvSelection { selection: model.fit(best, None), scores, skipped_pairs: skipped })
}

/// First `rows` rows of a dataset; canonical scenarios nest this way across n.
pub fn head_rows(data: &Dataset, rows: usize) -> Result<Dataset> {
    Dataset::new(data.y().slice(s![..rows]).to_owned(), data.x().slice(s![..rows, ..]).to_owned())
}
