//! Nested least squares through an orthonormal basis of the ranked design.
//!
//! For the collection `m_j = Span(X_1, …, X_j)`, `j = 0..=q`, every fit is
//! determined by the coefficients `⟨Y, u_k⟩` of the response on an
//! orthonormal basis with `Span(u_1..u_j) = Span(X_1..X_j)`:
//! `‖Y − Xβ̂_{m_j}‖² = ‖Y‖² − Σ_{k≤j} ⟨Y, u_k⟩²`.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative residual-norm threshold below which a column counts as dependent.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Response `Y` (length n) and design `X` (n × p), columns in ranked order.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
}

impl Dataset {
    pub fn new(y: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries but the design has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if y.is_empty() || x.ncols() == 0 {
            return Err(Error::domain("dataset needs n ≥ 1 and p ≥ 1"));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite entries"));
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.n().min(self.p())
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }
}

/// Thin QR factors `X[:, ..q] = U R` of the first `q = min(n, p)` columns.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    u: Array2<f64>,
    r: Array2<f64>,
    p: usize,
}

impl OrthoBasis {
    /// Modified Gram–Schmidt with one reorthogonalization pass.
    pub fn from_design(x: &Array2<f64>, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::domain("rank tolerance must be positive"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("design contains non-finite entries"));
        }
        let (n, p) = x.dim();
        let q = n.min(p);
        let mut u = Array2::<f64>::zeros((n, q));
        let mut r = Array2::<f64>::zeros((q, q));
        for j in 0..q {
            let mut v = x.column(j).to_owned();
            let norm0 = v.dot(&v).sqrt();
            if norm0 == 0.0 {
                return Err(Error::RankDeficient { column: j + 1 });
            }
            for _pass in 0..2 {
                for k in 0..j {
                    let uk = u.column(k);
                    let c = uk.dot(&v);
                    v.scaled_add(-c, &uk);
                    r[[k, j]] += c;
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm < tol * norm0 {
                return Err(Error::RankDeficient { column: j + 1 });
            }
            r[[j, j]] = norm;
            v /= norm;
            u.column_mut(j).assign(&v);
        }
        Ok(Self { u, r, p })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.u.ncols()
    }

    /// n × q matrix with orthonormal columns.
    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    /// Upper-triangular q × q factor.
    pub fn r(&self) -> &Array2<f64> {
        &self.r
    }

    /// Coefficients `⟨Xβ, u_k⟩`, k = 1..=q, for a β supported on the first q columns.
    pub fn signal_coefficients(&self, beta: ArrayView1<f64>) -> Result<Array1<f64>> {
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch(format!("β has length {}, expected {}", beta.len(), self.p)));
        }
        if beta.iter().skip(self.q()).any(|&b| b != 0.0) {
            return Err(Error::domain("β has nonzero entries beyond q = min(n, p)"));
        }
        Ok(self.r.dot(&beta.slice(s![..self.q()])))
    }
}

/// Orthonormal basis of the design together with the projections of one response.
#[derive(Debug, Clone)]
pub struct OrthoModel {
    basis: Arc<OrthoBasis>,
    y_coef: Array1<f64>,
    y_sq_norm: f64,
    resid_sq: f64,
}

pub fn orthonormalize(data: &Dataset, tol: f64) -> Result<OrthoModel> {
    let basis = Arc::new(OrthoBasis::from_design(data.x(), tol)?);
    OrthoModel::new(basis, data.y().view())
}

impl OrthoModel {
    pub fn new(basis: Arc<OrthoBasis>, y: ArrayView1<f64>) -> Result<Self> {
        if y.len() != basis.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, basis has {} rows",
                y.len(),
                basis.n()
            )));
        }
        let y_sq_norm = y.dot(&y);
        let mut resid = y.to_owned();
        let mut y_coef = Array1::zeros(basis.q());
        for (k, uk) in basis.u.axis_iter(Axis(1)).enumerate() {
            let c = uk.dot(&resid);
            resid.scaled_add(-c, &uk);
            y_coef[k] = c;
        }
        let resid_sq = resid.dot(&resid);
        Ok(Self { basis, y_coef, y_sq_norm, resid_sq })
    }

    /// Same basis, different response.
    pub fn with_response(&self, y: ArrayView1<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.basis), y)
    }

    pub fn basis(&self) -> &Arc<OrthoBasis> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn p(&self) -> usize {
        self.basis.p()
    }

    pub fn q(&self) -> usize {
        self.basis.q()
    }

    pub fn u(&self) -> &Array2<f64> {
        self.basis.u()
    }

    /// `⟨Y, u_k⟩` for k = 1..=q (stored 0-based).
    pub fn y_coef(&self) -> &Array1<f64> {
        &self.y_coef
    }

    pub fn y_sq_norm(&self) -> f64 {
        self.y_sq_norm
    }

    /// `‖Y − UUᵀY‖²`, the part of the response outside the largest model.
    pub fn resid_sq(&self) -> f64 {
        self.resid_sq
    }

    /// `‖Y − Xβ̂_{m_j}‖²` for j = 0..=q, built from the residual outside the
    /// span plus tail sums so every entry is nonnegative and nonincreasing.
    pub fn rss_profile(&self) -> Vec<f64> {
        let q = self.q();
        let mut out = vec![0.0; q + 1];
        let mut acc = self.resid_sq;
        out[q] = acc;
        for j in (0..q).rev() {
            acc += self.y_coef[j] * self.y_coef[j];
            out[j] = acc;
        }
        out
    }

    /// Dimension minimizing `RSS(m_j) + K σ² j`, smallest on ties.
    ///
    /// Tracks `crit_j − crit_best` incrementally so the comparison never
    /// subtracts large cumulative sums.
    pub fn selected_dim(&self, k: f64, sigma2: f64) -> usize {
        let pen = k * sigma2;
        let mut best = 0;
        let mut gap = 0.0;
        for (j, c) in self.y_coef.iter().enumerate() {
            gap += pen - c * c;
            if gap < 0.0 {
                best = j + 1;
                gap = 0.0;
            }
        }
        best
    }

    pub fn select_model(&self, k: f64, sigma2: f64) -> Result<SelectionResult> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::domain(format!("penalty multiplier K = {k} must be positive")));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("noise variance {sigma2} must be positive")));
        }
        let dim = self.selected_dim(k, sigma2);
        Ok(self.fit(dim, Some(k)))
    }

    /// Least-squares fit on `m_dim`.
    pub fn fit(&self, dim: usize, k: Option<f64>) -> SelectionResult {
        let dim = dim.min(self.q());
        let tail: f64 = self.y_coef.iter().skip(dim).map(|c| c * c).sum();
        SelectionResult { k, dim, rss: self.resid_sq + tail, beta_hat: self.beta_hat(dim) }
    }

    /// Back-substitution `R[..d, ..d] β = ⟨Y, u⟩[..d]`, zero-padded to length p.
    pub fn beta_hat(&self, dim: usize) -> Array1<f64> {
        let r = self.basis.r();
        let mut beta = Array1::zeros(self.p());
        for i in (0..dim).rev() {
            let mut acc = self.y_coef[i];
            for j in i + 1..dim {
                acc -= r[[i, j]] * beta[j];
            }
            beta[i] = acc / r[[i, i]];
        }
        beta
    }

    /// `Xβ̂_{m_dim} = Σ_{k≤dim} ⟨Y, u_k⟩ u_k`.
    pub fn fitted(&self, dim: usize) -> Array1<f64> {
        let dim = dim.min(self.q());
        self.basis.u.slice(s![.., ..dim]).dot(&self.y_coef.slice(s![..dim]))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    /// Penalty multiplier; `None` when the dimension came from cross-validation.
    pub k: Option<f64>,
    pub dim: usize,
    pub rss: f64,
    pub beta_hat: Array1<f64>,
}

/// True regression parameters, used by simulations and bound evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    beta_star: Array1<f64>,
    sigma2: f64,
    d_star: usize,
}

impl GroundTruth {
    /// `D*` is read off as the last nonzero coefficient; every coefficient
    /// before it must be nonzero too.
    pub fn new(beta_star: Array1<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("noise variance {sigma2} must be positive")));
        }
        let d_star = beta_star.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);
        if beta_star.iter().take(d_star).any(|&b| b == 0.0) {
            return Err(Error::domain("active coefficients must come first in the ranked order"));
        }
        Ok(Self { beta_star, sigma2, d_star })
    }

    pub fn beta_star(&self) -> &Array1<f64> {
        &self.beta_star
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn d_star(&self) -> usize {
        self.d_star
    }
}

/// FDP of the nested model `m_dim` when the first `d_star` variables are active.
pub fn fdp_of_dim(dim: usize, d_star: usize) -> f64 {
    dim.saturating_sub(d_star) as f64 / dim.max(1) as f64
}

pub fn fdp(sel: &SelectionResult, truth: &GroundTruth) -> f64 {
    fdp_of_dim(sel.dim, truth.d_star())
}

/// `(1/n) Σ_i (Ỹ_i − (Xβ̂)_i)²`.
pub fn mse(sel: &SelectionResult, new_y: ArrayView1<f64>, x: &Array2<f64>) -> Result<f64> {
    if x.ncols() != sel.beta_hat.len() || x.nrows() != new_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design {}×{}, response {}, coefficients {}",
            x.nrows(),
            x.ncols(),
            new_y.len(),
            sel.beta_hat.len()
        )));
    }
    let pred = x.dot(&sel.beta_hat);
    let n = new_y.len() as f64;
    Ok(new_y.iter().zip(pred.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}
