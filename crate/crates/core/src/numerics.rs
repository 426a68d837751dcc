//! Standard normal and chi-squared distribution functions.

use serde::Serialize;

use crate::error::{Error, Result};

const PROB_SLACK: f64 = 1e-12;
const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ProbValue(f64);

impl ProbValue {
    /// Accepts a raw value within `1e-12` of the unit interval and clamps it.
    pub fn new(raw: f64) -> Result<Self> {
        if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&raw) {
            return Err(Error::domain(format!("probability {raw} outside [0, 1]")));
        }
        Ok(ProbValue(raw.clamp(0.0, 1.0)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<ProbValue> for f64 {
    fn from(p: ProbValue) -> f64 {
        p.0
    }
}

/// Φ(x). Unchecked, for internal hot loops.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// 1 − Φ(x) without cancellation in the upper tail.
#[inline]
pub(crate) fn phi_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn gaussian_cdf(x: f64) -> Result<ProbValue> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gaussian_cdf argument {x} is not finite")));
    }
    ProbValue::new(phi(x))
}

pub fn erfc(x: f64) -> Result<ProbValue> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("erfc argument {x} must be nonnegative")));
    }
    ProbValue::new(libm::erfc(x))
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))` for `a > 0`, `x > 0`.
///
/// The series converges fast below `a + 1`; above it the Lentz continued
/// fraction gives `Q` directly, which keeps the upper tail accurate.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    let log_prefactor = a * x.ln() - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefactor).exp();
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefactor).exp();
        (1.0 - q, q)
    }
}

fn check_dof(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("chi-squared degrees of freedom must be at least 1"));
    }
    Ok(())
}

/// CDF of χ²(k) at `x`; exactly 0 for `x ≤ 0`.
pub fn chi2_cdf(k: u32, x: f64) -> Result<ProbValue> {
    check_dof(k)?;
    if x.is_nan() {
        return Err(Error::domain("chi2_cdf argument is NaN"));
    }
    ProbValue::new(chi2_cdf_raw(k, x))
}

/// Survival function 1 − F of χ²(k) at `x`; exactly 1 for `x ≤ 0`.
pub fn chi2_sf(k: u32, x: f64) -> Result<ProbValue> {
    check_dof(k)?;
    if x.is_nan() {
        return Err(Error::domain("chi2_sf argument is NaN"));
    }
    ProbValue::new(chi2_sf_raw(k, x))
}

pub(crate) fn chi2_cdf_raw(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    incomplete_gamma(0.5 * k as f64, 0.5 * x).0.clamp(0.0, 1.0)
}

pub(crate) fn chi2_sf_raw(k: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    incomplete_gamma(0.5 * k as f64, 0.5 * x).1.clamp(0.0, 1.0)
}
