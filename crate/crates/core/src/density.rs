//! Density of the spherical Laplace law `SL(μ, σ)` on `S^p`,
//!
//! ```text
//! f(x | μ, σ) = exp(−d(x, μ) / σ) / C_p(σ),
//! C_p(σ)      = A_{p−1} ∫₀^π e^{−r/σ} sin^{p−1}(r) dr,
//! ```
//!
//! where `A_q` is the surface area of `S^q`. The constant does not depend on
//! `μ`. Everything here is evaluated in log space: for small `σ` and large `p`
//! the raw integrals underflow long before the estimators stop needing them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sphere::{self, UnitVector};

/// Location and scale of an SL distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SLParams {
    pub mu: UnitVector,
    pub sigma: f64,
}

impl SLParams {
    pub fn new(mu: UnitVector, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { mu, sigma })
    }

    /// Intrinsic dimension `p` of the sphere.
    pub fn dim(&self) -> usize {
        self.mu.dim()
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_dim(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "sphere dimension p must be >= 1".into(),
        ));
    }
    Ok(())
}

/// `log A_q`, the log surface area of `S^q ⊂ R^{q+1}`.
pub fn log_surface_area(q: usize) -> f64 {
    let h = 0.5 * (q as f64 + 1.0);
    std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - libm::lgamma(h)
}

/// Surface area `A_q = 2 π^{(q+1)/2} / Γ((q+1)/2)` of `S^q`.
pub fn surface_area(q: usize) -> f64 {
    log_surface_area(q).exp()
}

/// Radial integral `I_0(σ)` together with the first two moments of `r` under
/// the normalized radial density `∝ e^{−r/σ} sin^{p−1}(r)` on `[0, π]`.
///
/// All three derivative integrals used by the scale estimator follow from one
/// pass over the same quadrature nodes:
///
/// ```text
/// I_1 / I_0 = E[r] / σ²
/// I_2 / I_0 = E[r²] / σ⁴ − 2 E[r] / σ³
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMoments {
    pub log_i0: f64,
    pub mean: f64,
    pub second: f64,
}

impl RadialMoments {
    pub fn compute(p: usize, sigma: f64) -> Result<Self> {
        check_dim(p)?;
        check_sigma(sigma)?;
        let rule = QuadratureRule::graded(sigma);
        let pm1 = (p - 1) as f64;
        let logs: Vec<f64> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&r, &w)| {
                let mut t = w.ln() - r / sigma;
                if p > 1 {
                    t += pm1 * r.sin().ln();
                }
                t
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&r, &t) in rule.nodes().iter().zip(&logs) {
            let e = (t - max).exp();
            s0 += e;
            s1 += r * e;
            s2 += r * r * e;
        }
        Ok(Self {
            log_i0: max + s0.ln(),
            mean: s1 / s0,
            second: s2 / s0,
        })
    }

    pub fn variance(&self) -> f64 {
        (self.second - self.mean * self.mean).max(0.0)
    }

    /// `I_1(σ) / I_0(σ)`.
    pub fn ratio1(&self, sigma: f64) -> f64 {
        self.mean / (sigma * sigma)
    }

    /// `I_2(σ) / I_0(σ)`.
    pub fn ratio2(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        self.second / (s2 * s2) - 2.0 * self.mean / (s2 * sigma)
    }
}

/// `log C_p(σ)`.
pub fn log_normalizing_constant(p: usize, sigma: f64) -> Result<f64> {
    let m = RadialMoments::compute(p, sigma)?;
    Ok(log_surface_area(p - 1) + m.log_i0)
}

/// `C_p(σ) = A_{p−1} ∫₀^π e^{−r/σ} sin^{p−1}(r) dr`.
pub fn normalizing_constant(p: usize, sigma: f64) -> Result<f64> {
    log_normalizing_constant(p, sigma).map(f64::exp)
}

/// The radial integrals
///
/// ```text
/// I_0 = ∫ e^{−r/σ} sin^{p−1} r dr
/// I_1 = ∫ (r/σ²) e^{−r/σ} sin^{p−1} r dr
/// I_2 = ∫ (r²/σ⁴ − 2r/σ³) e^{−r/σ} sin^{p−1} r dr
/// ```
///
/// over `[0, π]`. `I_1 = dI_0/dσ` and `I_2 = d²I_0/dσ²`.
pub fn radial_integral(p: usize, sigma: f64, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::InvalidOrder(order));
    }
    let m = RadialMoments::compute(p, sigma)?;
    let i0 = m.log_i0.exp();
    Ok(match order {
        0 => i0,
        1 => i0 * m.ratio1(sigma),
        _ => i0 * m.ratio2(sigma),
    })
}

/// Expected geodesic distance `E[d(x, μ)]` under `SL(μ, σ)` on `S^p`.
pub fn mean_distance(p: usize, sigma: f64) -> Result<f64> {
    RadialMoments::compute(p, sigma).map(|m| m.mean)
}

pub fn log_density(x: &UnitVector, params: &SLParams) -> Result<f64> {
    let d = sphere::geodesic_distance(x, &params.mu)?;
    let log_c = log_normalizing_constant(params.dim(), params.sigma)?;
    Ok(-d / params.sigma - log_c)
}

pub fn density(x: &UnitVector, params: &SLParams) -> Result<f64> {
    log_density(x, params).map(f64::exp)
}
