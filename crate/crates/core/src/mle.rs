//! Maximum-likelihood estimation for a single SL distribution.
//!
//! The log-likelihood of `N` points separates:
//!
//! ```text
//! L(μ, σ) = −(1/σ) Σ d(x_n, μ) − N log C_p(σ)
//! ```
//!
//! so `μ̂` is the Fréchet median of the sample (computed with the geometric
//! Weiszfeld iteration) and `σ̂` minimizes `g(σ) = S/σ + log C_p(σ)` with
//! `S = Σ d(x_n, μ̂) / N`. Since `g'(σ) = (E_σ[r] − S) / σ²`, the scale estimate
//! is the `σ` whose mean radius equals the observed mean distance.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::density::{self, check_sigma, RadialMoments, SLParams};
use crate::error::{Error, Result};
use crate::sphere::{self, UnitVector, ZERO_TOLERANCE};

/// Default convergence tolerance of both solvers, about `sqrt(f64::EPSILON)`.
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Bracket for the scale search.
pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 1e3;

/// Points with non-negative weights, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<UnitVector>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(points: Vec<UnitVector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewPoints {
                needed: 1,
                found: 0,
            });
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(points.len(), weights.len()));
        }
        check_same_dim(&points)?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<UnitVector>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Intrinsic dimension `p`.
    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// `F(μ) = Σ w_n d(x_n, μ)`.
    pub fn objective(&self, mu: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| w * sphere::distance(x.coords(), mu))
            .sum()
    }
}

pub(crate) fn check_same_dim(points: &[UnitVector]) -> Result<()> {
    let expected = points[0].ambient_dim();
    for x in points {
        if x.ambient_dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: x.ambient_dim(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianResult {
    pub mu_hat: UnitVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hit_data_point: bool,
}

/// Weighted Fréchet median by the geometric Weiszfeld iteration
///
/// ```text
/// μ ← Exp_μ( Σ w̃_n Log_μ(x_n) / Σ w̃_n ),   w̃_n = w_n / d(μ, x_n)
/// ```
///
/// started at the normalized weighted extrinsic mean. Iteration stops when the
/// step is below `eps` (geodesic or Euclidean), when the iterate lands on a
/// data point, or after `max_iter` steps. Points antipodal to the iterate have
/// no defined direction and are left out of that step.
pub fn frechet_median(sample: &WeightedSample, eps: f64, max_iter: usize) -> Result<MedianResult> {
    frechet_median_traced(sample, eps, max_iter).map(|(r, _)| r)
}

/// As [`frechet_median`], also returning `F(μ^(t))` for every iterate,
/// starting with the initial point.
pub fn frechet_median_traced(
    sample: &WeightedSample,
    eps: f64,
    max_iter: usize,
) -> Result<(MedianResult, Vec<f64>)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let active: Vec<(&[f64], f64)> = sample
        .points
        .iter()
        .zip(&sample.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| (x.coords(), w))
        .collect();
    let first = active[0].0;
    if active
        .iter()
        .all(|(x, _)| sphere::distance(first, x) < ZERO_TOLERANCE)
    {
        let result = MedianResult {
            mu_hat: UnitVector::from_raw(first.to_vec()),
            objective: 0.0,
            iterations: 0,
            converged: true,
            hit_data_point: false,
        };
        return Ok((result, vec![0.0]));
    }

    let dim = first.len();
    let mut mu = vec![0.0; dim];
    for (x, w) in &active {
        mu.iter_mut().zip(*x).for_each(|(m, xi)| *m += w * xi);
    }
    let n = sphere::norm(&mu);
    if n < ZERO_TOLERANCE {
        return Err(Error::DegenerateInitialization);
    }
    mu.iter_mut().for_each(|m| *m /= n);

    let mut trace = vec![sample.objective(&mu)];
    let mut iterations = 0;
    let mut converged = false;
    let mut hit = false;
    let mut step = vec![0.0; dim];
    let mut log = vec![0.0; dim];
    while iterations < max_iter {
        step.iter_mut().for_each(|s| *s = 0.0);
        let mut total = 0.0;
        for (x, w) in &active {
            let d = sphere::distance(&mu, x);
            if d < ZERO_TOLERANCE {
                hit = true;
                break;
            }
            if !sphere::log_raw(&mu, x, &mut log) {
                continue;
            }
            let wt = w / d;
            total += wt;
            step.iter_mut().zip(&log).for_each(|(s, l)| *s += wt * l);
        }
        if hit {
            converged = true;
            break;
        }
        iterations += 1;
        step.iter_mut().for_each(|s| *s /= total);
        sphere::project_in_place(&mu, &mut step);
        let mut next = sphere::exp_raw(&mu, &step);
        let nn = sphere::norm(&next);
        next.iter_mut().for_each(|v| *v /= nn);
        let geo = sphere::distance(&mu, &next);
        let euc = mu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        mu = next;
        trace.push(sample.objective(&mu));
        if geo < eps || euc < eps {
            converged = true;
            break;
        }
    }
    let result = MedianResult {
        objective: *trace.last().unwrap(),
        mu_hat: UnitVector::from_raw(mu),
        iterations,
        converged,
        hit_data_point: hit,
    };
    Ok((result, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub sigma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Finite-difference step of the approximate Newton update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum FdStep {
    /// `h = factor · σ^(t)` at every iterate.
    Relative(f64),
    /// Fixed `h`, shrunk to `σ^(t)/2` whenever `h ≥ σ^(t)`.
    Absolute(f64),
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep::Relative(1e-5)
    }
}

/// Newton update used for the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum ScaleSolver {
    /// Analytic derivatives from the radial integrals.
    #[default]
    NewtonExact,
    /// Centered finite differences of `g`.
    NewtonApprox(FdStep),
}

/// `g(σ) = S/σ + log C_p(σ)`.
pub fn scale_objective(s: f64, p: usize, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(s / sigma + density::log_normalizing_constant(p, sigma)?)
}

/// `g'(σ) = −S/σ² + I_1/I_0 = (E_σ[r] − S)/σ²`.
pub fn scale_objective_derivative(s: f64, p: usize, sigma: f64) -> Result<f64> {
    let m = RadialMoments::compute(p, sigma)?;
    Ok((m.mean - s) / (sigma * sigma))
}

fn check_dispersion(s: f64) -> Result<()> {
    if !(s > 0.0 && s < PI) {
        return Err(Error::DispersionOutOfRange(s));
    }
    Ok(())
}

/// Newton–Raphson on `g'` with analytic second derivative
/// `g'' = 2S/σ³ + I_2/I_0 − (I_1/I_0)²`.
pub fn estimate_sigma_newton_exact(
    s: f64,
    p: usize,
    sigma0: f64,
    eps: f64,
    max_iter: usize,
) -> Result<ScaleResult> {
    newton(s, p, sigma0, eps, max_iter, |sigma, m| {
        let g1 = (m.mean - s) / (sigma * sigma);
        let r1 = m.ratio1(sigma);
        let g2 = 2.0 * s / (sigma * sigma * sigma) + m.ratio2(sigma) - r1 * r1;
        Ok((g1, g2))
    })
}

/// Newton–Raphson with centered differences of `g`:
///
/// ```text
/// σ ← σ − (h/2) (g(σ+h) − g(σ−h)) / (g(σ+h) − 2g(σ) + g(σ−h))
/// ```
pub fn estimate_sigma_newton_approx(
    s: f64,
    p: usize,
    sigma0: f64,
    eps: f64,
    max_iter: usize,
    h: FdStep,
) -> Result<ScaleResult> {
    match h {
        FdStep::Relative(f) | FdStep::Absolute(f) if !(f > 0.0 && f.is_finite()) => {
            return Err(Error::InvalidParameter(format!(
                "finite-difference step must be positive, got {f}"
            )))
        }
        _ => {}
    }
    newton(s, p, sigma0, eps, max_iter, |sigma, m| {
        let mut h = match h {
            FdStep::Relative(f) => f * sigma,
            FdStep::Absolute(h) => h,
        };
        if h >= sigma {
            h = 0.5 * sigma;
        }
        let g0 = s / sigma + density::log_surface_area(p - 1) + m.log_i0;
        let gp = scale_objective(s, p, sigma + h)?;
        let gm = scale_objective(s, p, sigma - h)?;
        Ok(((gp - gm) / (2.0 * h), (gp - 2.0 * g0 + gm) / (h * h)))
    })
}

/// Safeguarded Newton iteration on `g'`. `derivs` returns `(g', g'')` at `σ`.
///
/// `E_σ[r]` increases in `σ`, so the sign of `g'` tells which side of the root
/// an iterate is on. A bracket starting at `[SIGMA_MIN, SIGMA_MAX]` is shrunk
/// accordingly, and whenever the Newton step is unusable (non-positive
/// curvature, or a step leaving the bracket) a geometric bisection step is
/// taken instead.
fn newton(
    s: f64,
    p: usize,
    sigma0: f64,
    eps: f64,
    max_iter: usize,
    derivs: impl Fn(f64, &RadialMoments) -> Result<(f64, f64)>,
) -> Result<ScaleResult> {
    check_dispersion(s)?;
    check_sigma(sigma0)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    // E_σ[r] < π/2 for every finite σ, with limit π/2 as σ → ∞.
    if s >= FRAC_PI_2 || RadialMoments::compute(p, SIGMA_MAX)?.mean <= s {
        log::warn!("mean distance {s} has no finite scale estimate; returning {SIGMA_MAX}");
        return Ok(ScaleResult {
            sigma_hat: SIGMA_MAX,
            iterations: 0,
            converged: false,
        });
    }
    if RadialMoments::compute(p, SIGMA_MIN)?.mean >= s {
        log::warn!("mean distance {s} is below the scale bracket; returning {SIGMA_MIN}");
        return Ok(ScaleResult {
            sigma_hat: SIGMA_MIN,
            iterations: 0,
            converged: false,
        });
    }

    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let mut sigma = sigma0.clamp(lo, hi);
    for it in 1..=max_iter {
        let m = RadialMoments::compute(p, sigma)?;
        let (g1, g2) = derivs(sigma, &m)?;
        if g1 > 0.0 {
            hi = sigma;
        } else if g1 < 0.0 {
            lo = sigma;
        } else {
            return Ok(ScaleResult {
                sigma_hat: sigma,
                iterations: it,
                converged: true,
            });
        }
        let mut next = sigma - g1 / g2;
        if !(g2 > 0.0) || !next.is_finite() || next <= lo || next >= hi {
            next = (lo * hi).sqrt();
        }
        let delta = (next - sigma).abs();
        sigma = next;
        if delta < eps {
            return Ok(ScaleResult {
                sigma_hat: sigma,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(ScaleResult {
        sigma_hat: sigma,
        iterations: max_iter,
        converged: false,
    })
}

/// Solves for `σ̂` from the mean distance `S`, starting at `σ⁽⁰⁾ = S`.
pub fn estimate_sigma(
    s: f64,
    p: usize,
    solver: ScaleSolver,
    eps: f64,
    max_iter: usize,
) -> Result<ScaleResult> {
    check_dispersion(s)?;
    match solver {
        ScaleSolver::NewtonExact => estimate_sigma_newton_exact(s, p, s, eps, max_iter),
        ScaleSolver::NewtonApprox(h) => estimate_sigma_newton_approx(s, p, s, eps, max_iter, h),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub solver: ScaleSolver,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            max_iter: DEFAULT_MAX_ITER,
            solver: ScaleSolver::NewtonExact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub params: SLParams,
    pub log_likelihood: f64,
    /// Mean distance `S` from the sample to `μ̂`.
    pub mean_distance: f64,
    pub median: MedianResult,
    pub scale: ScaleResult,
    /// Whether the sample lies within `π/4` of `μ̂`. When false the uniqueness
    /// of the estimate is not guaranteed; the fit is still returned.
    pub in_quarter_ball: bool,
}

/// Two-stage MLE with the exact Newton scale solver.
pub fn fit_mle(points: &[UnitVector], eps: f64, max_iter: usize) -> Result<MleFit> {
    fit_mle_with(
        points,
        &MleOptions {
            eps,
            max_iter,
            solver: ScaleSolver::NewtonExact,
        },
    )
}

pub fn fit_mle_with(points: &[UnitVector], options: &MleOptions) -> Result<MleFit> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: points.len(),
        });
    }
    check_same_dim(points)?;
    let x0 = points[0].coords();
    if points
        .iter()
        .all(|x| sphere::distance(x0, x.coords()) <= 1e-12)
    {
        return Err(Error::ZeroDispersion);
    }
    let sample = WeightedSample::uniform(points.to_vec())?;
    let median = frechet_median(&sample, options.eps, options.max_iter)?;
    let mu = median.mu_hat.coords();
    let dists: Vec<f64> = points
        .iter()
        .map(|x| sphere::distance(mu, x.coords()))
        .collect();
    let n = points.len() as f64;
    let s = dists.iter().sum::<f64>() / n;
    let in_quarter_ball = dists.iter().all(|&d| d < FRAC_PI_4);
    if !in_quarter_ball {
        log::warn!(
            "sample is not contained in a π/4 ball around the median; uniqueness is not guaranteed"
        );
    }
    let p = sample.dim();
    let scale = estimate_sigma(s, p, options.solver, options.eps, options.max_iter)?;
    let sigma = scale.sigma_hat;
    let log_likelihood = -n * s / sigma - n * density::log_normalizing_constant(p, sigma)?;
    Ok(MleFit {
        params: SLParams::new(median.mu_hat.clone(), sigma)?,
        log_likelihood,
        mean_distance: s,
        median,
        scale,
        in_quarter_ball,
    })
}
