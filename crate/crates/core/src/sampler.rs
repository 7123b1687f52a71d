//! Random variate generation for the SL distribution.
//!
//! Three samplers are provided:
//!
//! * [`sample_rejection`]: rejection sampling with a spherical-normal proposal
//!   of concentration `λ = 1/σ` at the same location. The acceptance ratio
//!   reduces to `τ(r) = exp(((r − 1)² − (π − 1)²) / 2σ)`, which collapses for
//!   small `σ`.
//! * [`sample_mh`]: random-walk Metropolis–Hastings with isotropic Gaussian
//!   steps in the tangent space of the current iterate, for the small-`σ` regime.
//! * [`sample_radial_oracle`]: exact sampling by radial decomposition. The
//!   geodesic distance to `μ` has density `∝ e^{−r/σ} sin^{p−1}(r)` and the
//!   direction is uniform on the unit sphere of `T_μ S^p`; `r` is drawn from a
//!   tabulated inverse CDF.
//!
//! The spherical-normal proposal is sampled with the same radial decomposition,
//! using the radial density `∝ e^{−λr²/2} sin^{p−1}(r)`.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{check_sigma, SLParams};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::sphere::{self, UnitVector};

/// Number of cells in an inverse-CDF table.
pub const TABLE_SIZE: usize = 4096;

/// Proposals after which the rejection sampler checks its acceptance rate.
pub const REJECTION_CHECK_EVERY: u64 = 100_000;
/// Minimum acceptance rate tolerated by the rejection sampler.
pub const REJECTION_MIN_RATE: f64 = 1e-4;

/// Seeded deterministic generator (ChaCha8).
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub const ALGORITHM: &'static str = "ChaCha8";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub n_accepted: u64,
    pub n_proposed: u64,
    pub acceptance_rate: f64,
}

impl SamplerReport {
    fn new(n_accepted: u64, n_proposed: u64) -> Self {
        let acceptance_rate = if n_proposed == 0 {
            1.0
        } else {
            n_accepted as f64 / n_proposed as f64
        };
        Self {
            n_accepted,
            n_proposed,
            acceptance_rate,
        }
    }
}

/// Acceptance probability of the rejection sampler for a proposal at
/// distance `r` from the location.
pub fn acceptance_threshold(r: f64, sigma: f64) -> f64 {
    let a = r - 1.0;
    let b = PI - 1.0;
    ((a * a - b * b) / (2.0 * sigma)).exp()
}

/// Inverse-CDF table for a radial density on `[0, π]`.
///
/// Cell edges follow the same geometric grading as the quadrature rules
/// (breakpoints at `scale · 2^k`), so a sharply peaked density still gets
/// most of the cells. Cell masses come from an 8-node Gauss–Legendre rule and
/// the inverse CDF is linearly interpolated inside a cell.
#[derive(Debug, Clone)]
pub struct RadialTable {
    edges: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialTable {
    pub fn new(log_density: impl Fn(f64) -> f64, scale: f64) -> Self {
        let mut breaks = vec![0.0];
        let mut b = scale;
        while b < PI {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(PI);
        let panels = breaks.len() - 1;
        let per_panel = TABLE_SIZE.div_ceil(panels);

        let mut edges = Vec::with_capacity(panels * per_panel + 1);
        edges.push(0.0);
        for w in breaks.windows(2) {
            let h = (w[1] - w[0]) / per_panel as f64;
            for j in 1..per_panel {
                edges.push(w[0] + j as f64 * h);
            }
            edges.push(w[1]);
        }

        let (gx, gw) = gauss_legendre(8);
        let mut logs = Vec::with_capacity((edges.len() - 1) * gx.len());
        for e in edges.windows(2) {
            let half = 0.5 * (e[1] - e[0]);
            let mid = 0.5 * (e[0] + e[1]);
            for (x, w) in gx.iter().zip(&gw) {
                logs.push((half * w).ln() + log_density(mid + half * x));
            }
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(edges.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for cell in logs.chunks(gx.len()) {
            acc += cell.iter().map(|l| (l - max).exp()).sum::<f64>();
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { edges, cdf }
    }

    /// SL radial density `∝ e^{−r/σ} sin^{p−1}(r)`.
    pub fn spherical_laplace(p: usize, sigma: f64) -> Self {
        let pm1 = (p - 1) as f64;
        Self::new(move |r| -r / sigma + pm1 * r.sin().ln(), sigma)
    }

    /// Spherical-normal radial density `∝ e^{−λr²/2} sin^{p−1}(r)`.
    pub fn spherical_normal(p: usize, lambda: f64) -> Self {
        let pm1 = (p - 1) as f64;
        Self::new(
            move |r| -0.5 * lambda * r * r + pm1 * r.sin().ln(),
            lambda.sqrt().recip(),
        )
    }

    /// Maps a uniform variate `u ∈ [0, 1)` to a radius.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let (r0, r1) = (self.edges[j], self.edges[j + 1]);
        if c1 <= c0 {
            return r0;
        }
        (r0 + (u - c0) / (c1 - c0) * (r1 - r0)).clamp(0.0, PI)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Uniformly distributed unit vector in the tangent space at `mu`.
pub fn uniform_tangent_direction<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut z: Vec<f64> = (0..mu.len()).map(|_| rng.sample(StandardNormal)).collect();
        sphere::project_in_place(mu, &mut z);
        let n = sphere::norm(&z);
        if n > 1e-12 {
            z.iter_mut().for_each(|v| *v /= n);
            return z;
        }
    }
}

fn point_at_radius<R: Rng + ?Sized>(mu: &[f64], r: f64, rng: &mut R) -> UnitVector {
    let mut dir = uniform_tangent_direction(mu, rng);
    dir.iter_mut().for_each(|v| *v *= r);
    UnitVector::from_raw(sphere::exp_raw(mu, &dir))
}

/// Spherical-normal proposal `SN(μ, λ)` with a prebuilt radial table.
#[derive(Debug, Clone)]
pub struct SnProposal {
    mu: UnitVector,
    table: RadialTable,
}

impl SnProposal {
    pub fn new(mu: UnitVector, lambda: f64) -> Result<Self> {
        check_sigma(lambda)?;
        let table = RadialTable::spherical_normal(mu.dim(), lambda);
        Ok(Self { mu, table })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector {
        let r = self.table.sample(rng);
        point_at_radius(self.mu.coords(), r, rng)
    }
}

/// One draw from the spherical normal `SN(μ, λ)`.
pub fn sample_sn_proposal<R: Rng + ?Sized>(
    mu: &UnitVector,
    lambda: f64,
    rng: &mut R,
) -> Result<UnitVector> {
    Ok(SnProposal::new(mu.clone(), lambda)?.sample(rng))
}

pub fn sample_rejection<R: Rng + ?Sized>(
    params: &SLParams,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<UnitVector>, SamplerReport)> {
    let sigma = params.sigma;
    let proposal = SnProposal::new(params.mu.clone(), 1.0 / sigma)?;
    let mut out = Vec::with_capacity(n);
    let mut proposed = 0u64;
    while out.len() < n {
        let u: f64 = rng.random();
        let y = proposal.sample(rng);
        let r = sphere::distance(params.mu.coords(), y.coords());
        let tau = acceptance_threshold(r, sigma);
        debug_assert!(tau <= 1.0 + 1e-12, "ratio bound violated: {tau}");
        proposed += 1;
        if u <= tau {
            out.push(y);
        }
        if proposed.is_multiple_of(REJECTION_CHECK_EVERY) {
            let rate = out.len() as f64 / proposed as f64;
            if rate < REJECTION_MIN_RATE {
                return Err(Error::RejectionInefficient { rate, proposed });
            }
        }
    }
    Ok((out, SamplerReport::new(n as u64, proposed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhOptions {
    pub burn_in: usize,
    /// Standard deviation of the tangent-space Gaussian step; `None` uses `σ`.
    pub proposal_stddev: Option<f64>,
    pub thinning: usize,
}

impl Default for MhOptions {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            proposal_stddev: None,
            thinning: 1,
        }
    }
}

/// Random-walk Metropolis–Hastings chain started at `μ`.
///
/// Proposals are `Exp_x(ζ)` with `ζ` an isotropic Gaussian in `T_x S^p`. The
/// proposal density depends on `d(x, y)` only, so it is symmetric and the
/// acceptance probability is `min(1, f(y) / f(x))`.
pub fn sample_mh<R: Rng + ?Sized>(
    params: &SLParams,
    n: usize,
    options: &MhOptions,
    rng: &mut R,
) -> Result<(Vec<UnitVector>, SamplerReport)> {
    let sigma = params.sigma;
    let step = options.proposal_stddev.unwrap_or(sigma);
    check_sigma(step)?;
    let thin = options.thinning.max(1);
    let mu = params.mu.coords();

    let mut x = mu.to_vec();
    let mut dx = 0.0;
    let mut accepted = 0u64;
    let total = options.burn_in + n * thin;
    let mut out = Vec::with_capacity(n);
    let mut z = vec![0.0; mu.len()];
    for t in 0..total {
        z.iter_mut()
            .for_each(|v| *v = step * rng.sample::<f64, _>(StandardNormal));
        sphere::project_in_place(&x, &mut z);
        let y = sphere::exp_raw(&x, &z);
        let ny = sphere::norm(&y);
        let y: Vec<f64> = y.into_iter().map(|v| v / ny).collect();
        let dy = sphere::distance(mu, &y);
        let log_alpha = -(dy - dx) / sigma;
        let u: f64 = rng.random();
        if log_alpha >= 0.0 || u.ln() < log_alpha {
            x = y;
            dx = dy;
            accepted += 1;
        }
        if t >= options.burn_in && (t - options.burn_in) % thin == thin - 1 {
            out.push(UnitVector::from_raw(x.clone()));
        }
    }
    Ok((out, SamplerReport::new(accepted, total as u64)))
}

/// Exact SL sampler by radial decomposition with a prebuilt radial table.
#[derive(Debug, Clone)]
pub struct OracleSampler {
    mu: UnitVector,
    table: RadialTable,
}

impl OracleSampler {
    pub fn new(params: &SLParams) -> Self {
        Self {
            mu: params.mu.clone(),
            table: RadialTable::spherical_laplace(params.dim(), params.sigma),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitVector> {
        let mu = self.mu.coords();
        (0..n)
            .map(|_| {
                let r = self.table.sample(rng);
                point_at_radius(mu, r, rng)
            })
            .collect()
    }
}

/// Exact SL sampler by radial decomposition.
pub fn sample_radial_oracle<R: Rng + ?Sized>(
    params: &SLParams,
    n: usize,
    rng: &mut R,
) -> Vec<UnitVector> {
    OracleSampler::new(params).sample(n, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Rejection,
    Mh,
    Oracle,
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(Self::Rejection),
            "mh" => Ok(Self::Mh),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampler {other:?}"
            ))),
        }
    }
}

/// Dispatches to one of the three samplers. The oracle reports every draw as
/// accepted.
pub fn sample<R: Rng + ?Sized>(
    params: &SLParams,
    n: usize,
    method: SamplerMethod,
    mh: &MhOptions,
    rng: &mut R,
) -> Result<(Vec<UnitVector>, SamplerReport)> {
    match method {
        SamplerMethod::Rejection => sample_rejection(params, n, rng),
        SamplerMethod::Mh => sample_mh(params, n, mh, rng),
        SamplerMethod::Oracle => {
            let pts = sample_radial_oracle(params, n, rng);
            Ok((pts, SamplerReport::new(n as u64, n as u64)))
        }
    }
}
