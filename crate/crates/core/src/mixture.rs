//! Finite mixtures of SL distributions fitted by EM.
//!
//! The E-step computes posteriors `γ_nk ∝ π_k f(x_n | μ_k, σ_k)` in log space.
//! The M-step sets `π_k` to the mean posterior mass, `μ_k` to the
//! `γ_·k`-weighted Fréchet median and `σ_k` by the scale solver applied to
//! the weighted mean distance `S_k`. A homogeneous model pools the mean
//! distance over all components and shares one scale.
//!
//! Hard and stochastic variants replace each posterior row by a one-hot row,
//! either at the row maximum or drawn from the row, before the M-step.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{self, check_sigma, SLParams};
use crate::error::{Error, Result};
use crate::kmeans::{self, DEFAULT_RESTARTS};
use crate::mle::{self, check_same_dim, ScaleSolver, WeightedSample};
use crate::sampler::RngState;
use crate::sphere::{self, UnitVector};

/// Column mass below which a component is treated as empty.
pub const EMPTY_MASS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureDoc", into = "MixtureDoc")]
pub struct SLMixture {
    weights: Vec<f64>,
    locations: Vec<UnitVector>,
    scales: Vec<f64>,
    homogeneous: bool,
}

#[derive(Serialize, Deserialize)]
struct MixtureDoc {
    #[serde(rename = "K")]
    k: usize,
    homogeneous: bool,
    weights: Vec<f64>,
    locations: Vec<UnitVector>,
    scales: Vec<f64>,
}

impl TryFrom<MixtureDoc> for SLMixture {
    type Error = Error;

    fn try_from(doc: MixtureDoc) -> Result<Self> {
        if doc.k != doc.weights.len() {
            return Err(Error::LengthMismatch(doc.k, doc.weights.len()));
        }
        SLMixture::new(doc.weights, doc.locations, doc.scales, doc.homogeneous)
    }
}

impl From<SLMixture> for MixtureDoc {
    fn from(m: SLMixture) -> Self {
        MixtureDoc {
            k: m.weights.len(),
            homogeneous: m.homogeneous,
            weights: m.weights,
            locations: m.locations,
            scales: m.scales,
        }
    }
}

impl SLMixture {
    pub fn new(
        weights: Vec<f64>,
        locations: Vec<UnitVector>,
        scales: Vec<f64>,
        homogeneous: bool,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidParameter(
                "a mixture needs at least one component".into(),
            ));
        }
        if locations.len() != k {
            return Err(Error::LengthMismatch(k, locations.len()));
        }
        if scales.len() != k {
            return Err(Error::LengthMismatch(k, scales.len()));
        }
        check_same_dim(&locations)?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "mixture weights must be non-negative".into(),
            ));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "mixture weights must sum to 1".into(),
            ));
        }
        for &s in &scales {
            check_sigma(s)?;
        }
        if homogeneous && scales.iter().any(|&s| s != scales[0]) {
            return Err(Error::InvalidParameter(
                "homogeneous mixture needs equal scales".into(),
            ));
        }
        Ok(Self {
            weights,
            locations,
            scales,
            homogeneous,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Intrinsic dimension `p`.
    pub fn dim(&self) -> usize {
        self.locations[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[UnitVector] {
        &self.locations
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn component(&self, k: usize) -> SLParams {
        SLParams {
            mu: self.locations[k].clone(),
            sigma: self.scales[k],
        }
    }

    /// Incomplete-data log-likelihood `Σ_n log Σ_k π_k f(x_n | μ_k, σ_k)`.
    pub fn log_likelihood(&self, data: &[UnitVector]) -> Result<f64> {
        e_step_with_log_likelihood(data, self).map(|(_, ll)| ll)
    }
}

/// Row-major `N × K` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl MembershipMatrix {
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidMembership("no columns".into()));
        }
        if data.len() != n * k {
            return Err(Error::LengthMismatch(n * k, data.len()));
        }
        let m = Self { n, k, data };
        for i in 0..n {
            let row = m.row(i);
            if row.iter().any(|g| !(0.0..=1.0).contains(g)) {
                return Err(Error::InvalidMembership(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidMembership(format!(
                    "row {i} does not sum to 1"
                )));
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidMembership("ragged rows".into()));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    /// One-hot matrix with `labels[n]` as the hot column.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        let mut data = vec![0.0; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidMembership(format!(
                    "label {l} out of range for K = {k}"
                )));
            }
            data[i * k + l] = 1.0;
        }
        Self::new(labels.len(), k, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.k + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_mass(&self, k: usize) -> f64 {
        self.rows().map(|r| r[k]).sum()
    }

    pub fn is_one_hot(&self) -> bool {
        self.rows().all(|r| {
            r.iter().filter(|&&g| g == 1.0).count() == 1 && r.iter().all(|&g| g == 0.0 || g == 1.0)
        })
    }

    /// Frobenius norm of `self − other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.k), (other.n, other.k));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Row argmax, lowest index on ties.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &g) in row.iter().enumerate() {
        if g > row[best] {
            best = k;
        }
    }
    best
}

pub fn predict_labels(gamma: &MembershipMatrix) -> Vec<usize> {
    gamma.rows().map(argmax).collect()
}

/// Posterior membership of each point.
pub fn e_step(data: &[UnitVector], model: &SLMixture) -> Result<MembershipMatrix> {
    e_step_with_log_likelihood(data, model).map(|(g, _)| g)
}

/// E-step together with the incomplete-data log-likelihood of `model`.
pub fn e_step_with_log_likelihood(
    data: &[UnitVector],
    model: &SLMixture,
) -> Result<(MembershipMatrix, f64)> {
    let k = model.k();
    let ambient = model.locations[0].ambient_dim();
    let mut log_norm = Vec::with_capacity(k);
    for j in 0..k {
        log_norm.push(density::log_normalizing_constant(
            model.dim(),
            model.scales[j],
        )?);
    }
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    let mut gamma = vec![0.0; data.len() * k];
    let mut ll = 0.0;
    let mut row = vec![0.0; k];
    for (i, x) in data.iter().enumerate() {
        if x.ambient_dim() != ambient {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                found: x.ambient_dim(),
            });
        }
        for j in 0..k {
            let d = sphere::distance(x.coords(), model.locations[j].coords());
            row[j] = log_w[j] - d / model.scales[j] - log_norm[j];
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        if !(max.is_finite() && sum.is_finite() && sum > 0.0) {
            return Err(Error::NumericalUnderflow(i));
        }
        ll += max + sum.ln();
        for j in 0..k {
            gamma[i * k + j] = (row[j] - max).exp() / sum;
        }
    }
    Ok((
        MembershipMatrix {
            n: data.len(),
            k,
            data: gamma,
        },
        ll,
    ))
}

/// One-hot at the row maximum, lowest index on ties.
pub fn apply_hard(gamma: &MembershipMatrix) -> MembershipMatrix {
    let labels = predict_labels(gamma);
    one_hot(&labels, gamma.k)
}

/// One-hot at a component drawn from each row.
pub fn apply_stochastic<R: Rng + ?Sized>(
    gamma: &MembershipMatrix,
    rng: &mut R,
) -> MembershipMatrix {
    let labels: Vec<usize> = gamma
        .rows()
        .map(|row| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (k, &g) in row.iter().enumerate() {
                if g > 0.0 {
                    last = k;
                    acc += g;
                    if u < acc {
                        return k;
                    }
                }
            }
            last
        })
        .collect();
    one_hot(&labels, gamma.k)
}

fn one_hot(labels: &[usize], k: usize) -> MembershipMatrix {
    let mut data = vec![0.0; labels.len() * k];
    for (i, &l) in labels.iter().enumerate() {
        data[i * k + l] = 1.0;
    }
    MembershipMatrix {
        n: labels.len(),
        k,
        data,
    }
}

/// Solver settings shared by every M-step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub scale_solver: ScaleSolver,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps: mle::DEFAULT_EPS,
            max_iter: mle::DEFAULT_MAX_ITER,
            scale_solver: ScaleSolver::NewtonExact,
        }
    }
}

/// Outcome of an M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub model: SLMixture,
    /// Components kept at their previous parameters because they had no mass.
    pub frozen: Vec<bool>,
    /// Components whose weighted mean distance was zero, so the scale was
    /// carried over instead of solved for.
    pub degenerate_scale: Vec<bool>,
}

/// M-step. `previous` supplies the parameters of empty or degenerate
/// components; when it is `None` an empty component is an error.
///
/// A new location is only accepted when it does not increase the weighted
/// distance sum compared to the previous location, so every M-step increases
/// the expected complete-data log-likelihood.
pub fn m_step(
    data: &[UnitVector],
    gamma: &MembershipMatrix,
    homogeneous: bool,
    solver: &SolverOptions,
    previous: Option<&SLMixture>,
) -> Result<MStep> {
    let n = data.len();
    let k = gamma.n_cols();
    if gamma.n_rows() != n {
        return Err(Error::LengthMismatch(n, gamma.n_rows()));
    }
    if n == 0 {
        return Err(Error::TooFewPoints {
            needed: 1,
            found: 0,
        });
    }
    check_same_dim(data)?;
    if let Some(prev) = previous {
        if prev.k() != k {
            return Err(Error::LengthMismatch(k, prev.k()));
        }
    }
    let p = data[0].dim();
    let mass: Vec<f64> = (0..k).map(|j| gamma.column_mass(j)).collect();

    // Locations and weighted distance sums, one independent task per component.
    let located: Vec<Result<Option<(UnitVector, f64)>>> = (0..k)
        .into_par_iter()
        .map(|j| {
            if mass[j] < EMPTY_MASS {
                return Ok(None);
            }
            let weights: Vec<f64> = gamma.rows().map(|r| r[j]).collect();
            let sample = WeightedSample::new(data.to_vec(), weights)?;
            let med = mle::frechet_median(&sample, solver.eps, solver.max_iter)?;
            let mut best = (med.mu_hat, med.objective);
            if let Some(prev) = previous {
                let f_prev = sample.objective(prev.locations[j].coords());
                if f_prev < best.1 {
                    best = (prev.locations[j].clone(), f_prev);
                }
            }
            // objective uses normalized weights; rescale to Σ_n γ_nk d_nk
            Ok(Some((best.0, best.1 * mass[j])))
        })
        .collect();

    let mut frozen = vec![false; k];
    let mut locations = Vec::with_capacity(k);
    let mut dist_sums = vec![0.0; k];
    for (j, r) in located.into_iter().enumerate() {
        match r? {
            Some((mu, f)) => {
                locations.push(mu);
                dist_sums[j] = f;
            }
            None => {
                let prev = previous.ok_or(Error::EmptyComponent(j))?;
                log::warn!("component {j} has no mass; keeping its previous parameters");
                frozen[j] = true;
                locations.push(prev.locations[j].clone());
            }
        }
    }

    let mut weights: Vec<f64> = mass.iter().map(|m| m / n as f64).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut degenerate_scale = vec![false; k];
    let scales = if homogeneous {
        let active_mass: f64 = (0..k).filter(|&j| !frozen[j]).map(|j| mass[j]).sum();
        let s = dist_sums.iter().sum::<f64>() / active_mass;
        let fallback = previous.map(|m| m.scales[0]);
        let sigma = solve_scale(s, p, solver, fallback, data)?;
        if sigma.1 {
            degenerate_scale.iter_mut().for_each(|d| *d = true);
        }
        vec![sigma.0; k]
    } else {
        let mut scales = Vec::with_capacity(k);
        for j in 0..k {
            if frozen[j] {
                scales.push(previous.unwrap().scales[j]);
                continue;
            }
            let s = dist_sums[j] / mass[j];
            let fallback = previous.map(|m| m.scales[j]);
            let (sigma, degenerate) = solve_scale(s, p, solver, fallback, data)?;
            degenerate_scale[j] = degenerate;
            scales.push(sigma);
        }
        scales
    };

    Ok(MStep {
        model: SLMixture::new(weights, locations, scales, homogeneous)?,
        frozen,
        degenerate_scale,
    })
}

/// Scale for mean distance `s`. A zero mean distance (all mass on one point)
/// has no finite maximizer; the fallback scale is used and flagged instead,
/// or, without one, the scale fitted to the whole data set.
fn solve_scale(
    s: f64,
    p: usize,
    solver: &SolverOptions,
    fallback: Option<f64>,
    data: &[UnitVector],
) -> Result<(f64, bool)> {
    if s > 1e-12 {
        let r = mle::estimate_sigma(
            s.min(std::f64::consts::PI * (1.0 - 1e-12)),
            p,
            solver.scale_solver,
            solver.eps,
            solver.max_iter,
        )?;
        return Ok((r.sigma_hat, false));
    }
    let sigma = match fallback {
        Some(f) => f,
        None => {
            let opts = mle::MleOptions {
                eps: solver.eps,
                max_iter: solver.max_iter,
                solver: solver.scale_solver,
            };
            mle::fit_mle_with(data, &opts)?.params.sigma
        }
    };
    log::warn!("component with zero dispersion; using scale {sigma}");
    Ok((sigma, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    #[default]
    Soft,
    Hard,
    Stochastic,
}

impl std::str::FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            "stochastic" => Ok(Self::Stochastic),
            other => Err(Error::InvalidParameter(format!(
                "unknown assignment {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EMOptions {
    pub assignment: Assignment,
    pub homogeneous: bool,
    /// Threshold on the Frobenius norm of successive membership matrices.
    pub eps_gamma: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for EMOptions {
    fn default() -> Self {
        Self {
            assignment: Assignment::Soft,
            homogeneous: false,
            eps_gamma: 1e-6,
            max_iter: 200,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EMFit {
    pub model: SLMixture,
    /// Posterior membership under `model`.
    pub membership: MembershipMatrix,
    /// Incomplete-data log-likelihood of every model visited, starting with
    /// the initial one.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Components that were frozen at some iteration for lack of mass.
    pub frozen: Vec<bool>,
}

impl EMFit {
    pub fn labels(&self) -> Vec<usize> {
        predict_labels(&self.membership)
    }
}

/// Hard k-means partition of the ambient coordinates, best of ten restarts.
pub fn init_kmeans<R: Rng + ?Sized>(
    data: &[UnitVector],
    k: usize,
    rng: &mut R,
) -> Result<MembershipMatrix> {
    let refs: Vec<&[f64]> = data.iter().map(|x| x.coords()).collect();
    let r = kmeans::kmeans(&refs, k, DEFAULT_RESTARTS, rng)?;
    Ok(one_hot(&r.labels, k))
}

/// EM from a k-means initialization seeded with `options.seed`.
pub fn fit_em(data: &[UnitVector], k: usize, options: &EMOptions) -> Result<EMFit> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "number of clusters must be >= 1".into(),
        ));
    }
    if k > data.len() {
        return Err(Error::TooManyClusters { k, n: data.len() });
    }
    let mut rng = RngState::new(options.seed);
    let init = init_kmeans(data, k, &mut rng)?;
    run_em(data, init, options, &mut rng)
}

/// EM from a given initial membership. The initial parameters come from one
/// M-step on `init`.
pub fn fit_em_with_init(
    data: &[UnitVector],
    init: MembershipMatrix,
    options: &EMOptions,
) -> Result<EMFit> {
    let mut rng = RngState::new(options.seed);
    run_em(data, init, options, &mut rng)
}

fn run_em(
    data: &[UnitVector],
    init: MembershipMatrix,
    options: &EMOptions,
    rng: &mut RngState,
) -> Result<EMFit> {
    if !(options.eps_gamma > 0.0) {
        return Err(Error::InvalidParameter("eps_gamma must be positive".into()));
    }
    if init.n_rows() != data.len() {
        return Err(Error::LengthMismatch(data.len(), init.n_rows()));
    }
    if init.n_cols() > data.len() {
        return Err(Error::TooManyClusters {
            k: init.n_cols(),
            n: data.len(),
        });
    }
    let first = m_step(data, &init, options.homogeneous, &options.solver, None)?;
    let mut model = first.model;
    let mut frozen = first.frozen;
    let mut previous = init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (gamma, ll) = e_step_with_log_likelihood(data, &model)?;
        trace.push(ll);
        let used = match options.assignment {
            Assignment::Soft => gamma.clone(),
            Assignment::Hard => apply_hard(&gamma),
            Assignment::Stochastic => apply_stochastic(&gamma, rng),
        };
        let delta = used.distance(&previous);
        if delta < options.eps_gamma {
            converged = true;
        }
        if converged || iterations >= options.max_iter {
            return Ok(EMFit {
                model,
                membership: gamma,
                trace,
                iterations,
                converged,
                frozen,
            });
        }
        let step = m_step(
            data,
            &used,
            options.homogeneous,
            &options.solver,
            Some(&model),
        )?;
        frozen
            .iter_mut()
            .zip(&step.frozen)
            .for_each(|(f, s)| *f |= s);
        model = step.model;
        previous = used;
        iterations += 1;
    }
}
