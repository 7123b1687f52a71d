//! Simulation and benchmark drivers shared by the command-line tool and the
//! test suites.
//!
//! Every driver is deterministic given its base seed. Repeat `r` uses the
//! seed `base ^ r`, so repeats can run in parallel without changing results.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SLParams;
use crate::error::{Error, Result};
use crate::io::CompositionalRecord;
use crate::metrics::{cluster_indices, ClusterIndices};
use crate::mixture::{fit_em, Assignment, EMOptions};
use crate::mle::{self, FdStep, ScaleSolver, WeightedSample};
use crate::sampler::{OracleSampler, RngState, SnProposal};
use crate::sphere::{self, UnitVector};

pub fn repeat_seed(base: u64, repeat: usize) -> u64 {
    base ^ repeat as u64
}

/// Writes serializable rows as CSV with a header.
pub fn write_table<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn method_name(assignment: Assignment) -> &'static str {
    match assignment {
        Assignment::Soft => "moSL-soft",
        Assignment::Hard => "moSL-hard",
        Assignment::Stochastic => "moSL-stochastic",
    }
}

/// Mean clustering indices of one method at one `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub jaccard: f64,
    pub rand: f64,
    pub nmi: f64,
    /// Fraction of repeats where all three indices equal 1.
    pub perfect_fraction: f64,
}

/// Clustering indices of a single repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRun {
    pub repeat: usize,
    pub seed: u64,
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub jaccard: f64,
    pub rand: f64,
    pub nmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub table: Vec<IndexRow>,
    pub runs: Vec<IndexRun>,
}

fn summarize(runs: &[IndexRun], ks: &[usize], assignments: &[Assignment]) -> Vec<IndexRow> {
    let mut table = Vec::new();
    for &a in assignments {
        for &k in ks {
            let sel: Vec<&IndexRun> = runs
                .iter()
                .filter(|r| r.k == k && r.method == method_name(a))
                .collect();
            let m = sel.len() as f64;
            let mean = |f: fn(&IndexRun) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / m;
            table.push(IndexRow {
                method: method_name(a).into(),
                k,
                jaccard: mean(|r| r.jaccard),
                rand: mean(|r| r.rand),
                nmi: mean(|r| r.nmi),
                perfect_fraction: sel
                    .iter()
                    .filter(|r| r.jaccard == 1.0 && r.rand == 1.0 && r.nmi == 1.0)
                    .count() as f64
                    / m,
            });
        }
    }
    table
}

/// Clusters `data` at every `(assignment, K)` and scores against `truth`.
fn cluster_all(
    data: &[UnitVector],
    truth: &[usize],
    ks: &[usize],
    assignments: &[Assignment],
    em: &EMOptions,
    repeat: usize,
    seed: u64,
) -> Result<Vec<IndexRun>> {
    let mut out = Vec::new();
    for &a in assignments {
        for &k in ks {
            let opts = EMOptions {
                assignment: a,
                seed,
                ..*em
            };
            let fit = fit_em(data, k, &opts)?;
            let ClusterIndices { jaccard, rand, nmi } = cluster_indices(truth, &fit.labels())?;
            out.push(IndexRun {
                repeat,
                seed,
                method: method_name(a).into(),
                k,
                jaccard,
                rand,
                nmi,
            });
        }
    }
    Ok(out)
}

/// Locations and concentrations of the two spherical-normal components of the
/// small-mix simulation on the circle.
pub const SMALLMIX_COMPONENTS: [([f64; 2], f64); 2] =
    [([-0.251, -0.968], 10.0), ([0.399, 0.917], 2.0)];
pub const SMALLMIX_SIZE: usize = 200;

/// Draws the 200-point two-component spherical-normal mixture on `S¹`.
///
/// Class sizes are fixed at 100/100 unless `multinomial`, in which case each
/// label is an independent fair coin.
pub fn smallmix_data<R: Rng + ?Sized>(
    rng: &mut R,
    multinomial: bool,
) -> Result<(Vec<UnitVector>, Vec<usize>)> {
    let comps = SMALLMIX_COMPONENTS
        .iter()
        .map(|(mu, lambda)| SnProposal::new(UnitVector::new(mu.to_vec())?, *lambda))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = if multinomial {
        (0..SMALLMIX_SIZE)
            .map(|_| usize::from(rng.random::<bool>()))
            .collect()
    } else {
        (0..SMALLMIX_SIZE)
            .map(|i| usize::from(i >= SMALLMIX_SIZE / 2))
            .collect()
    };
    let points = labels.iter().map(|&l| comps[l].sample(rng)).collect();
    Ok((points, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallmixConfig {
    pub repeats: usize,
    pub ks: Vec<usize>,
    pub assignments: Vec<Assignment>,
    pub seed: u64,
    pub multinomial: bool,
    pub em: EMOptions,
}

impl Default for SmallmixConfig {
    fn default() -> Self {
        Self {
            repeats: 100,
            ks: vec![2, 3, 4],
            assignments: vec![Assignment::Soft, Assignment::Hard],
            seed: 0,
            multinomial: false,
            em: EMOptions::default(),
        }
    }
}

pub fn run_smallmix(config: &SmallmixConfig) -> Result<ClusteringReport> {
    let runs: Vec<Vec<IndexRun>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = repeat_seed(config.seed, r);
            let mut rng = RngState::new(seed);
            let (data, truth) = smallmix_data(&mut rng, config.multinomial)?;
            cluster_all(
                &data,
                &truth,
                &config.ks,
                &config.assignments,
                &config.em,
                r,
                seed,
            )
        })
        .collect::<Result<_>>()?;
    let runs: Vec<IndexRun> = runs.into_iter().flatten().collect();
    Ok(ClusteringReport {
        table: summarize(&runs, &config.ks, &config.assignments),
        runs,
    })
}

/// Fitted per-group scales used by the synthetic household stand-in.
pub const STANDIN_SCALES: [f64; 2] = [0.0643, 0.1426];
/// Category shares at the centres of the two stand-in groups.
pub const STANDIN_SHARES: [[f64; 3]; 2] = [[0.08, 0.12, 0.80], [0.65, 0.25, 0.10]];
pub const STANDIN_GROUPS: [&str; 2] = ["female", "male"];
pub const STANDIN_PER_GROUP: usize = 20;

/// Synthetic household records: two SL groups on `S²` whose squared
/// coordinates are scaled to expenditure-like totals.
pub fn household_standin<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<CompositionalRecord>> {
    let mut out = Vec::new();
    for g in 0..2 {
        let centre = UnitVector::new(STANDIN_SHARES[g].iter().map(|s| s.sqrt()).collect())?;
        let params = SLParams::new(centre, STANDIN_SCALES[g])?;
        for x in OracleSampler::new(&params).sample(STANDIN_PER_GROUP, rng) {
            let total = 1000.0 * (1.0 + rng.random::<f64>());
            out.push(CompositionalRecord {
                id: format!("{}{}", &STANDIN_GROUPS[g][..1], out.len() + 1),
                values: x.coords().iter().map(|c| total * c * c).collect(),
                group: Some(STANDIN_GROUPS[g].into()),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdConfig {
    /// Number of seeded EM initializations per `(method, K)`.
    pub repeats: usize,
    pub ks: Vec<usize>,
    pub assignments: Vec<Assignment>,
    pub seed: u64,
    pub em: EMOptions,
}

impl Default for HouseholdConfig {
    fn default() -> Self {
        Self {
            repeats: 20,
            ks: vec![2, 3, 4],
            assignments: vec![Assignment::Soft, Assignment::Hard],
            seed: 0,
            em: EMOptions::default(),
        }
    }
}

/// Square-root transformed records and their group labels.
pub fn household_points(
    records: &[CompositionalRecord],
) -> Result<(Vec<UnitVector>, Vec<usize>, Vec<String>)> {
    let points = records
        .iter()
        .map(CompositionalRecord::to_sphere)
        .collect::<Result<Vec<_>>>()?;
    let (labels, names) = crate::io::group_labels(records);
    Ok((points, labels, names))
}

pub fn run_household(
    points: &[UnitVector],
    truth: &[usize],
    config: &HouseholdConfig,
) -> Result<ClusteringReport> {
    if points.len() != truth.len() {
        return Err(Error::LengthMismatch(points.len(), truth.len()));
    }
    let runs: Vec<Vec<IndexRun>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = repeat_seed(config.seed, r);
            cluster_all(
                points,
                truth,
                &config.ks,
                &config.assignments,
                &config.em,
                r,
                seed,
            )
        })
        .collect::<Result<_>>()?;
    let runs: Vec<IndexRun> = runs.into_iter().flatten().collect();
    Ok(ClusteringReport {
        table: summarize(&runs, &config.ks, &config.assignments),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub ps: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub ns: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub eps: f64,
    pub max_iter: usize,
    pub fd_step: FdStep,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ps: vec![5, 10, 20],
            sigmas: vec![0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0],
            ns: vec![50, 100, 250, 500],
            repeats: 100,
            seed: 0,
            eps: mle::DEFAULT_EPS,
            max_iter: mle::DEFAULT_MAX_ITER,
            fd_step: FdStep::default(),
        }
    }
}

impl BenchConfig {
    fn cells(&self) -> Vec<(usize, f64, usize)> {
        let mut cells = Vec::new();
        for &p in &self.ps {
            for &s in &self.sigmas {
                for &n in &self.ns {
                    cells.push((p, s, n));
                }
            }
        }
        cells
    }
}

/// Mean geodesic error of the Weiszfeld location estimate. The gradient
/// descent baseline columns are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRow {
    pub p: usize,
    pub sigma0: f64,
    pub n: usize,
    pub weiszfeld_error: f64,
    pub weiszfeld_time_ms: f64,
    pub rgd_error: Option<f64>,
    pub rgd_time_ms: Option<f64>,
}

/// Mean relative scale error of both Newton variants. Baseline optimizer
/// columns are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub p: usize,
    pub sigma0: f64,
    pub n: usize,
    pub newton_exact_error: f64,
    pub newton_exact_time_ms: f64,
    pub newton_approx_error: f64,
    pub newton_approx_time_ms: f64,
    /// Largest relative difference between the two Newton estimates.
    pub max_solver_rel_diff: f64,
    pub roptim_error: Option<f64>,
    pub roptim_time_ms: Option<f64>,
    pub de_error: Option<f64>,
    pub de_time_ms: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn bench_location(config: &BenchConfig) -> Result<Vec<LocationRow>> {
    let mut rows = Vec::new();
    for (p, sigma0, n) in config.cells() {
        let mu0 = UnitVector::basis(p, 0);
        let sampler = OracleSampler::new(&SLParams::new(mu0.clone(), sigma0)?);
        let res: Vec<(f64, f64)> = (0..config.repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngState::new(repeat_seed(config.seed, r));
                let pts = sampler.sample(n, &mut rng);
                let t = Instant::now();
                let med = mle::frechet_median(
                    &WeightedSample::uniform(pts)?,
                    config.eps,
                    config.max_iter,
                )?;
                let ms = elapsed_ms(t);
                Ok((sphere::distance(med.mu_hat.coords(), mu0.coords()), ms))
            })
            .collect::<Result<_>>()?;
        rows.push(LocationRow {
            p,
            sigma0,
            n,
            weiszfeld_error: mean(res.iter().map(|r| r.0)),
            weiszfeld_time_ms: mean(res.iter().map(|r| r.1)),
            rgd_error: None,
            rgd_time_ms: None,
        });
    }
    Ok(rows)
}

pub fn bench_scale(config: &BenchConfig) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::new();
    for (p, sigma0, n) in config.cells() {
        let mu0 = UnitVector::basis(p, 0);
        let sampler = OracleSampler::new(&SLParams::new(mu0, sigma0)?);
        let res: Vec<[f64; 5]> = (0..config.repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngState::new(repeat_seed(config.seed, r));
                let pts = sampler.sample(n, &mut rng);
                let med = mle::frechet_median(
                    &WeightedSample::uniform(pts.clone())?,
                    config.eps,
                    config.max_iter,
                )?;
                let s = pts
                    .iter()
                    .map(|x| sphere::distance(x.coords(), med.mu_hat.coords()))
                    .sum::<f64>()
                    / n as f64;
                let t = Instant::now();
                let e = mle::estimate_sigma(
                    s,
                    p,
                    ScaleSolver::NewtonExact,
                    config.eps,
                    config.max_iter,
                )?;
                let te = elapsed_ms(t);
                let t = Instant::now();
                let a = mle::estimate_sigma(
                    s,
                    p,
                    ScaleSolver::NewtonApprox(config.fd_step),
                    config.eps,
                    config.max_iter,
                )?;
                let ta = elapsed_ms(t);
                Ok([
                    (e.sigma_hat - sigma0).abs() / sigma0,
                    te,
                    (a.sigma_hat - sigma0).abs() / sigma0,
                    ta,
                    (e.sigma_hat - a.sigma_hat).abs() / e.sigma_hat,
                ])
            })
            .collect::<Result<_>>()?;
        rows.push(ScaleRow {
            p,
            sigma0,
            n,
            newton_exact_error: mean(res.iter().map(|r| r[0])),
            newton_exact_time_ms: mean(res.iter().map(|r| r[1])),
            newton_approx_error: mean(res.iter().map(|r| r[2])),
            newton_approx_time_ms: mean(res.iter().map(|r| r[3])),
            max_solver_rel_diff: res.iter().map(|r| r[4]).fold(0.0, f64::max),
            roptim_error: None,
            roptim_time_ms: None,
            de_error: None,
            de_time_ms: None,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallmix_generator_shape() {
        let (pts, labels) = smallmix_data(&mut RngState::new(1), false).unwrap();
        assert_eq!(pts.len(), 200);
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 100);
        assert!(pts.iter().all(|x| x.ambient_dim() == 2));
        let (_, labels) = smallmix_data(&mut RngState::new(1), true).unwrap();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        assert!(ones > 50 && ones < 150);
    }

    #[test]
    fn standin_records_are_valid() {
        let recs = household_standin(&mut RngState::new(5)).unwrap();
        assert_eq!(recs.len(), 40);
        let (pts, labels, names) = household_points(&recs).unwrap();
        assert_eq!(names, vec!["female", "male"]);
        assert_eq!(labels.iter().sum::<usize>(), 20);
        assert!(pts
            .iter()
            .all(|x| (sphere::norm(x.coords()) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn drivers_are_deterministic() {
        let cfg = SmallmixConfig {
            repeats: 3,
            ks: vec![2],
            ..Default::default()
        };
        assert_eq!(run_smallmix(&cfg).unwrap(), run_smallmix(&cfg).unwrap());
        let cfg = BenchConfig {
            ps: vec![2],
            sigmas: vec![0.1],
            ns: vec![20],
            repeats: 4,
            ..Default::default()
        };
        let a = bench_location(&cfg).unwrap();
        let b = bench_location(&cfg).unwrap();
        assert_eq!(a[0].weiszfeld_error, b[0].weiszfeld_error);
        assert!(a[0].rgd_error.is_none());
        let s = bench_scale(&cfg).unwrap();
        assert!(s[0].max_solver_rel_diff < 1e-3);
    }

    #[test]
    fn table_leaves_baselines_empty() {
        let row = LocationRow {
            p: 5,
            sigma0: 0.1,
            n: 50,
            weiszfeld_error: 0.5,
            weiszfeld_time_ms: 1.0,
            rgd_error: None,
            rgd_time_ms: None,
        };
        let mut buf = Vec::new();
        write_table(&mut buf, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "p,sigma0,n,weiszfeld_error,weiszfeld_time_ms,rgd_error,rgd_time_ms\n5,0.1,50,0.5,1.0,,\n"
        );
    }
}
