mod output;

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sphlaplace::experiments::{
    bench_location, bench_scale, household_points, household_standin, run_household,
    run_smallmix, write_table, BenchConfig, HouseholdConfig, SmallmixConfig,
};
use sphlaplace::io::{
    read_compositional, read_points, write_compositional, write_points, CompositionalSchema,
};
use sphlaplace::metrics::cluster_indices;
use sphlaplace::mixture::{fit_em, Assignment, EMOptions, SolverOptions};
use sphlaplace::mle::{self, fit_mle_with, FdStep, MleOptions, ScaleSolver};
use sphlaplace::sampler::{self, MhOptions, RngState, SamplerMethod};
use sphlaplace::{SLParams, UnitVector};

use output::{emit_table, write_json, write_sidecar, Format, Meta};

#[derive(Parser)]
#[command(name = "sphlaplace", version, about = "Spherical Laplace sampling, fitting and clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw points from an SL distribution.
    Sample(SampleArgs),
    /// Maximum-likelihood fit of a single SL distribution.
    Fit(FitArgs),
    /// EM clustering with a mixture of SL distributions.
    Cluster(ClusterArgs),
    /// Two-component simulation on the circle, clustered at several K.
    Smallmix(SmallmixArgs),
    /// Clustering of three-category compositional data against a group column.
    Household(HouseholdArgs),
    /// Location estimation accuracy over a (p, sigma, n) grid.
    BenchLocation(BenchArgs),
    /// Scale estimation accuracy of both Newton variants over a grid.
    BenchScale(BenchArgs),
}

#[derive(Args, Clone, Serialize)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence tolerance (EM membership change for `cluster`).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output file (a directory for `cluster`). Defaults to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn eps(&self) -> f64 {
        self.eps.unwrap_or(mle::DEFAULT_EPS)
    }

    fn max_iter(&self) -> usize {
        self.max_iter.unwrap_or(mle::DEFAULT_MAX_ITER)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverChoice {
    Exact,
    Approx,
}

#[derive(Args, Clone, Serialize)]
struct SolverArgs {
    /// Scale solver: analytic Newton or finite-difference Newton.
    #[arg(long, value_enum, default_value_t = SolverChoice::Exact)]
    solver: SolverChoice,
    /// Finite-difference step, relative to the current scale.
    #[arg(long, default_value_t = 1e-5)]
    fd_step: f64,
    /// Use `--fd-step` as an absolute step.
    #[arg(long)]
    fd_absolute: bool,
}

impl SolverArgs {
    fn fd(&self) -> FdStep {
        if self.fd_absolute {
            FdStep::Absolute(self.fd_step)
        } else {
            FdStep::Relative(self.fd_step)
        }
    }

    fn scale_solver(&self) -> ScaleSolver {
        match self.solver {
            SolverChoice::Exact => ScaleSolver::NewtonExact,
            SolverChoice::Approx => ScaleSolver::NewtonApprox(self.fd()),
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Sphere dimension; inferred from `--mu` when omitted.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    sigma: f64,
    /// Location as comma-separated coordinates. Defaults to the first basis vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// rejection, mh or oracle.
    #[arg(long, default_value = "rejection")]
    method: SamplerMethod,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thinning: usize,
    /// MH step size; defaults to sigma.
    #[arg(long)]
    proposal_stddev: Option<f64>,
}

#[derive(Args, Clone, Serialize)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Point CSV with header x0,...,xp.
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Clone, Serialize)]
struct ClusterArgs {
    #[command(flatten)]
    common: Common,
    /// Point CSV; a trailing `label` column is used as ground truth.
    input: PathBuf,
    #[arg(long, short)]
    k: usize,
    /// soft, hard or stochastic.
    #[arg(long, default_value = "soft")]
    assignment: Assignment,
    /// Share one scale across components.
    #[arg(long)]
    homogeneous: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Clone, Serialize)]
struct EmGridArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "soft,hard")]
    assignments: Vec<Assignment>,
    #[arg(long)]
    homogeneous: bool,
    /// Per-repeat indices are written here as CSV.
    #[arg(long)]
    runs: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct SmallmixArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    /// Draw class sizes from a binomial instead of a fixed 100/100 split.
    #[arg(long)]
    multinomial: bool,
    #[command(flatten)]
    grid: EmGridArgs,
}

#[derive(Args, Clone, Serialize)]
struct HouseholdArgs {
    #[command(flatten)]
    common: Common,
    /// Compositional CSV with category and group columns.
    input: Option<PathBuf>,
    /// Use the synthetic two-group stand-in instead of an input file.
    #[arg(long, conflicts_with = "input")]
    standin: bool,
    /// Writes the stand-in records as CSV.
    #[arg(long, requires = "standin")]
    write_standin: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "food,housing,service")]
    categories: Vec<String>,
    #[arg(long, default_value = "gender")]
    group: String,
    /// Row identifier column.
    #[arg(long)]
    id: Option<String>,
    /// Seeded EM initializations per method and K.
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[command(flatten)]
    grid: EmGridArgs,
}

#[derive(Args, Clone, Serialize)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    ps: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.5,1,5,10")]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "50,100,250,500")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    /// Finite-difference step of NewtonA, relative to the current scale.
    #[arg(long, default_value_t = 1e-5)]
    fd_step: f64,
    #[arg(long)]
    fd_absolute: bool,
}

impl BenchArgs {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            ps: self.ps.clone(),
            sigmas: self.sigmas.clone(),
            ns: self.ns.clone(),
            repeats: self.repeats,
            seed: self.common.seed,
            eps: self.common.eps(),
            max_iter: self.common.max_iter(),
            fd_step: if self.fd_absolute {
                FdStep::Absolute(self.fd_step)
            } else {
                FdStep::Relative(self.fd_step)
            },
        }
    }
}

fn cmd_sample(mut a: SampleArgs) -> Result<()> {
    let mu = match &a.mu {
        Some(c) => {
            let mu = UnitVector::new(c.clone())?;
            if let Some(p) = a.p {
                ensure!(p == mu.dim(), "--p {p} does not match --mu with {} coordinates", c.len());
            }
            mu
        }
        None => UnitVector::basis(a.p.unwrap_or(2), 0),
    };
    a.p = Some(mu.dim());
    a.mu = Some(mu.coords().to_vec());
    let params = SLParams::new(mu, a.sigma)?;
    let mh = MhOptions {
        burn_in: a.burn_in,
        proposal_stddev: a.proposal_stddev,
        thinning: a.thinning,
    };
    let mut rng = RngState::new(a.common.seed);
    let (points, report) = sampler::sample(&params, a.n, a.method, &mh, &mut rng)?;
    let meta = Meta::new("sample", a.common.seed, &a)?.with_report(&report)?;
    let out = a.common.output.as_deref();
    match a.common.format {
        Format::Csv => {
            write_points(output::create(out)?, params.dim(), &points, None)?;
            write_sidecar(out, &meta)
        }
        Format::Json => {
            let coords: Vec<&[f64]> = points.iter().map(|x| x.coords()).collect();
            write_json(out, &json!({ "meta": meta, "points": coords }))
        }
    }
}

fn load_points(path: &Path) -> Result<sphlaplace::io::PointTable> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_points(f).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    mu_hat: Vec<f64>,
    sigma_hat: f64,
    log_likelihood: f64,
    mean_distance: f64,
    location_iterations: usize,
    scale_iterations: usize,
    location_converged: bool,
    scale_converged: bool,
    hit_data_point: bool,
    in_quarter_ball: bool,
    renormalized_rows: usize,
}

#[derive(Serialize)]
struct FieldValue {
    field: String,
    value: String,
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let table = load_points(&a.input)?;
    let opts = MleOptions {
        eps: a.common.eps(),
        max_iter: a.common.max_iter(),
        solver: a.solver.scale_solver(),
    };
    let fit = fit_mle_with(&table.points, &opts)?;
    let report = FitReport {
        n: table.points.len(),
        mu_hat: fit.params.mu.coords().to_vec(),
        sigma_hat: fit.params.sigma,
        log_likelihood: fit.log_likelihood,
        mean_distance: fit.mean_distance,
        location_iterations: fit.median.iterations,
        scale_iterations: fit.scale.iterations,
        location_converged: fit.median.converged,
        scale_converged: fit.scale.converged,
        hit_data_point: fit.median.hit_data_point,
        in_quarter_ball: fit.in_quarter_ball,
        renormalized_rows: table.renormalized,
    };
    let meta = Meta::new("fit", a.common.seed, &a)?;
    let out = a.common.output.as_deref();
    match a.common.format {
        Format::Json => write_json(out, &json!({ "meta": meta, "report": report })),
        Format::Csv => {
            let value = serde_json::to_value(&report)?;
            let mut rows = Vec::new();
            for (k, v) in value.as_object().into_iter().flatten() {
                match v.as_array() {
                    Some(arr) => rows.extend(arr.iter().enumerate().map(|(i, x)| FieldValue {
                        field: format!("{k}_{i}"),
                        value: x.to_string(),
                    })),
                    None => rows.push(FieldValue {
                        field: k.clone(),
                        value: v.to_string(),
                    }),
                }
            }
            write_table(output::create(out)?, &rows)?;
            write_sidecar(out, &meta)
        }
    }
}

#[derive(Serialize)]
struct ClusterReport {
    iterations: usize,
    converged: bool,
    log_likelihood: f64,
    frozen: Vec<bool>,
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let table = load_points(&a.input)?;
    let opts = EMOptions {
        assignment: a.assignment,
        homogeneous: a.homogeneous,
        eps_gamma: a.common.eps.unwrap_or(EMOptions::default().eps_gamma),
        max_iter: a.common.max_iter.unwrap_or(EMOptions::default().max_iter),
        seed: a.common.seed,
        solver: SolverOptions {
            scale_solver: a.solver.scale_solver(),
            ..Default::default()
        },
    };
    let fit = fit_em(&table.points, a.k, &opts)?;
    let labels = fit.labels();
    let indices = table
        .labels
        .as_deref()
        .map(|truth| cluster_indices(truth, &labels))
        .transpose()?;
    let report = ClusterReport {
        iterations: fit.iterations,
        converged: fit.converged,
        log_likelihood: *fit.trace.last().expect("trace holds the initial model"),
        frozen: fit.frozen.clone(),
    };
    let meta = Meta::new("cluster", a.common.seed, &a)?.with_report(&report)?;

    let Some(dir) = a.common.output.as_deref() else {
        return match a.common.format {
            Format::Json => write_json(
                None,
                &json!({ "meta": meta, "model": fit.model, "labels": labels, "indices": indices }),
            ),
            Format::Csv => write_labels(output::create(None)?, &labels),
        };
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    match a.common.format {
        Format::Csv => write_labels(output::create(Some(&dir.join("labels.csv")))?, &labels)?,
        Format::Json => write_json(Some(&dir.join("labels.json")), &labels)?,
    }
    write_json(Some(&dir.join("model.json")), &fit.model)?;
    if let Some(ix) = indices {
        write_json(Some(&dir.join("indices.json")), &ix)?;
    }
    write_json(Some(&dir.join("meta.json")), &meta)
}

#[derive(Serialize)]
struct LabelRow {
    label: usize,
}

fn write_labels(out: Box<dyn std::io::Write>, labels: &[usize]) -> Result<()> {
    let rows: Vec<LabelRow> = labels.iter().map(|&label| LabelRow { label }).collect();
    if rows.is_empty() {
        let mut out = out;
        writeln!(out, "label")?;
        return Ok(());
    }
    write_table(out, &rows)?;
    Ok(())
}

fn em_options(common: &Common, homogeneous: bool) -> EMOptions {
    let d = EMOptions::default();
    EMOptions {
        homogeneous,
        eps_gamma: common.eps.unwrap_or(d.eps_gamma),
        max_iter: common.max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

fn write_runs<T: Serialize>(path: Option<&Path>, runs: &[T]) -> Result<()> {
    if let Some(p) = path {
        write_table(output::create(Some(p))?, runs)?;
    }
    Ok(())
}

fn cmd_smallmix(a: SmallmixArgs) -> Result<()> {
    let config = SmallmixConfig {
        repeats: a.repeats,
        ks: a.grid.ks.clone(),
        assignments: a.grid.assignments.clone(),
        seed: a.common.seed,
        multinomial: a.multinomial,
        em: em_options(&a.common, a.grid.homogeneous),
    };
    let report = run_smallmix(&config)?;
    write_runs(a.grid.runs.as_deref(), &report.runs)?;
    let meta = Meta::new("smallmix", a.common.seed, &a)?;
    emit_table(&report.table, a.common.format, a.common.output.as_deref(), &meta)
}

fn cmd_household(a: HouseholdArgs) -> Result<()> {
    let schema = CompositionalSchema {
        categories: a.categories.clone(),
        group: Some(a.group.clone()),
        id: a.id.clone(),
    };
    let records = match (&a.input, a.standin) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            read_compositional(f, &schema).with_context(|| format!("reading {}", path.display()))?
        }
        (None, true) => {
            ensure!(
                a.categories.len() == 3,
                "the stand-in generates exactly three categories"
            );
            let recs = household_standin(&mut RngState::new(a.common.seed))?;
            if let Some(p) = &a.write_standin {
                write_compositional(output::create(Some(p))?, &schema, &recs)?;
            }
            recs
        }
        (None, false) => bail!("give an input CSV or pass --standin for synthetic data"),
    };
    let (points, truth, groups) = household_points(&records)?;
    let config = HouseholdConfig {
        repeats: a.repeats,
        ks: a.grid.ks.clone(),
        assignments: a.grid.assignments.clone(),
        seed: a.common.seed,
        em: em_options(&a.common, a.grid.homogeneous),
    };
    let report = run_household(&points, &truth, &config)?;
    write_runs(a.grid.runs.as_deref(), &report.runs)?;
    let meta = Meta::new("household", a.common.seed, &a)?
        .with_report(&json!({ "n": points.len(), "groups": groups }))?;
    emit_table(&report.table, a.common.format, a.common.output.as_deref(), &meta)
}

fn cmd_bench_location(a: BenchArgs) -> Result<()> {
    let rows = bench_location(&a.config())?;
    let meta = Meta::new("bench-location", a.common.seed, &a)?
        .with_report(&json!({ "estimator": "weiszfeld" }))?;
    emit_table(&rows, a.common.format, a.common.output.as_deref(), &meta)
}

fn cmd_bench_scale(a: BenchArgs) -> Result<()> {
    let config = a.config();
    let rows = bench_scale(&config)?;
    let meta = Meta::new("bench-scale", a.common.seed, &a)?.with_report(&json!({
        "solvers": { "NewtonE": ScaleSolver::NewtonExact, "NewtonA": ScaleSolver::NewtonApprox(config.fd_step) }
    }))?;
    emit_table(&rows, a.common.format, a.common.output.as_deref(), &meta)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Smallmix(a) => cmd_smallmix(a),
        Command::Household(a) => cmd_household(a),
        Command::BenchLocation(a) => cmd_bench_location(a),
        Command::BenchScale(a) => cmd_bench_scale(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
