use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sl::mixture::{fit_em as em, Assignment, EMOptions, SolverOptions};
use sl::mle::{fit_mle_with, FdStep, MleOptions, ScaleSolver};
use sl::sampler::{self, MhOptions, RngState, SamplerMethod};
use sl::{SLParams, UnitVector};

fn err(e: sl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn unit(coords: Vec<f64>) -> PyResult<UnitVector> {
    UnitVector::new(coords).map_err(err)
}

fn units(points: Vec<Vec<f64>>) -> PyResult<Vec<UnitVector>> {
    points.into_iter().map(unit).collect()
}

fn solver(name: &str) -> PyResult<ScaleSolver> {
    match name {
        "exact" => Ok(ScaleSolver::NewtonExact),
        "approx" => Ok(ScaleSolver::NewtonApprox(FdStep::default())),
        other => Err(PyValueError::new_err(format!("unknown solver {other:?}"))),
    }
}

fn coords(points: &[UnitVector]) -> Vec<Vec<f64>> {
    points.iter().map(|x| x.coords().to_vec()).collect()
}

#[pyfunction]
fn log_normalizing_constant(p: usize, sigma: f64) -> PyResult<f64> {
    sl::log_normalizing_constant(p, sigma).map_err(err)
}

#[pyfunction]
fn log_density(x: Vec<f64>, mu: Vec<f64>, sigma: f64) -> PyResult<f64> {
    let params = SLParams::new(unit(mu)?, sigma).map_err(err)?;
    sl::log_density(&unit(x)?, &params).map_err(err)
}

#[pyfunction]
fn geodesic_distance(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    sl::geodesic_distance(&unit(x)?, &unit(y)?).map_err(err)
}

/// Returns `(points, report)`; `method` is rejection, mh or oracle.
#[pyfunction]
#[pyo3(signature = (mu, sigma, n, method = "rejection", seed = 0, burn_in = 1000, thinning = 1))]
#[allow(clippy::too_many_arguments)]
fn sample<'py>(
    py: Python<'py>,
    mu: Vec<f64>,
    sigma: f64,
    n: usize,
    method: &str,
    seed: u64,
    burn_in: usize,
    thinning: usize,
) -> PyResult<(Vec<Vec<f64>>, Bound<'py, PyDict>)> {
    let params = SLParams::new(unit(mu)?, sigma).map_err(err)?;
    let method: SamplerMethod = method.parse().map_err(err)?;
    let mh = MhOptions {
        burn_in,
        thinning,
        ..Default::default()
    };
    let (pts, rep) = py
        .detach(|| sampler::sample(&params, n, method, &mh, &mut RngState::new(seed)))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n_accepted", rep.n_accepted)?;
    d.set_item("n_proposed", rep.n_proposed)?;
    d.set_item("acceptance_rate", rep.acceptance_rate)?;
    Ok((coords(&pts), d))
}

#[pyfunction]
#[pyo3(signature = (points, eps = 1e-8, max_iter = 500, solver = "exact"))]
fn fit_mle<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    eps: f64,
    max_iter: usize,
    solver: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let pts = units(points)?;
    let opts = MleOptions {
        eps,
        max_iter,
        solver: self::solver(solver)?,
    };
    let fit = py.detach(|| fit_mle_with(&pts, &opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mu_hat", fit.params.mu.coords().to_vec())?;
    d.set_item("sigma_hat", fit.params.sigma)?;
    d.set_item("log_likelihood", fit.log_likelihood)?;
    d.set_item("mean_distance", fit.mean_distance)?;
    d.set_item("location_converged", fit.median.converged)?;
    d.set_item("scale_converged", fit.scale.converged)?;
    d.set_item("in_quarter_ball", fit.in_quarter_ball)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (points, k, assignment = "soft", homogeneous = false, seed = 0, eps_gamma = 1e-6, max_iter = 200, solver = "exact"))]
#[allow(clippy::too_many_arguments)]
fn fit_em<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    k: usize,
    assignment: &str,
    homogeneous: bool,
    seed: u64,
    eps_gamma: f64,
    max_iter: usize,
    solver: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let pts = units(points)?;
    let opts = EMOptions {
        assignment: assignment.parse::<Assignment>().map_err(err)?,
        homogeneous,
        eps_gamma,
        max_iter,
        seed,
        solver: SolverOptions {
            scale_solver: self::solver(solver)?,
            ..Default::default()
        },
    };
    let fit = py.detach(|| em(&pts, k, &opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("weights", fit.model.weights().to_vec())?;
    d.set_item("locations", coords(fit.model.locations()))?;
    d.set_item("scales", fit.model.scales().to_vec())?;
    d.set_item("labels", fit.labels())?;
    d.set_item("log_likelihood", fit.trace.clone())?;
    d.set_item("iterations", fit.iterations)?;
    d.set_item("converged", fit.converged)?;
    Ok(d)
}

#[pyfunction]
fn jaccard_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    sl::jaccard_index(&a, &b).map_err(err)
}

#[pyfunction]
fn rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    sl::rand_index(&a, &b).map_err(err)
}

#[pyfunction]
fn nmi(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    sl::nmi(&a, &b).map_err(err)
}

#[pymodule]
fn sphlaplace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(log_normalizing_constant, m)?)?;
    m.add_function(wrap_pyfunction!(log_density, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit_em, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_index, m)?)?;
    m.add_function(wrap_pyfunction!(rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    Ok(())
}
