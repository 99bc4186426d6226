//! Python module `kerr_ising`: model parameters, spectra, entanglement,
//! steady states, trajectory ensembles and their statistics.

use std::path::PathBuf;

use kerr_ising_core as core;
use kerr_ising_core::dynamics::{
    steady_state_with, EvolutionConfig, InitialState, Liouvillian, Sme, SteadyStateOptions,
};
use kerr_ising_core::entanglement::{log_negativity, log_negativity_pure, Bipartition};
use kerr_ising_core::hilbert::{embed, expectation, number, StateVector};
use kerr_ising_core::model::{self, IsingParams, SpinConfig};
use kerr_ising_core::stats::{self, Ensemble};
use kerr_ising_core::C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    use core::Error::*;
    match e {
        InvalidCutoff(_)
        | CutoffTooSmall { .. }
        | Shape(_)
        | InvalidArgument(_)
        | InvalidState(_)
        | EdgeList { .. }
        | TooManyModes(_)
        | NotHermitian(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Physical constants of identical cavities (hbar = 1).
#[pyclass(name = "ModelParams", skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n_modes, cutoff, chi, delta=0.0, epsilon=0.0, eta=0.0, gamma=0.0, nbar=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_modes: usize,
        cutoff: usize,
        chi: f64,
        delta: f64,
        epsilon: f64,
        eta: f64,
        gamma: f64,
        nbar: f64,
    ) -> PyResult<Self> {
        let inner = model::ModelParams::closed(n_modes, cutoff, chi, delta, epsilon, eta)
            .and_then(|p| p.with_damping(gamma, nbar))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }
    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon.re
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn nbar(&self) -> f64 {
        self.inner.nbar
    }
    /// Coherent amplitude sqrt(|epsilon| / chi).
    #[getter]
    fn alpha0(&self) -> f64 {
        self.inner.alpha0()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n_modes={}, dims={:?}, chi={}, delta={}, epsilon={}, eta={}, gamma={}, nbar={})",
            p.n_modes(),
            p.dims(),
            p.chi,
            p.delta,
            p.epsilon.re,
            p.eta,
            p.gamma,
            p.nbar
        )
    }
}

/// Symmetric coupling graph.
#[pyclass(name = "Adjacency", skip_from_py_object)]
#[derive(Clone)]
struct PyAdjacency {
    inner: model::AdjacencyMatrix,
}

#[pymethods]
impl PyAdjacency {
    #[staticmethod]
    fn pair() -> Self {
        Self {
            inner: model::AdjacencyMatrix::pair(),
        }
    }

    #[staticmethod]
    fn uncoupled(n: usize) -> Self {
        Self {
            inner: model::AdjacencyMatrix::uncoupled(n),
        }
    }

    /// Reads an `i j weight` edge list.
    #[staticmethod]
    #[pyo3(signature = (path, n_modes=None))]
    fn from_edge_list(path: PathBuf, n_modes: Option<usize>) -> PyResult<Self> {
        let inner = model::AdjacencyMatrix::from_edge_list_file(&path, n_modes).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        let m = self.inner.entries();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }
}

fn spins(v: Vec<i8>) -> PyResult<SpinConfig> {
    SpinConfig::new(v).map_err(to_py)
}

/// Lowest `k` eigenvalues of the closed network Hamiltonian.
#[pyfunction]
#[pyo3(signature = (p, s, k=8))]
fn spectrum(py: Python<'_>, p: &PyModelParams, s: &PyAdjacency, k: usize) -> PyResult<Vec<f64>> {
    let (p, s) = (p.inner.clone(), s.inner.clone());
    py.detach(move || {
        let h = model::network_hamiltonian_sparse(&p, &s)?;
        core::spectra::spectrum_sparse(&h, &p.dims(), k.min(h.dim())).map(|d| d.eigenvalues)
    })
    .map_err(to_py)
}

/// Logarithmic negativity of the lowest eigenvector across mode 0 | rest.
#[pyfunction]
fn ground_state_ln(py: Python<'_>, p: &PyModelParams, s: &PyAdjacency) -> PyResult<f64> {
    let (p, s) = (p.inner.clone(), s.inner.clone());
    py.detach(move || {
        let h = model::network_hamiltonian_sparse(&p, &s)?;
        let d = core::spectra::spectrum_sparse(&h, &p.dims(), 1)?;
        log_negativity_pure(&d.eigenvectors[0], &Bipartition::first_mode(p.n_modes())?)
    })
    .map_err(to_py)
}

/// Steady state summary: mean photon numbers, purity and log negativity.
#[pyfunction]
#[pyo3(signature = (p, s, tol=1e-8))]
fn steady_state<'py>(py: Python<'py>, p: &PyModelParams, s: &PyAdjacency, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let (p, s) = (p.inner.clone(), s.inner.clone());
    let (mean_n, purity, ln) = py
        .detach(move || -> core::Result<_> {
            let dims = p.dims();
            let h = model::network_hamiltonian_sparse(&p, &s)?;
            let l = Liouvillian::from_sparse(&h, &dims, &p)?;
            let opts = SteadyStateOptions {
                tol,
                ..Default::default()
            };
            let rho = steady_state_with(&l, &p, &opts)?;
            let mean_n = (0..dims.len())
                .map(|i| Ok(expectation(&rho, &embed(&number(dims[i])?, i, &dims)?)?.re))
                .collect::<core::Result<Vec<f64>>>()?;
            let ln = if dims.len() > 1 {
                log_negativity(&rho, &Bipartition::first_mode(dims.len())?)?
            } else {
                0.0
            };
            Ok((mean_n, rho.purity(), ln))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean_n", mean_n)?;
    d.set_item("purity", purity)?;
    d.set_item("log_negativity", ln)?;
    Ok(d)
}

/// Roots of the mean-field drift as `(alpha, stable)` with `alpha` a list
/// of complex amplitudes.
#[pyfunction]
fn fixed_points(p: &PyModelParams, s: &PyAdjacency) -> PyResult<Vec<(Vec<C64>, bool)>> {
    let report = model::fixed_points(&p.inner, &s.inner).map_err(to_py)?;
    Ok(report.roots.into_iter().map(|r| (r.alpha, r.stable)).collect())
}

/// First-order energy of the coherent spin configuration.
#[pyfunction]
fn perturbed_energy(sigma: Vec<i8>, p: &PyModelParams, s: &PyAdjacency) -> PyResult<f64> {
    model::perturbed_energy(&spins(sigma)?, &p.inner, &s.inner).map_err(to_py)
}

/// Classical Ising energy `-mu B sum(sigma) - J sigma^T S sigma`.
#[pyfunction]
#[pyo3(signature = (sigma, s, j=1.0, b=0.0, mu=1.0))]
fn ising_energy(sigma: Vec<i8>, s: &PyAdjacency, j: f64, b: f64, mu: f64) -> PyResult<f64> {
    model::ising_energy(&spins(sigma)?, &IsingParams { j, b, mu }, &s.inner).map_err(to_py)
}

/// Bose-Einstein occupation with hbar = k_B = 1.
#[pyfunction]
fn thermal_occupation(temperature: f64, omega: f64) -> PyResult<f64> {
    stats::thermal_occupation(temperature, omega).map_err(to_py)
}

fn evolution(dt: f64, t_final: f64, store_dt: f64, seed: u64) -> PyResult<EvolutionConfig> {
    let stride = (store_dt / dt).round().max(1.0) as usize;
    EvolutionConfig::new(dt, t_final, stride, seed).map_err(to_py)
}

/// Conditional homodyne trajectories from the vacuum. Returns `times`,
/// `cond_x[m][mode][t]` and `currents[m][mode][t]`.
#[pyfunction]
#[pyo3(signature = (p, s, m, dt=5e-4, t_final=4.0, store_dt=0.05, seed=0))]
#[allow(clippy::too_many_arguments)]
fn quantum_trajectories<'py>(
    py: Python<'py>,
    p: &PyModelParams,
    s: &PyAdjacency,
    m: usize,
    dt: f64,
    t_final: f64,
    store_dt: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = evolution(dt, t_final, store_dt, seed)?;
    let (p, s) = (p.inner.clone(), s.inner.clone());
    let ens = py
        .detach(move || -> core::Result<_> {
            let h = model::network_hamiltonian_sparse(&p, &s)?;
            let sme = Sme::new(&h, &p.dims(), &p)?;
            let init: InitialState = StateVector::vacuum(&p.dims())?.into();
            sme.ensemble(&init, &cfg, m)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", ens.first().map(|r| r.times.clone()).unwrap_or_default())?;
    d.set_item("cond_x", ens.iter().map(|r| r.cond_x.clone()).collect::<Vec<_>>())?;
    d.set_item("currents", ens.iter().map(|r| r.currents.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Thermal-noise mean-field trajectories from the origin. Returns `times`,
/// `alphas[m][mode][t]` (complex) and `currents[m][mode][t]`.
#[pyfunction]
#[pyo3(signature = (p, s, m, dt=1e-3, t_final=4.0, store_dt=0.05, seed=0))]
#[allow(clippy::too_many_arguments)]
fn classical_trajectories<'py>(
    py: Python<'py>,
    p: &PyModelParams,
    s: &PyAdjacency,
    m: usize,
    dt: f64,
    t_final: f64,
    store_dt: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = evolution(dt, t_final, store_dt, seed)?;
    let (p, s) = (p.inner.clone(), s.inner.clone());
    let origin = vec![C64::new(0.0, 0.0); p.n_modes()];
    let runs = py
        .detach(move || core::classical::classical_ensemble(&origin, &p, &s, &cfg, m))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", runs.first().map(|r| r.times.clone()).unwrap_or_default())?;
    d.set_item("alphas", runs.iter().map(|r| r.alphas.clone()).collect::<Vec<_>>())?;
    d.set_item("currents", runs.iter().map(|r| r.currents.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Mean difference squared, cross-correlation and error probability of a
/// two-mode ensemble `x[m][mode][t]`.
#[pyfunction]
#[pyo3(signature = (times, x, target=vec![1, -1]))]
fn ensemble_stats<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    x: Vec<Vec<Vec<f64>>>,
    target: Vec<i8>,
) -> PyResult<Bound<'py, PyDict>> {
    let e = Ensemble::new(times, x).map_err(to_py)?;
    let st = stats::ensemble_stats(&e, &spins(target)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", st.times)?;
    d.set_item("mean_diff_sq", st.mean_diff_sq)?;
    d.set_item("mean_diff_sq_se", st.mean_diff_sq_se)?;
    d.set_item("cross_corr", st.cross_corr)?;
    d.set_item("cross_corr_se", st.cross_corr_se)?;
    d.set_item("pr_error", st.pr_error)?;
    d.set_item("pr_error_se", st.pr_error_se)?;
    d.set_item("n_samples", st.n_samples)?;
    Ok(d)
}

#[pymodule]
fn kerr_ising(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyAdjacency>()?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state_ln, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(perturbed_energy, m)?)?;
    m.add_function(wrap_pyfunction!(ising_energy, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(quantum_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(classical_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_stats, m)?)?;
    Ok(())
}
