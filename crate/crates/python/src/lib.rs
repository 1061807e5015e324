//! Python bindings for `fvrf`. Fields cross the boundary as flat lists of
//! floats in row-major order.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fvrf::burgers::{self, BurgersConfig, BurgersPrior};
use fvrf::darcy::{self, DarcyConfig, LevelSetPrior};
use fvrf::features::{FeatureFamily, FourierParams, PredictorCorrectorParams};
use fvrf::rfm::{self, SolveOptions, TrainConfig};

fn to_py(e: fvrf::Error) -> PyErr {
    if e.is_numerical() || matches!(e, fvrf::Error::Io { .. }) {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Uniform grid: periodic on `[0, 1)` or the closed unit square.
#[pyclass(name = "Grid", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyGrid(fvrf::Grid);

#[pymethods]
impl PyGrid {
    /// Periodic grid with `n` unique nodes.
    #[staticmethod]
    fn periodic(n: usize) -> PyResult<Self> {
        fvrf::Grid::periodic(n).map(Self).map_err(to_py)
    }

    /// Square grid with `r` nodes per side.
    #[staticmethod]
    fn square(r: usize) -> PyResult<Self> {
        fvrf::Grid::square(r).map(Self).map_err(to_py)
    }

    #[getter]
    fn resolution(&self) -> usize {
        self.0.resolution()
    }

    fn quadrature_weights(&self) -> Vec<f64> {
        self.0.quadrature_weights()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Nodal values on a grid.
#[pyclass(name = "GridFunction", frozen, from_py_object)]
#[derive(Clone)]
struct PyGridFunction(fvrf::GridFunction);

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        fvrf::GridFunction::new(grid.0, values).map(Self).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn norm_l2(&self) -> f64 {
        self.0.norm_l2()
    }

    fn integral(&self) -> f64 {
        self.0.integral()
    }

    /// Keeps every `factor`-th node.
    fn restrict(&self, factor: usize) -> PyResult<Self> {
        self.0.restrict(factor).map(Self).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

/// `||truth - pred|| / ||truth||` in the discrete L2 norm.
#[pyfunction]
fn relative_l2_error(truth: &PyGridFunction, pred: &PyGridFunction) -> PyResult<f64> {
    fvrf::relative_l2_error(&truth.0, &pred.0).map_err(to_py)
}

fn periodic_grid(a: &PyGridFunction) -> PyResult<fvrf::Grid1D> {
    match a.0.grid() {
        fvrf::Grid::Periodic(g) => Ok(*g),
        _ => Err(PyValueError::new_err("expected a periodic grid function")),
    }
}

fn square_grid(a: &PyGridFunction) -> PyResult<fvrf::Grid2D> {
    match a.0.grid() {
        fvrf::Grid::Square(g) => Ok(*g),
        _ => Err(PyValueError::new_err("expected a square grid function")),
    }
}

/// Viscous Burgers solution at `t_final` from initial condition `a`.
#[pyfunction]
#[pyo3(signature = (a, viscosity = 0.01, t_final = 1.0, dt = None, dealias = true))]
fn solve_burgers(
    a: &PyGridFunction,
    viscosity: f64,
    t_final: f64,
    dt: Option<f64>,
    dealias: bool,
) -> PyResult<PyGridFunction> {
    let mut cfg = BurgersConfig::new(periodic_grid(a)?, viscosity, t_final);
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    cfg.dealias = dealias;
    burgers::solve_burgers(&a.0, &cfg).map(PyGridFunction).map_err(to_py)
}

/// Darcy pressure for coefficient `a` and constant forcing `f`.
#[pyfunction]
#[pyo3(signature = (a, f = 1.0))]
fn solve_darcy(a: &PyGridFunction, f: f64) -> PyResult<PyGridFunction> {
    let mut cfg = DarcyConfig::new(square_grid(a)?);
    cfg.forcing = darcy::Forcing::Constant(f);
    darcy::solve_darcy(&a.0, &cfg).map(PyGridFunction).map_err(to_py)
}

/// Paired input and output fields with generation metadata.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(fvrf::dataset::Dataset);

#[pymethods]
impl PyDataset {
    /// Burgers pairs on a periodic mesh of size `k`, endpoint included.
    #[staticmethod]
    #[pyo3(signature = (n, k = 1025, t_final = 1.0, viscosity = 0.01, seed = 0))]
    fn gen_burgers(py: Python<'_>, n: usize, k: usize, t_final: f64, viscosity: f64, seed: u64) -> PyResult<Self> {
        let grid = fvrf::Grid1D::from_mesh_size(k).map_err(to_py)?;
        let cfg = BurgersConfig::new(grid, viscosity, t_final);
        py.detach(|| burgers::gen_burgers_dataset(n, &BurgersPrior::default(), &cfg, seed))
            .map(Self)
            .map_err(to_py)
    }

    /// Darcy pairs on a square grid with `r` nodes per side.
    #[staticmethod]
    #[pyo3(signature = (n, r = 257, seed = 0))]
    fn gen_darcy(py: Python<'_>, n: usize, r: usize, seed: u64) -> PyResult<Self> {
        let cfg = DarcyConfig::new(fvrf::Grid2D::new(r).map_err(to_py)?);
        py.detach(|| darcy::gen_darcy_dataset(n, &LevelSetPrior::default(), &cfg, seed))
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        fvrf::dataset::Dataset::load(&path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(to_py)
    }

    fn restrict_to_resolution(&self, resolution: usize) -> PyResult<Self> {
        self.0.restrict_to_resolution(resolution).map(Self).map_err(to_py)
    }

    #[getter]
    fn inputs(&self) -> Vec<PyGridFunction> {
        self.0.inputs.iter().cloned().map(PyGridFunction).collect()
    }

    #[getter]
    fn outputs(&self) -> Vec<PyGridFunction> {
        self.0.outputs.iter().cloned().map(PyGridFunction).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Trained random feature model.
#[pyclass(name = "RfmModel", frozen)]
struct PyRfmModel(rfm::RfmModel);

#[pymethods]
impl PyRfmModel {
    /// Trains with `features` either "fourier" (Burgers) or "pc" (Darcy).
    #[staticmethod]
    #[pyo3(signature = (data, features = "fourier", m = 256, seed = 0, lam = None, j_max = None))]
    fn train(
        py: Python<'_>,
        data: &PyDataset,
        features: &str,
        m: usize,
        seed: u64,
        lam: Option<f64>,
        j_max: Option<usize>,
    ) -> PyResult<Self> {
        let (family, default_lambda) = match features {
            "fourier" => (FeatureFamily::FourierBurgers(FourierParams::default()), 0.0),
            "pc" => (
                FeatureFamily::PredictorCorrectorDarcy(PredictorCorrectorParams::default()),
                1e-8,
            ),
            other => return Err(PyValueError::new_err(format!("unknown feature family {other:?}"))),
        };
        let cfg = TrainConfig {
            family,
            m,
            j_max,
            seed,
            solve: SolveOptions {
                lambda: lam.unwrap_or(default_lambda),
                ..Default::default()
            },
        };
        py.detach(|| rfm::RfmModel::train(&data.0, &cfg))
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        rfm::RfmModel::load(&path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(to_py)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha.clone()
    }

    fn predict(&self, a: &PyGridFunction) -> PyResult<PyGridFunction> {
        self.0.predict(&a.0).map(PyGridFunction).map_err(to_py)
    }

    /// Mean relative L2 test error over `data`.
    fn test_error(&self, py: Python<'_>, data: &PyDataset) -> PyResult<f64> {
        py.detach(|| rfm::expected_relative_test_error(&self.0, &data.0))
            .map(|r| r.mean)
            .map_err(to_py)
    }
}

#[pymodule]
fn fvrf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyRfmModel>()?;
    m.add_function(wrap_pyfunction!(relative_l2_error, m)?)?;
    m.add_function(wrap_pyfunction!(solve_burgers, m)?)?;
    m.add_function(wrap_pyfunction!(solve_darcy, m)?)?;
    Ok(())
}
