//! Python bindings: sample spaces, matrices over them, the two factorization
//! routes, spectra and certificate checking. Certificates cross the boundary
//! as JSON strings.

use expfact::algebra::{make_backend, Backend, MatrixOverAlgebra, Space};
use expfact::certify::{run_t_suite, FactorizationCertificate};
use expfact::dense::Mat;
use expfact::general::{factorize_two_exp_with, single_exp_certificate, FactorOptions};
use expfact::literal::{MatrixLiteral, MatrixSpec};
use expfact::spectra::spectrum;
use expfact::triangular::two_exp_triangular;
use expfact::Error;
use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Config(_) | Error::Structural(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A sampled function space.
#[pyclass(name = "Space", module = "expfact", frozen)]
#[derive(Clone)]
struct PySpace(Space);

#[pymethods]
impl PySpace {
    #[staticmethod]
    fn finite_points(count: usize) -> PyResult<Self> {
        Ok(PySpace(make_backend(Backend::FinitePoints { count }).map_err(to_py)?))
    }

    #[staticmethod]
    fn interval_path(samples: usize) -> PyResult<Self> {
        Ok(PySpace(make_backend(Backend::IntervalPath { samples }).map_err(to_py)?))
    }

    #[staticmethod]
    fn circle_path(samples: usize) -> PyResult<Self> {
        Ok(PySpace(make_backend(Backend::CirclePath { samples }).map_err(to_py)?))
    }

    #[staticmethod]
    #[pyo3(signature = (boundary_count, radial_rings=4, degree_cap=8))]
    fn disk_grid(boundary_count: usize, radial_rings: usize, degree_cap: usize) -> PyResult<Self> {
        Ok(PySpace(make_backend(Backend::DiskGrid { boundary_count, radial_rings, degree_cap }).map_err(to_py)?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Sample coordinates.
    fn coords(&self) -> Vec<C64> {
        self.0.coords().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Space({})", serde_json::to_string(&self.0.backend()).unwrap_or_default())
    }
}

/// An n×n matrix over a sample space, stored as one dense matrix per sample.
#[pyclass(name = "Matrix", module = "expfact", frozen)]
#[derive(Clone)]
struct PyMatrix(MatrixOverAlgebra);

#[pymethods]
impl PyMatrix {
    /// From `samples[s][i][j]`, one n×n nested list per sample.
    #[staticmethod]
    fn from_samples(space: &PySpace, samples: Vec<Vec<Vec<C64>>>) -> PyResult<Self> {
        let n = samples.first().map_or(0, Vec::len);
        let mats = samples
            .iter()
            .map(|rows| {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(PyValueError::new_err(format!("every sample must be {n}×{n}")));
                }
                Ok(Mat::from_fn(n, |i, j| rows[i][j]))
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyMatrix(MatrixOverAlgebra::from_samples(&space.0, n, mats).map_err(to_py)?))
    }

    /// From a spec file's JSON text.
    #[staticmethod]
    fn from_spec_json(text: &str) -> PyResult<Self> {
        let (_, m) = MatrixSpec::from_json(text).and_then(|s| s.build()).map_err(to_py)?;
        Ok(PyMatrix(m))
    }

    fn to_spec_json(&self) -> PyResult<String> {
        serde_json::to_string(&MatrixSpec::from_matrix(&self.0)).map_err(json_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn space(&self) -> PySpace {
        PySpace(self.0.space().clone())
    }

    fn samples(&self) -> Vec<Vec<Vec<C64>>> {
        let n = self.0.dim();
        self.0.samples().iter().map(|m| (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()).collect()
    }

    fn det(&self) -> Vec<C64> {
        self.0.det().values().to_vec()
    }

    fn __matmul__(&self, other: &PyMatrix) -> PyResult<Self> {
        Ok(PyMatrix(self.0.mul(&other.0).map_err(to_py)?))
    }

    /// Pointwise matrix exponential.
    fn exp(&self) -> PyResult<Self> {
        Ok(PyMatrix(expfact::matfunc::mat_exp(&self.0).map_err(to_py)?))
    }

    fn max_diff(&self, other: &PyMatrix) -> PyResult<f64> {
        self.0.max_diff(&other.0).map_err(to_py)
    }

    /// Sampled spectrum as a list of eigenvalues (with repetition).
    fn spectrum(&self) -> PyResult<Vec<C64>> {
        Ok(spectrum(&self.0).map_err(to_py)?.values().collect())
    }

    /// exp(B1)·exp(B2) through the general route.
    #[pyo3(signature = (eps=0.25, seed=0))]
    fn factorize(&self, eps: f64, seed: u64) -> PyResult<Factorization> {
        let f = factorize_two_exp_with(&self.0, FactorOptions { eps, seed }).map_err(to_py)?;
        Ok(Factorization { b1: PyMatrix(f.b1), b2: PyMatrix(f.b2), certificate: f.certificate })
    }

    /// exp(B1)·exp(B2) for triangular input with unit diagonal product.
    #[pyo3(signature = (eps=0.25))]
    fn factorize_triangular(&self, eps: f64) -> PyResult<Factorization> {
        let f = two_exp_triangular(&self.0, eps).map_err(to_py)?;
        Ok(Factorization { b1: PyMatrix(f.b1), b2: PyMatrix(f.b2), certificate: f.certificate })
    }

    /// A single logarithm (finite point sets only).
    fn single_exp(&self) -> PyResult<(PyMatrix, String)> {
        let (b, cert) = single_exp_certificate(&self.0).map_err(to_py)?;
        Ok((PyMatrix(b), serde_json::to_string(&cert).map_err(json_err)?))
    }

    fn __repr__(&self) -> String {
        format!("Matrix(n={}, samples={})", self.0.dim(), self.0.space().len())
    }
}

#[pyclass(module = "expfact", frozen)]
struct Factorization {
    #[pyo3(get)]
    b1: PyMatrix,
    #[pyo3(get)]
    b2: PyMatrix,
    certificate: FactorizationCertificate,
}

#[pymethods]
impl Factorization {
    #[getter]
    fn verified(&self) -> bool {
        self.certificate.verified
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.certificate.residual
    }

    fn certificate_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.certificate).map_err(json_err)
    }
}

/// Recheck a certificate from its JSON text; returns (verified, residual).
#[pyfunction]
fn verify_certificate(text: &str) -> PyResult<(bool, f64)> {
    let cert: FactorizationCertificate = serde_json::from_str(text).map_err(json_err)?;
    let fresh = cert.recheck().map_err(to_py)?;
    Ok((fresh.verified, fresh.residual))
}

/// The built-in T counterexample suite; returns (passed, table).
#[pyfunction]
#[pyo3(signature = (samples=257, eps=0.25))]
fn t_counterexample(samples: usize, eps: f64) -> PyResult<(bool, String)> {
    let report = run_t_suite(samples, eps).map_err(to_py)?;
    Ok((report.passed, report.table()))
}

/// Matrix literal JSON (`{"n": .., "entries": [..]}`) for a matrix.
#[pyfunction]
fn matrix_literal_json(m: &PyMatrix) -> PyResult<String> {
    serde_json::to_string(&MatrixLiteral::from_matrix(&m.0)).map_err(json_err)
}

#[pymodule]
#[pyo3(name = "expfact")]
fn expfact_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyMatrix>()?;
    m.add_class::<Factorization>()?;
    m.add_function(wrap_pyfunction!(verify_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(t_counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_literal_json, m)?)?;
    Ok(())
}
