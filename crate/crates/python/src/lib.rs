//! Python bindings. Results come back as plain lists, dicts and complex
//! numbers so that no array library is required on the Python side.

use std::collections::BTreeMap;

use levelflow::exceptional::{self, PtPhase};
use levelflow::hellmann_feynman;
use levelflow::oscillator::{self, OscSpec, OscState};
use levelflow::spectral_flow::{self, CrossingEvent};
use levelflow::{BuiltinName, LevelflowError, MatrixFamily, Settings, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(levelflow_py, NumericalError, PyRuntimeError, "A numerical routine failed to converge or to meet its precondition.");

fn to_py(e: LevelflowError) -> PyErr {
    match e {
        LevelflowError::Io { .. } => PyOSError::new_err(e.to_string()),
        LevelflowError::NumericalFailure { .. }
        | LevelflowError::SearchFailure { .. }
        | LevelflowError::Bracket { .. }
        | LevelflowError::Precondition(_) => NumericalError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn settings() -> PyResult<Settings> {
    Settings::from_env().map_err(to_py)
}

/// A parameter-dependent matrix family H(z) = Σ_k C_k z^k.
#[pyclass(name = "Model", module = "levelflow_py", frozen)]
pub struct Model {
    inner: MatrixFamily,
}

#[pymethods]
impl Model {
    /// Builtin family by name with optional numeric parameters.
    #[staticmethod]
    #[pyo3(signature = (name, params = None))]
    fn builtin(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let name: BuiltinName = name.parse().map_err(to_py)?;
        let inner = MatrixFamily::builtin(name, &params.unwrap_or_default()).map_err(to_py)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model { inner: MatrixFamily::from_json_str(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Model { inner: MatrixFamily::from_json_file(path).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    #[getter]
    fn hermitian_on_real_axis(&self) -> bool {
        self.inner.hermitian_on_real_axis()
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    /// H(z) as a list of rows.
    fn evaluate(&self, z: C64) -> PyResult<Vec<Vec<C64>>> {
        let h = self.inner.evaluate(z).map_err(to_py)?;
        Ok((0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect())
    }

    /// Eigenvalues and phase-fixed unit eigenvectors at z.
    fn spectrum<'py>(&self, py: Python<'py>, z: C64) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.spectrum(z, &settings()?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("eigenvalues", s.eigenvalues.clone())?;
        d.set_item("vectors", (0..s.dim()).map(|j| s.vector(j)).collect::<Vec<_>>())?;
        d.set_item("defective", s.defective)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, dim={})", self.inner.label(), self.inner.dim())
    }
}

fn event_dict<'py>(py: Python<'py>, e: &CrossingEvent) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pair", e.pair)?;
    d.set_item("lambda_star", e.lambda_star)?;
    d.set_item("gap_min", e.gap_min)?;
    d.set_item("classification", match e.classification {
        spectral_flow::Classification::Crossing => "crossing",
        spectral_flow::Classification::Avoided => "avoided",
    })?;
    d.set_item("slopes", e.slopes)?;
    d.set_item("hf_element", e.hf_element)?;
    d.set_item("overlap", e.overlap_at_star)?;
    Ok(d)
}

/// Tracked eigenvalue branches over [lo, hi] and the crossing events found on them.
#[pyfunction]
#[pyo3(signature = (model, lo, hi, steps, reverse = false))]
fn sweep<'py>(py: Python<'py>, model: &Model, lo: f64, hi: f64, steps: usize, reverse: bool) -> PyResult<Bound<'py, PyDict>> {
    let st = settings()?;
    let flow = spectral_flow::sweep_directed(&model.inner, lo, hi, steps, reverse, &st).map_err(to_py)?;
    let events = spectral_flow::detect_events(&flow, &model.inner, &st).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("grid", flow.grid.clone())?;
    d.set_item("energies", flow.energies.clone())?;
    d.set_item("permutations", flow.permutations.clone())?;
    d.set_item("events", events.iter().map(|e| event_dict(py, e)).collect::<PyResult<Vec<_>>>()?)?;
    Ok(d)
}

/// (λ*, gap) at the refined gap minimum of tracked branches a, b inside (lo, hi).
#[pyfunction]
fn refine_gap_minimum(model: &Model, a: usize, b: usize, lo: f64, hi: f64) -> PyResult<(f64, f64)> {
    spectral_flow::refine_gap_minimum(&model.inner, (a, b), (lo, hi), &settings()?).map_err(to_py)
}

/// ⟨ψ_m|H′|ψ_n⟩ between sorted eigenvectors at real λ.
#[pyfunction]
fn hf_element(model: &Model, lam: f64, m: usize, n: usize) -> PyResult<C64> {
    let s = model.inner.spectrum_real(lam, &settings()?).map_err(to_py)?;
    hellmann_feynman::hf_element(&model.inner, &s, m, n).map_err(to_py)
}

/// Both sides of the off-diagonal Hellmann-Feynman identity at λ.
#[pyfunction]
#[pyo3(signature = (model, lam, m, n, fd_step = None))]
fn hf_offdiag_residual<'py>(
    py: Python<'py>,
    model: &Model,
    lam: f64,
    m: usize,
    n: usize,
    fd_step: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = hellmann_feynman::hf_offdiag_residual(&model.inner, lam, m, n, fd_step, &settings()?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lambda", r.lambda)?;
    d.set_item("pair", r.pair)?;
    d.set_item("lhs", r.lhs)?;
    d.set_item("rhs", r.rhs)?;
    d.set_item("residual", r.residual)?;
    d.set_item("fd_step", r.fd_step)?;
    Ok(d)
}

/// Derivatives of order 0..=order+1 of (E_n − E_m)⟨ψ_m|ψ_n⟩ at λ₀.
#[pyfunction]
#[pyo3(signature = (model, lam, m, n, order, fd_step = None))]
fn product_identity_check<'py>(
    py: Python<'py>,
    model: &Model,
    lam: f64,
    m: usize,
    n: usize,
    order: usize,
    fd_step: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let ds = hellmann_feynman::product_identity_check(&model.inner, lam, m, n, order, fd_step, &settings()?)
        .map_err(to_py)?;
    ds.iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("order", e.order)?;
            d.set_item("value", e.value)?;
            d.set_item("noise", e.noise)?;
            d.set_item("step", e.step)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
fn discriminant(model: &Model, z: C64) -> PyResult<C64> {
    exceptional::discriminant(&model.inner, z, &settings()?).map_err(to_py)
}

/// Newton search for a zero of the discriminant from `seed`.
#[pyfunction]
#[pyo3(signature = (model, seed, ep_tol = None))]
fn find_exceptional_point<'py>(py: Python<'py>, model: &Model, seed: C64, ep_tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let ep = exceptional::find_exceptional_point(&model.inner, seed, ep_tol, &settings()?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("z_star", ep.z_star)?;
    d.set_item("pair", ep.pair)?;
    d.set_item("discriminant_abs", ep.discriminant_abs)?;
    d.set_item("sigma_min", ep.sigma_min)?;
    d.set_item("puiseux_exponent", ep.puiseux_exponent)?;
    d.set_item("iterations", ep.iterations)?;
    Ok(d)
}

/// PT phase of the spectrum over [lo, hi] and the refined phase boundaries.
#[pyfunction]
#[pyo3(signature = (model, lo, hi, steps, real_tol = None))]
fn pt_sweep<'py>(py: Python<'py>, model: &Model, lo: f64, hi: f64, steps: usize, real_tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = exceptional::pt_classify_sweep(&model.inner, lo, hi, steps, real_tol, &settings()?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("g", s.points.iter().map(|p| p.g).collect::<Vec<_>>())?;
    let phases: Vec<&str> = s
        .points
        .iter()
        .map(|p| match p.phase {
            PtPhase::Unbroken => "unbroken",
            PtPhase::Broken => "broken",
            PtPhase::Boundary => "boundary",
        })
        .collect();
    d.set_item("phase", phases)?;
    d.set_item("eigenvalues", s.points.iter().map(|p| p.eigenvalues.clone()).collect::<Vec<_>>())?;
    d.set_item("boundaries", s.boundaries.clone())?;
    Ok(d)
}

/// Eigenvalues of H(x + iy) over an nx × ny grid, x outer.
#[pyfunction]
fn surface_scan<'py>(
    py: Python<'py>,
    model: &Model,
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let g = exceptional::surface_scan(&model.inner, x_range, y_range, nx, ny, &settings()?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("x", g.nodes.iter().map(|n| n.x).collect::<Vec<_>>())?;
    d.set_item("y", g.nodes.iter().map(|n| n.y).collect::<Vec<_>>())?;
    d.set_item("eigenvalues", g.nodes.iter().map(|n| n.eigenvalues.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

fn osc_spec(k: f64, n_max: usize, lambda_ref: Option<f64>) -> PyResult<OscSpec> {
    let spec = OscSpec { k, n_max, lambda_ref: lambda_ref.unwrap_or(k) };
    spec.validate().map_err(to_py)?;
    Ok(spec)
}

/// √k(2m+1) + √λ(2n+1).
#[pyfunction]
fn oscillator_exact_energy(k: f64, m: usize, n: usize, lam: f64) -> PyResult<f64> {
    oscillator::exact_energy(&OscSpec::new(k, m.max(n).max(2)), OscState::new(m, n), lam).map_err(to_py)
}

/// Truncated-basis levels grouped as [m][n].
#[pyfunction]
#[pyo3(signature = (k, n_max, lam, lambda_ref = None))]
fn oscillator_sector_energies(k: f64, n_max: usize, lam: f64, lambda_ref: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    oscillator::sector_energies(&osc_spec(k, n_max, lambda_ref)?, lam, &settings()?).map_err(to_py)
}

/// Expected and numeric degeneracies at λ = k for levels 0..=max_level.
#[pyfunction]
#[pyo3(signature = (k, n_max, max_level, lambda_ref = None))]
fn oscillator_degeneracy_table<'py>(
    py: Python<'py>,
    k: f64,
    n_max: usize,
    max_level: usize,
    lambda_ref: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = oscillator::degeneracy_table(&osc_spec(k, n_max, lambda_ref)?, max_level, &settings()?).map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("level", r.level)?;
            d.set_item("expected", r.expected)?;
            d.set_item("numeric", r.numeric)?;
            d.set_item("energy", r.energy)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
fn builtin_names() -> Vec<&'static str> {
    BuiltinName::ALL.iter().map(|b| b.as_str()).collect()
}

/// `%.17g`-style formatting used by every text output.
#[pyfunction]
fn g17(x: f64) -> String {
    levelflow::g17(x)
}

/// Adds every class, function and exception to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(refine_gap_minimum, m)?)?;
    m.add_function(wrap_pyfunction!(hf_element, m)?)?;
    m.add_function(wrap_pyfunction!(hf_offdiag_residual, m)?)?;
    m.add_function(wrap_pyfunction!(product_identity_check, m)?)?;
    m.add_function(wrap_pyfunction!(discriminant, m)?)?;
    m.add_function(wrap_pyfunction!(find_exceptional_point, m)?)?;
    m.add_function(wrap_pyfunction!(pt_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(surface_scan, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_exact_energy, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_sector_energies, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_degeneracy_table, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(g17, m)?)?;
    Ok(())
}

#[pymodule]
fn levelflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
