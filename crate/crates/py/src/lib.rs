//! Python bindings for `game_rates`.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use game_rates::games::{self, GameProblem};
use game_rates::lower_bounds::{self, InstanceKind};
use game_rates::solvers::{self, MethodKind, SolverConfig};
use game_rates::spectral::{ComplexSpectrum, RealMatrix};
use game_rates::{experiments, rates, Error};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Numerical(_) | Error::Json(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(x).map_err(|e| to_py_err(e.into()))?)
}

fn parse_method(name: &str) -> PyResult<MethodKind> {
    name.parse().map_err(to_py_err)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<RealMatrix> {
    RealMatrix::from_rows(&rows).map_err(to_py_err)
}

/// An affine game `v(ω) = Jω + b`.
#[pyclass(name = "Game", module = "game_rates_py", from_py_object)]
#[derive(Clone)]
struct PyGame {
    inner: GameProblem,
}

#[pymethods]
impl PyGame {
    #[staticmethod]
    #[pyo3(signature = (a, b=None, c=None))]
    fn bilinear(a: Vec<Vec<f64>>, b: Option<Vec<f64>>, c: Option<Vec<f64>>) -> PyResult<Self> {
        let a = matrix(a)?;
        let b = b.unwrap_or_else(|| vec![0.0; a.rows()]);
        let c = c.unwrap_or_else(|| vec![0.0; a.cols()]);
        Ok(PyGame { inner: games::bilinear_game(&a, &b, &c).map_err(to_py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (m, p, seed, with_offset=false))]
    fn random_bilinear(m: usize, p: usize, seed: u64, with_offset: bool) -> PyResult<Self> {
        Ok(PyGame { inner: games::random_bilinear_game(m, p, seed, with_offset).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn random_monotone(d1: usize, d2: usize, seed: u64) -> PyResult<Self> {
        Ok(PyGame { inner: games::random_monotone_game(d1, d2, seed).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn in_between(epsilon: f64) -> PyResult<Self> {
        Ok(PyGame { inner: games::in_between_game(epsilon).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyGame { inner: GameProblem::from_json(s).map_err(to_py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn d1(&self) -> usize {
        self.inner.d1()
    }

    #[getter]
    fn d2(&self) -> usize {
        self.inner.d2()
    }

    fn jacobian(&self) -> Vec<Vec<f64>> {
        self.inner.field().jacobian().to_rows()
    }

    fn offset(&self) -> Vec<f64> {
        self.inner.field().offset().to_vec()
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        self.inner.stationary_point().map(<[f64]>::to_vec)
    }

    fn eval(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.field().eval(&w).map_err(to_py_err)
    }

    fn spectrum(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.inner.spectrum().map_err(to_py_err)?.eigenvalues().to_vec())
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &games::constants(&self.inner).map_err(to_py_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Game(d1={}, d2={})", self.inner.d1(), self.inner.d2())
    }
}

/// Runs `method` from `w0` and returns the trajectory as a dict.
#[pyfunction]
#[pyo3(signature = (method, game, w0, eta=0.1, k=2, steps=1000, alpha=0.0, beta=0.0, stop_tol=0.0))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    method: &str,
    game: &PyGame,
    w0: Vec<f64>,
    eta: f64,
    k: usize,
    steps: usize,
    alpha: f64,
    beta: f64,
    stop_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SolverConfig { eta, k, alpha, beta, max_steps: steps, stop_tol };
    let traj = solvers::run(parse_method(method)?, &game.inner, &cfg, &w0).map_err(to_py_err)?;
    serialize(py, &traj)
}

/// Spectral rate prediction for `method` on `game` at step `eta`.
#[pyfunction]
#[pyo3(signature = (method, game, eta, k=2))]
fn predict<'py>(py: Python<'py>, method: &str, game: &PyGame, eta: f64, k: usize) -> PyResult<Bound<'py, PyAny>> {
    let s = game.inner.spectrum().map_err(to_py_err)?;
    serialize(py, &rates::predict(parse_method(method)?, &s, eta, k).map_err(to_py_err)?)
}

/// Squared spectral radius of k-extrapolation for the given eigenvalues.
#[pyfunction]
fn keg_spectral_radius_sq(eigenvalues: Vec<Complex64>, eta: f64, k: usize) -> PyResult<f64> {
    rates::keg_spectral_radius_sq(&ComplexSpectrum::new(eigenvalues), eta, k).map_err(to_py_err)
}

#[pyfunction]
fn keg_rate_bound(eigenvalues: Vec<Complex64>, eta: f64, k: usize) -> PyResult<f64> {
    rates::keg_rate_bound(&ComplexSpectrum::new(eigenvalues), eta, k).map_err(to_py_err)
}

/// Global contraction factor of `method` at step `eta`.
#[pyfunction]
fn global_rate(game: &PyGame, method: &str, eta: f64) -> PyResult<f64> {
    let c = games::constants(&game.inner).map_err(to_py_err)?;
    rates::global_rate(&c, parse_method(method)?, eta).map_err(to_py_err)
}

#[pyfunction]
fn minimax_radius<'py>(py: Python<'py>, eigenvalues: Vec<Complex64>, degree: usize) -> PyResult<Bound<'py, PyAny>> {
    let r = lower_bounds::minimax_radius(&ComplexSpectrum::new(eigenvalues), degree).map_err(to_py_err)?;
    serialize(py, &r)
}

#[pyfunction]
fn lagrange_lower_bound(points: Vec<f64>) -> PyResult<f64> {
    lower_bounds::lagrange_lower_bound(&points).map_err(to_py_err)
}

/// Lower-bound pipeline on a Chebyshev instance.
#[pyfunction]
#[pyo3(signature = (mu_or_gamma, lipschitz, k, kind="convex"))]
fn verify_lower_bound<'py>(
    py: Python<'py>,
    mu_or_gamma: f64,
    lipschitz: f64,
    k: usize,
    kind: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: InstanceKind = kind.parse().map_err(to_py_err)?;
    serialize(py, &lower_bounds::verify_lower_bound(mu_or_gamma, lipschitz, k, kind).map_err(to_py_err)?)
}

#[pyfunction]
fn improvement_ratio(game: &PyGame) -> PyResult<f64> {
    experiments::improvement_ratio(&game.inner).map_err(to_py_err)
}

/// Runs the command-line interface with `args` (without the program name).
#[pyfunction]
fn cli_main(args: Vec<String>) -> i32 {
    let argv = std::iter::once("game-rates".to_string()).chain(args);
    game_rates::cli::cli_main(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

#[pymodule]
fn game_rates_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(keg_spectral_radius_sq, m)?)?;
    m.add_function(wrap_pyfunction!(keg_rate_bound, m)?)?;
    m.add_function(wrap_pyfunction!(global_rate, m)?)?;
    m.add_function(wrap_pyfunction!(minimax_radius, m)?)?;
    m.add_function(wrap_pyfunction!(lagrange_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(cli_main, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_conversion() {
        Python::attach(|py| {
            let v = serde_json::json!({ "a": [1, 2.5, null], "b": true, "c": "x" });
            let obj = json_to_py(py, &v).unwrap();
            let d = obj.cast::<PyDict>().unwrap();
            let a: Vec<Option<f64>> = d.get_item("a").unwrap().unwrap().extract().unwrap();
            assert_eq!(a, vec![Some(1.0), Some(2.5), None]);
            assert!(d.get_item("b").unwrap().unwrap().extract::<bool>().unwrap());
        });
    }

    #[test]
    fn errors_map_to_python_exceptions() {
        Python::attach(|py| {
            assert!(parse_method("nope").unwrap_err().is_instance_of::<PyValueError>(py));
            let io = to_py_err(Error::Io(std::io::Error::other("x")));
            assert!(io.is_instance_of::<PyIOError>(py));
        });
    }

    #[test]
    fn game_round_trip() {
        let g = PyGame::random_monotone(3, 2, 1).unwrap();
        let back = PyGame::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back.jacobian(), g.jacobian());
        assert_eq!(g.spectrum().unwrap().len(), 5);
    }
}
