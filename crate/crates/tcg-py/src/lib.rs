//! Python bindings for the qutrit gate-composition simulator.
//!
//! Exposes circuit construction, simulation with and without noise, gate
//! verification against closed forms, tomography, and feedback calibration.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use tcg_core::circuit::{self, Scheme};
use tcg_core::composer;
use tcg_core::noise;
use tcg_core::qudit::{state_fidelity, StateVector};
use tcg_core::reference;
use tcg_core::tomography;

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    match s {
        "cz" => Ok(Scheme::Cz),
        "cu" => Ok(Scheme::Cu),
        "spcu" => Ok(Scheme::Spcu),
        "tcg" => Ok(Scheme::Tcg),
        other => Err(PyValueError::new_err(format!(
            "unknown scheme '{other}' (expected cz, cu, spcu, or tcg)"
        ))),
    }
}

fn complex_rows(m: &ndarray::Array2<num_complex::Complex64>) -> Vec<Vec<(f64, f64)>> {
    m.outer_iter()
        .map(|r| r.iter().map(|z| (z.re, z.im)).collect())
        .collect()
}

/// Noise model: per-qudit relaxation and dephasing plus per-gate leakage.
#[pyclass(name = "NoiseModel")]
#[derive(Clone)]
struct PyNoiseModel {
    inner: noise::NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    /// Built-in device parameter table with decoherence and leakage on.
    #[staticmethod]
    fn device_default(m: usize) -> PyNoiseModel {
        PyNoiseModel {
            inner: noise::NoiseModel::device_default(m),
        }
    }

    /// Uniform relaxation/dephasing model, decoherence only.
    #[staticmethod]
    fn uniform(m: usize, t1_us: f64, tphi_us: f64) -> PyNoiseModel {
        PyNoiseModel {
            inner: noise::NoiseModel::uniform(m, t1_us, tphi_us),
        }
    }
}

/// A qudit circuit: named gates on sites, a coupling topology, and a
/// gate-scheme tag. Serializes to/from JSON.
#[pyclass(name = "Circuit")]
#[derive(Clone)]
struct PyCircuit {
    inner: circuit::Circuit,
}

#[pymethods]
impl PyCircuit {
    /// Empty circuit on m qutrits.
    #[new]
    fn new(m: usize, scheme: &str) -> PyResult<Self> {
        Ok(PyCircuit {
            inner: circuit::Circuit::new_qutrits(m, parse_scheme(scheme)?),
        })
    }

    /// GHZ-preparation circuit with branch phase tau.
    #[staticmethod]
    fn ghz(m: usize, tau: f64, scheme: &str) -> PyResult<Self> {
        Ok(PyCircuit {
            inner: circuit::ghz_circuit(m, tau, parse_scheme(scheme)?),
        })
    }

    /// W-preparation circuit with amplitude ratio lambda.
    #[staticmethod]
    fn w(m: usize, lambda: f64, scheme: &str) -> PyResult<Self> {
        Ok(PyCircuit {
            inner: circuit::w_circuit(m, lambda, parse_scheme(scheme)?),
        })
    }

    /// Four-qudit comparator circuit.
    #[staticmethod]
    fn comparator() -> PyCircuit {
        PyCircuit {
            inner: circuit::comparator_circuit(),
        }
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        circuit::Circuit::from_json(s)
            .map(|inner| PyCircuit { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Append a gate by name; params is a dict of numeric parameters.
    #[pyo3(signature = (gate, sites, params=None))]
    fn push(
        &mut self,
        gate: &str,
        sites: Vec<usize>,
        params: Option<std::collections::BTreeMap<String, f64>>,
    ) -> PyResult<()> {
        let ps: Vec<(String, f64)> = params.unwrap_or_default().into_iter().collect();
        let pairs: Vec<(&str, circuit::ParamValue)> = ps
            .iter()
            .map(|(k, v)| (k.as_str(), circuit::ParamValue::Num(*v)))
            .collect();
        match sites.len() {
            1 => self.inner.push1(gate, sites[0], &pairs),
            2 => self.inner.push2(gate, sites[0], sites[1], &pairs),
            n => {
                return Err(PyValueError::new_err(format!(
                    "push supports 1 or 2 sites, got {n}"
                )))
            }
        }
        Ok(())
    }

    fn num_ops(&self) -> usize {
        self.inner.ops.len()
    }

    /// (single-qudit gates, two-qudit gates, scheduled depth).
    #[pyo3(signature = (expand=false))]
    fn counts(&self, expand: bool) -> (usize, usize, usize) {
        let k = circuit::depth_and_counts(&self.inner, expand);
        (k.n1q, k.n2q, k.depth)
    }

    /// Replace composite gates by their pulse-level expansion.
    fn expand(&self) -> PyCircuit {
        PyCircuit {
            inner: circuit::expand_composites(&self.inner),
        }
    }

    /// Diagonal populations of the output state from the all-zero input.
    #[pyo3(signature = (noise=None))]
    fn simulate_populations(&self, noise: Option<PyNoiseModel>) -> Vec<f64> {
        let rho = circuit::simulate(&self.inner, None, noise.as_ref().map(|n| &n.inner));
        (0..rho.space.total_dim())
            .map(|i| rho.matrix[[i, i]].re)
            .collect()
    }

    /// Fidelity of the circuit output against the ideal GHZ target.
    #[pyo3(signature = (tau, noise=None))]
    fn ghz_fidelity(&self, tau: f64, noise: Option<PyNoiseModel>) -> PyResult<f64> {
        let target = circuit::ghz_target(self.inner.qudits.len(), tau);
        self.fidelity_to(&target, noise)
    }

    /// Fidelity of the circuit output against the ideal W target (3 sites).
    #[pyo3(signature = (lambda_, noise=None))]
    fn w_fidelity(&self, lambda_: f64, noise: Option<PyNoiseModel>) -> PyResult<f64> {
        let target = circuit::w_target(lambda_);
        self.fidelity_to(&target, noise)
    }

    /// Truth table over computational basis inputs (rows are outputs).
    #[pyo3(signature = (shots=None, seed=7))]
    fn truth_table(&self, shots: Option<u64>, seed: u64) -> Vec<Vec<f64>> {
        let t = circuit::truth_table(&self.inner, shots, seed);
        t.outer_iter().map(|r| r.to_vec()).collect()
    }
}

impl PyCircuit {
    fn fidelity_to(&self, target: &StateVector, noise: Option<PyNoiseModel>) -> PyResult<f64> {
        let rho = circuit::simulate(&self.inner, None, noise.as_ref().map(|n| &n.inner));
        let t = if rho.space == target.space {
            target.clone()
        } else {
            circuit::lift_state(target, &rho.space)
        };
        state_fidelity(&rho, &t).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Recompose every gate family and compare against its closed form;
/// returns [(name, residual, tolerance, passed)].
#[pyfunction]
#[pyo3(signature = (flip_convention=false))]
fn verify(flip_convention: bool) -> Vec<(String, f64, f64, bool)> {
    reference::verification_report(flip_convention)
        .into_iter()
        .map(|e| {
            let p = e.passed();
            (e.name, e.residual, e.tolerance, p)
        })
        .collect()
}

/// Full 9x9 matrix of the composed conditional rotation as (re, im) pairs.
#[pyfunction]
fn cu_matrix(theta: f64, phi: f64) -> Vec<Vec<(f64, f64)>> {
    complex_rows(&composer::cu(theta, phi).operator.matrix)
}

/// Restricted 4x4 computational block of the composed conditional rotation.
#[pyfunction]
fn cu_block(theta: f64, phi: f64) -> Vec<Vec<(f64, f64)>> {
    complex_rows(&composer::cu(theta, phi).restricted)
}

/// Process fidelity of the composed conditional rotation from process
/// tomography (exact when shots is None).
#[pyfunction]
#[pyo3(signature = (theta, phi, shots=None, seed=7))]
fn process_fidelity(theta: f64, phi: f64, shots: Option<u64>, seed: u64) -> f64 {
    let gate = composer::cu(theta, phi);
    let chi = tomography::qpt_unitary(&gate.operator, shots, seed);
    let target =
        tomography::ChiMatrix::of_qubit_unitary(&tomography::cu_qubit_template(theta, phi));
    chi.fidelity(&target)
}

/// Closed-loop calibration of a hidden control offset; returns
/// (converged, iterations, final_fidelity).
#[pyfunction]
#[pyo3(signature = (theta, phi, dtheta, dphi, shots=None, seed=7, max_iter=10, threshold=0.999))]
#[allow(clippy::too_many_arguments)]
fn feedback(
    theta: f64,
    phi: f64,
    dtheta: f64,
    dphi: f64,
    shots: Option<u64>,
    seed: u64,
    max_iter: usize,
    threshold: f64,
) -> (bool, usize, f64) {
    let st = tomography::feedback_calibrate(
        theta, phi, dtheta, dphi, shots, seed, max_iter, threshold, None,
    );
    let last = st.fidelity_history.last().copied().unwrap_or(f64::NAN);
    (st.converged, st.iterations, last)
}

#[pymodule]
fn tcg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyNoiseModel>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(cu_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(cu_block, m)?)?;
    m.add_function(wrap_pyfunction!(process_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(feedback, m)?)?;
    Ok(())
}
