//! Python bindings for the twistbeam engine.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use twistbeam::decomposition::{decompose, InitialState, QuadSpec, Truncation};
use twistbeam::envelope::{solve_ermakov, EnvelopeSolution, StepControl};
use twistbeam::error::Error;
use twistbeam::fields::FieldProfile;
use twistbeam::lgbasis::{self, BasisConvention, ModeIndex};
use twistbeam::oracle::{l2_distance, oracle_propagate, OracleConfig, OracleStep};
use twistbeam::propagation::{synthesize, GridSpec};

fn err_to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Glaser bell field B0 a^2 / (a^2 + (z - c)^2).
#[pyfunction]
fn glaser_field(b0: f64, a: f64, c: f64, z: f64) -> PyResult<f64> {
    twistbeam::fields::glaser_field(b0, a, c, z).map_err(err_to_py)
}

/// Generalized Laguerre polynomial L_n^alpha(x).
#[pyfunction]
fn laguerre(n: u32, alpha: f64, x: f64) -> f64 {
    lgbasis::laguerre(n, alpha, x)
}

/// Laguerre-Gaussian basis amplitude psi_{n,l}(rho, phi) at reference
/// frequency omega0.
#[pyfunction]
#[pyo3(signature = (n, l, rho, phi, omega0 = 1.0))]
fn basis_eval(n: u32, l: i32, rho: f64, phi: f64, omega0: f64) -> Complex64 {
    lgbasis::basis_eval(ModeIndex::new(n, l), &BasisConvention::new(omega0), rho, phi)
}

/// Closed-form half-blocked expansion coefficient c^{arc}_{n,l}.
#[pyfunction]
fn arc_coefficients(n_a: u32, l_a: i32, n: u32, l: i32) -> Complex64 {
    twistbeam::decomposition::arc_coefficients(n_a, l_a, n, l)
}

/// Generalized binomial coefficient C(x, k).
#[pyfunction]
fn generalized_binomial(x: f64, k: u32) -> f64 {
    twistbeam::decomposition::generalized_binomial(x, k)
}

fn state_from_args(state: &str, n: u32, l: i32, b0: f64, b0_prime: f64) -> PyResult<InitialState> {
    let s = match state {
        "pure" => InitialState::pure(n, l),
        "half_blocked" => InitialState::half_blocked(n, l),
        other => {
            return Err(PyValueError::new_err(format!(
                "state must be `pure` or `half_blocked`, got `{other}`"
            )))
        }
    };
    Ok(s.with_envelope(b0, b0_prime))
}

/// Envelope solution: Twiss functions, phase advance and rotation angles.
#[pyclass(name = "Envelope")]
struct PyEnvelope {
    sol: EnvelopeSolution,
}

#[pymethods]
impl PyEnvelope {
    fn b(&self, z: f64) -> PyResult<f64> {
        self.sol.b_at(z).map_err(err_to_py)
    }

    fn b_prime(&self, z: f64) -> PyResult<f64> {
        self.sol.b_prime_at(z).map_err(err_to_py)
    }

    fn phase_advance(&self, z: f64) -> PyResult<f64> {
        self.sol.phase_advance_at(z).map_err(err_to_py)
    }

    fn larmor(&self, z: f64) -> PyResult<f64> {
        self.sol.larmor_at(z).map_err(err_to_py)
    }

    fn phi_plus(&self, z: f64) -> PyResult<f64> {
        self.sol.phi_plus_at(z).map_err(err_to_py)
    }

    fn phi_minus(&self, z: f64) -> PyResult<f64> {
        self.sol.phi_minus_at(z).map_err(err_to_py)
    }

    /// First z where the phase advance reaches `target`.
    fn z_at_phase_advance(&self, target: f64) -> PyResult<f64> {
        self.sol.z_at_phase_advance(target).map_err(err_to_py)
    }

    fn b_range(&self) -> (f64, f64) {
        self.sol.b_range()
    }
}

/// Solve the Ermakov-Pinney envelope equation for the field described by
/// `field_json` over [z0, z1].
#[pyfunction]
#[pyo3(signature = (field_json, b0, b0_prime, z0, z1, charge_sign = -1.0))]
fn solve_envelope(
    field_json: &str,
    b0: f64,
    b0_prime: f64,
    z0: f64,
    z1: f64,
    charge_sign: f64,
) -> PyResult<PyEnvelope> {
    let field = FieldProfile::from_json(field_json).map_err(err_to_py)?;
    let omega = field
        .normalize(twistbeam::fields::ELEMENTARY_CHARGE)
        .map_err(err_to_py)?
        .omega;
    let sol = solve_ermakov(
        |z| omega.sample(z),
        b0,
        b0_prime,
        (z0, z1),
        StepControl::default(),
        charge_sign,
    )
    .map_err(err_to_py)?;
    Ok(PyEnvelope { sol })
}

/// Mode spectrum of an initial state.
#[pyclass(name = "Spectrum")]
struct PySpectrum {
    spec: twistbeam::decomposition::ModeSpectrum,
}

#[pymethods]
impl PySpectrum {
    /// [(n, l, coefficient)] in deterministic order.
    fn entries(&self) -> Vec<(u32, i32, Complex64)> {
        self.spec.entries.iter().map(|(i, c)| (i.n, i.l, *c)).collect()
    }

    fn coefficient(&self, n: u32, l: i32) -> Complex64 {
        self.spec.coefficient(ModeIndex::new(n, l))
    }

    #[getter]
    fn captured_norm(&self) -> f64 {
        self.spec.captured_norm
    }

    #[getter]
    fn source_norm(&self) -> f64 {
        self.spec.source_norm
    }

    #[getter]
    fn truncation_deficit(&self) -> f64 {
        self.spec.truncation_deficit()
    }

    fn mean_lz(&self) -> f64 {
        self.spec.mean_lz()
    }

    fn to_csv(&self) -> String {
        self.spec.to_csv()
    }
}

/// Expand an initial state over the LG basis.
#[pyfunction]
#[pyo3(signature = (state, n, l, n_max = 12, l_pad = 25, b0 = 1.0, b0_prime = 0.0, omega0 = 1.0))]
#[allow(clippy::too_many_arguments)]
fn decompose_state(
    state: &str,
    n: u32,
    l: i32,
    n_max: u32,
    l_pad: u32,
    b0: f64,
    b0_prime: f64,
    omega0: f64,
) -> PyResult<PySpectrum> {
    let st = state_from_args(state, n, l, b0, b0_prime)?;
    let conv = BasisConvention::new(omega0);
    let trunc = Truncation::new(n_max, l - l_pad as i32, l + l_pad as i32);
    let spec = decompose(&st, &conv, &trunc, &QuadSpec::default()).map_err(err_to_py)?;
    Ok(PySpectrum { spec })
}

/// Synthesize |psi|^2 at plane z; returns (rho, phi, intensity rows).
#[pyfunction]
#[pyo3(signature = (field_json, state, n, l, z, charge_sign = -1.0, n_rho = 128, n_phi = 128,
                    rho_max = None, n_max = 12, l_pad = 25, b0 = 1.0, b0_prime = 0.0))]
#[allow(clippy::too_many_arguments)]
fn propagate_intensity(
    field_json: &str,
    state: &str,
    n: u32,
    l: i32,
    z: f64,
    charge_sign: f64,
    n_rho: usize,
    n_phi: usize,
    rho_max: Option<f64>,
    n_max: u32,
    l_pad: u32,
    b0: f64,
    b0_prime: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let st = state_from_args(state, n, l, b0, b0_prime)?;
    let conv = BasisConvention::default();
    let field = FieldProfile::from_json(field_json).map_err(err_to_py)?;
    let omega = field
        .normalize(twistbeam::fields::ELEMENTARY_CHARGE)
        .map_err(err_to_py)?
        .omega;
    let sol = solve_ermakov(
        |zz| omega.sample(zz),
        b0,
        b0_prime,
        (0.0, z.max(1e-9)),
        StepControl::default(),
        charge_sign,
    )
    .map_err(err_to_py)?;
    let trunc = Truncation::new(n_max, l - l_pad as i32, l + l_pad as i32);
    let spec = decompose(&st, &conv, &trunc, &QuadSpec::default()).map_err(err_to_py)?;
    let grid = GridSpec { n_rho, n_phi, rho_max, explicit: None };
    let res = synthesize(&spec, &conv, &sol, z, &grid).map_err(err_to_py)?;
    let intensity = (0..res.total.rho.len())
        .map(|i| (0..res.total.phi.len()).map(|k| res.total.at(i, k).norm_sqr()).collect())
        .collect();
    Ok((res.total.rho, res.total.phi, intensity))
}

/// Phase-optimized L2 distance between the analytic synthesis and the direct
/// PDE oracle at z_end.
#[pyfunction]
#[pyo3(signature = (field_json, state, n, l, z_end, charge_sign = -1.0, n_max = 8, l_pad = 8,
                    n_rho = 1024, rho_max = None, tol = 1e-7, b0 = 1.0, b0_prime = 0.0))]
#[allow(clippy::too_many_arguments)]
fn oracle_distance(
    field_json: &str,
    state: &str,
    n: u32,
    l: i32,
    z_end: f64,
    charge_sign: f64,
    n_max: u32,
    l_pad: u32,
    n_rho: usize,
    rho_max: Option<f64>,
    tol: f64,
    b0: f64,
    b0_prime: f64,
) -> PyResult<f64> {
    let st = state_from_args(state, n, l, b0, b0_prime)?;
    let conv = BasisConvention::default();
    let field = FieldProfile::from_json(field_json).map_err(err_to_py)?;
    let omega = field
        .normalize(twistbeam::fields::ELEMENTARY_CHARGE)
        .map_err(err_to_py)?
        .omega;
    let sol = solve_ermakov(
        |zz| omega.sample(zz),
        b0,
        b0_prime,
        (0.0, z_end),
        StepControl::default(),
        charge_sign,
    )
    .map_err(err_to_py)?;
    let trunc = Truncation::new(n_max, l - l_pad as i32, l + l_pad as i32);
    let spec = decompose(&st, &conv, &trunc, &QuadSpec::default()).map_err(err_to_py)?;
    let (_, b_max) = sol.b_range();
    let kappa_max = (2 * n_max as i64
        + trunc.l_min.unsigned_abs().max(trunc.l_max.unsigned_abs()) as i64
        + 1) as f64;
    let cfg = OracleConfig {
        l_min: trunc.l_min,
        l_max: trunc.l_max,
        rho_max: rho_max.unwrap_or(b_max * ((2.0 * kappa_max).sqrt() + 6.0)),
        n_rho,
        step: OracleStep::Adaptive { tol, dz0: 1e-4 },
        n_phi: (4 * trunc.l_max.unsigned_abs().max(trunc.l_min.unsigned_abs()) as usize).max(64),
        radial_stride: 1,
        boundary_limit: 1e-6,
        angular_order: 128,
    };
    let grids = oracle_propagate(
        &st,
        &conv,
        |zz| omega.sample(zz),
        charge_sign,
        (0.0, z_end),
        &[z_end],
        &cfg,
    )
    .map_err(err_to_py)?;
    let gs = GridSpec::with_grids(grids[0].rho.clone(), grids[0].phi.clone());
    let ana = synthesize(&spec, &conv, &sol, z_end, &gs).map_err(err_to_py)?;
    l2_distance(&ana.total, &grids[0]).map_err(err_to_py)
}

#[pymodule]
fn _twistbeam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(glaser_field, m)?)?;
    m.add_function(wrap_pyfunction!(laguerre, m)?)?;
    m.add_function(wrap_pyfunction!(basis_eval, m)?)?;
    m.add_function(wrap_pyfunction!(arc_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(generalized_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(solve_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_state, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_distance, m)?)?;
    m.add_class::<PyEnvelope>()?;
    m.add_class::<PySpectrum>()?;
    Ok(())
}
