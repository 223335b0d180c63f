//! Python bindings: the main simulator types and operations exposed as the
//! `cavann` extension module.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cavann_core::anneal::{evolve, unit_conversion, AnnealSchedule, Integrator};
use cavann_core::coupling::single_mode_matrix;
use cavann_core::hopfield::{
    brute_force_ground, energy_report, hebbian_weights as core_hebbian, recall_matrix as core_recall,
    HopfieldProblem,
};
use cavann_core::lattice::hubbard_tunneling as core_tunneling;
use cavann_core::mode_search::{greedy_select, CandidatePool};
use cavann_core::presets;
use cavann_core::readout::{invert_intensities, output_signal};
use cavann_core::sector::SpinSector;
use cavann_core::spin::{lowest_eigen, min_gap as core_min_gap, Boundary, SpinHamiltonian};
use cavann_core::synthesis::{InteractionProgram, ModeBasis, PumpSettings};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Dimension of the fixed-magnetization basis: C(sites, atoms).
#[pyfunction]
fn sector_dimension(sites: usize, atoms: usize) -> PyResult<usize> {
    Ok(SpinSector::new(sites, atoms).map_err(err)?.dim())
}

/// Hebbian weight matrix of a set of ±1 memory patterns.
#[pyfunction]
fn hebbian_weights(memories: Vec<Vec<i8>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_matrix(&core_hebbian(&memories).map_err(err)?))
}

/// Interaction matrix A = W + nu·diag(input).
#[pyfunction]
fn recall_matrix(weights: Vec<Vec<f64>>, input: Vec<i8>, nu: f64) -> PyResult<Vec<Vec<f64>>> {
    let w = to_matrix(weights)?;
    Ok(from_matrix(&core_recall(&w, &input, nu).map_err(err)?))
}

/// Classical recall energy of a ±1 state.
#[pyfunction]
fn energy(state: Vec<i8>, memories: Vec<Vec<i8>>, input: Vec<i8>, nu: f64) -> PyResult<f64> {
    let p = HopfieldProblem::new(memories, input, nu).map_err(err)?;
    if state.len() != p.n_sites() {
        return Err(PyValueError::new_err("state length mismatch"));
    }
    Ok(p.energy(&state))
}

/// Usable bias interval (nu_min, nu_max) of a recall problem.
#[pyfunction]
fn nu_bounds(memories: Vec<Vec<i8>>, input: Vec<i8>) -> PyResult<(f64, f64)> {
    let p = HopfieldProblem::new(memories, input, 0.0).map_err(err)?;
    let report = energy_report(&p).map_err(err)?;
    Ok(report.nu_interval)
}

/// Exhaustive classical ground state(s); restrict to a fixed number of up
/// spins when `atoms` is given.
#[pyfunction]
#[pyo3(signature = (memories, input, nu, atoms=None))]
fn ground_states(
    memories: Vec<Vec<i8>>,
    input: Vec<i8>,
    nu: f64,
    atoms: Option<usize>,
) -> PyResult<Vec<Vec<i8>>> {
    let p = HopfieldProblem::new(memories, input, nu).map_err(err)?;
    brute_force_ground(&p, atoms).map_err(err)
}

/// Nearest-neighbor tunneling J(V_L) in recoil units.
#[pyfunction]
fn hubbard_tunneling(depth: f64) -> PyResult<f64> {
    core_tunneling(depth).map_err(err)
}

/// Wall-clock ramp seconds for a dimensionless Jτ.
#[pyfunction]
fn ramp_seconds(j_tau: f64, j_in_recoil: f64, recoil_rate: f64) -> PyResult<f64> {
    unit_conversion(j_tau, j_in_recoil, recoil_rate).map_err(err)
}

fn hamiltonian(a: Vec<Vec<f64>>, atoms: usize) -> PyResult<SpinHamiltonian> {
    let a = to_matrix(a)?;
    let sector = Arc::new(SpinSector::new(a.nrows(), atoms).map_err(err)?);
    SpinHamiltonian::build(sector, 1.0, 0.0, &a, Boundary::Open).map_err(err)
}

/// Minimum gap (gap, zeta_star) of the programmed Hamiltonian over
/// zeta in [0, zeta_max], energies in J.
#[pyfunction]
#[pyo3(signature = (a, atoms, zeta_max=2.0, points=201))]
fn min_gap(a: Vec<Vec<f64>>, atoms: usize, zeta_max: f64, points: usize) -> PyResult<(f64, f64)> {
    let h = hamiltonian(a, atoms)?;
    let mg = core_min_gap(&h, 0.0, zeta_max, points).map_err(err)?;
    Ok((mg.gap, mg.zeta_star))
}

/// Ground-state overlap |<pattern|phi0(zeta)>|².
#[pyfunction]
fn ground_overlap(a: Vec<Vec<f64>>, atoms: usize, pattern: Vec<i8>, zeta: f64) -> PyResult<f64> {
    let h = hamiltonian(a, atoms)?;
    let idx = h.sector.index_of_pattern(&pattern).map_err(err)?;
    let spec = lowest_eigen(&h.with_zeta(zeta), 2).map_err(err)?;
    let mut unit = DVector::zeros(h.dim());
    unit[idx] = 1.0;
    Ok(spec.overlap_sq(0, &unit))
}

/// Anneal the programmed Hamiltonian through a linear ramp and report the
/// outcome as a dict.
#[pyfunction]
#[pyo3(signature = (a, atoms, tau, zeta_final=2.0, target=None, dt=2e-3, samples=200))]
fn anneal(
    py: Python<'_>,
    a: Vec<Vec<f64>>,
    atoms: usize,
    tau: f64,
    zeta_final: f64,
    target: Option<Vec<i8>>,
    dt: f64,
    samples: usize,
) -> PyResult<Py<PyDict>> {
    let h = hamiltonian(a, atoms)?;
    let schedule = AnnealSchedule { samples, ..AnnealSchedule::linear(zeta_final, tau) };
    let record =
        evolve(&h, &schedule, Integrator::SplitStep { dt }, target.as_deref()).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("times", record.times.clone())?;
    out.set_item("ground_overlap", record.ground_overlap.clone())?;
    out.set_item("final_sz", record.sz.last().unwrap().clone())?;
    out.set_item("norm_drift", record.norm_drift)?;
    out.set_item("magnetization_drift", record.magnetization_drift)?;
    if let Some(t) = &record.target_overlap {
        out.set_item("target_overlap", t.clone())?;
        out.set_item("final_target_overlap", *t.last().unwrap())?;
    }
    Ok(out.into())
}

/// Reference instance bundled with the crate.
#[pyfunction]
fn reference_instance(py: Python<'_>) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    out.set_item("memories", vec![presets::MEMORY_1.to_vec(), presets::MEMORY_2.to_vec()])?;
    out.set_item("inputs", vec![presets::INPUT_1.to_vec(), presets::INPUT_2.to_vec()])?;
    out.set_item("nu", presets::NU)?;
    out.set_item("sites", presets::N_SITES)?;
    out.set_item("atoms", presets::N_ATOMS)?;
    out.set_item("ideal_matrix_1", from_matrix(&presets::ideal_matrix(1)))?;
    out.set_item("ideal_matrix_2", from_matrix(&presets::ideal_matrix(2)))?;
    out.set_item("recovered_matrix_1", from_matrix(&presets::recovered_matrix_1()))?;
    out.set_item("reference_modes", presets::REFERENCE_MODES.to_vec())?;
    Ok(out.into())
}

/// Cavity-mode system at a lattice pose: the selected mode basis plus the
/// synthesis and readout operations that act on it.
#[pyclass]
struct ModeSystem {
    couplings: Vec<DVector<f64>>,
    basis: ModeBasis,
    sector: Arc<SpinSector>,
    #[pyo3(get)]
    mode_ids: Vec<(u32, u32)>,
    #[pyo3(get)]
    log_merit: f64,
    #[pyo3(get)]
    norm_ratio: f64,
}

#[pymethods]
impl ModeSystem {
    /// Run the greedy mode search on the bundled reference geometry/pose.
    #[staticmethod]
    fn build_reference() -> PyResult<Self> {
        let geom = presets::geometry();
        let pose = presets::pose();
        let wannier = presets::wannier().map_err(err)?;
        let pool = CandidatePool::build(&geom, &pose, &wannier, &presets::candidate_modes())
            .map_err(err)?;
        let sel = greedy_select(&pool, 36, 1).map_err(err)?;
        let couplings: Vec<DVector<f64>> =
            sel.indices.iter().map(|&i| pool.vectors[i].clone()).collect();
        let mats: Vec<DMatrix<f64>> = couplings.iter().map(single_mode_matrix).collect();
        let basis = ModeBasis::new(sel.mode_ids.clone(), mats).map_err(err)?;
        Ok(Self {
            couplings,
            basis,
            sector: Arc::new(SpinSector::new(presets::N_SITES, presets::N_ATOMS).map_err(err)?),
            mode_ids: sel.mode_ids,
            log_merit: sel.log_merit,
            norm_ratio: sel.norm_ratio,
        })
    }

    /// Synthesize laser inputs for a target matrix; returns a dict with the
    /// raw and quantized inputs and the recovered matrix.
    #[pyo3(signature = (target, zeta=1.0, step=0.1))]
    fn synthesize(
        &self,
        py: Python<'_>,
        target: Vec<Vec<f64>>,
        zeta: f64,
        step: f64,
    ) -> PyResult<Py<PyDict>> {
        let a = to_matrix(target)?;
        let prog = InteractionProgram::synthesize(&a, &self.basis, zeta, step).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("zeta", prog.zeta)?;
        out.set_item("zeta_recovered", prog.zeta_recovered)?;
        out.set_item("inputs", prog.inputs.iter().copied().collect::<Vec<f64>>())?;
        out.set_item(
            "quantized_over_zeta",
            prog.quantized_over_zeta().iter().copied().collect::<Vec<f64>>(),
        )?;
        out.set_item("recovered_target_scale", from_matrix(&prog.recovered_target_scale()))?;
        out.set_item("max_deviation", (prog.recovered_target_scale() - &a).amax())?;
        Ok(out.into())
    }

    /// Forward intensities of a ±1 pattern and the spins recovered from
    /// them by least squares.
    #[pyo3(signature = (pattern, kappa=1000.0, eta=100.0))]
    fn readout_roundtrip(
        &self,
        py: Python<'_>,
        pattern: Vec<i8>,
        kappa: f64,
        eta: f64,
    ) -> PyResult<Py<PyDict>> {
        let idx = self.sector.index_of_pattern(&pattern).map_err(err)?;
        let mut psi = DVector::from_element(self.sector.dim(), Complex64::new(0.0, 0.0));
        psi[idx] = Complex64::new(1.0, 0.0);
        let probe = PumpSettings::uniform_probe(self.couplings.len(), kappa, eta);
        let sig = output_signal(&self.sector, &psi, &self.couplings, &probe);
        let rec =
            invert_intensities(&sig.intensities, &self.couplings, &probe, 0.0).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("intensities", sig.intensities)?;
        out.set_item("spins", rec.spins.clone())?;
        out.set_item(
            "rounded",
            rec.spins.iter().map(|&s| if s >= 0.0 { 1i8 } else { -1 }).collect::<Vec<i8>>(),
        )?;
        out.set_item("residual", rec.residual)?;
        out.set_item("condition", rec.condition)?;
        Ok(out.into())
    }

    fn __repr__(&self) -> String {
        format!(
            "ModeSystem({} modes, log_merit {:.3}, norm_ratio {:.2})",
            self.mode_ids.len(),
            self.log_merit,
            self.norm_ratio
        )
    }
}

#[pymodule]
fn cavann(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sector_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(hebbian_weights, m)?)?;
    m.add_function(wrap_pyfunction!(recall_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(nu_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(ground_states, m)?)?;
    m.add_function(wrap_pyfunction!(hubbard_tunneling, m)?)?;
    m.add_function(wrap_pyfunction!(ramp_seconds, m)?)?;
    m.add_function(wrap_pyfunction!(min_gap, m)?)?;
    m.add_function(wrap_pyfunction!(ground_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(anneal, m)?)?;
    m.add_function(wrap_pyfunction!(reference_instance, m)?)?;
    m.add_class::<ModeSystem>()?;
    Ok(())
}
