//! Time evolution through the annealing ramp: ζ(t) is switched on from
//! zero, the state starts in the kinetic ground state and observables are
//! recorded along the way.
//!
//! Units: ħ = 1, energies and rates in units of J unless noted.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::spin::{lowest_eigen, SpinHamiltonian, Spectrum};

/// Interaction ramp shape.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Ramp {
    /// ζ(t) = ζ_f · t / τ.
    Linear,
    /// ζ(t) = ζ_f throughout (frozen Hamiltonian).
    Hold,
}

impl Ramp {
    fn value(&self, zeta_f: f64, tau: f64, t: f64) -> f64 {
        match self {
            Ramp::Linear => zeta_f * t / tau,
            Ramp::Hold => zeta_f,
        }
    }

    /// ∫ ζ(t) dt over [t0, t1].
    fn integral(&self, zeta_f: f64, tau: f64, t0: f64, t1: f64) -> f64 {
        match self {
            Ramp::Linear => zeta_f * (t1 * t1 - t0 * t0) / (2.0 * tau),
            Ramp::Hold => zeta_f * (t1 - t0),
        }
    }
}

/// Tunneling-rate profile during the ramp.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum JProfile {
    Constant,
    /// J(t) = J · exp(−rate · t); models deepening the lattice while
    /// ramping the interactions.
    ExpDecay { rate: f64 },
}

impl JProfile {
    /// ∫ J(t)/J dt over [t0, t1].
    fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self {
            JProfile::Constant => t1 - t0,
            JProfile::ExpDecay { rate } => {
                if rate.abs() < 1e-300 {
                    t1 - t0
                } else {
                    ((-rate * t0).exp() - (-rate * t1).exp()) / rate
                }
            }
        }
    }
}

/// Annealing schedule: ramp ζ from 0 to `zeta_final` over time `tau`
/// (1/J units), recording `samples` uniformly spaced outputs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub ramp: Ramp,
    pub zeta_final: f64,
    pub tau: f64,
    pub j_profile: JProfile,
    pub samples: usize,
}

impl AnnealSchedule {
    pub fn linear(zeta_final: f64, tau: f64) -> Self {
        Self { ramp: Ramp::Linear, zeta_final, tau, j_profile: JProfile::Constant, samples: 500 }
    }

    pub fn zeta(&self, t: f64) -> f64 {
        self.ramp.value(self.zeta_final, self.tau, t)
    }
}

/// Propagator choice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Integrator {
    /// Fourth-order Yoshida composition of exactly integrated kinetic and
    /// interaction sub-flows; unitary to rounding. `dt` in 1/J units.
    SplitStep { dt: f64 },
    /// Adaptive Dormand-Prince 5(4) on the full right-hand side.
    DormandPrince { rtol: f64, atol: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::SplitStep { dt: 2e-3 }
    }
}

/// Time series of the annealing run.
#[derive(Debug, Clone)]
pub struct AnnealRecord {
    /// Sample times (1/J units).
    pub times: Vec<f64>,
    /// State vector at each sample.
    pub states: Vec<DVector<Complex64>>,
    /// Per-site ⟨σᶻᵢ⟩ at each sample.
    pub sz: Vec<Vec<f64>>,
    /// Overlap |⟨φ₀(ζ(t))|ψ(t)⟩|² with the instantaneous ground state.
    pub ground_overlap: Vec<f64>,
    /// Overlap |⟨target|ψ(t)⟩|² when a target pattern was supplied.
    pub target_overlap: Option<Vec<f64>>,
    /// max over samples of |‖ψ‖ − 1|.
    pub norm_drift: f64,
    /// max over samples of |Σᵢ⟨σᶻᵢ⟩ − (2 N_A − N)|.
    pub magnetization_drift: f64,
}

/// Ground state of the pure hopping Hamiltonian (ζ = 0); unique because
/// the adjacent-swap graph is connected within the sector.
pub fn initial_state(h: &SpinHamiltonian) -> Result<DVector<f64>> {
    if h.dim() < 1 {
        return Err(CoreError::Validation("empty sector".into()));
    }
    let spec = lowest_eigen(&h.with_zeta(0.0), 1)?;
    Ok(spec.vectors[0].clone())
}

/// Per-site ⟨σᶻᵢ⟩ of a normalized sector state.
pub fn site_magnetizations(h: &SpinHamiltonian, psi: &DVector<Complex64>) -> Vec<f64> {
    let sector = &h.sector;
    let mut sz = vec![0.0; sector.n_sites];
    for (idx, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        for (site, value) in sz.iter_mut().enumerate() {
            *value += w * sector.spin(idx, site);
        }
    }
    sz
}

struct KineticEigen {
    vectors: DMatrix<Complex64>,
    vectors_t: DMatrix<Complex64>,
    energies: DVector<f64>,
}

impl KineticEigen {
    /// Eigenbasis of the hopping part at unit J.
    fn new(h: &SpinHamiltonian) -> Self {
        let eig = SymmetricEigen::new(h.with_zeta(0.0).dense() / h.j);
        Self {
            vectors: eig.eigenvectors.map(Complex::from),
            vectors_t: eig.eigenvectors.transpose().map(Complex::from),
            energies: eig.eigenvalues,
        }
    }

    /// ψ ← exp(−i θ K̂) ψ with K̂ the unit-J hopping operator.
    fn apply(&self, theta: f64, psi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut coeff = &self.vectors_t * psi;
        for (c, &e) in coeff.iter_mut().zip(self.energies.iter()) {
            *c *= Complex64::new(0.0, -theta * e).exp();
        }
        &self.vectors * coeff
    }
}

fn apply_diagonal_phase(diag: &DVector<f64>, weight: f64, psi: &mut DVector<Complex64>) {
    for (a, &d) in psi.iter_mut().zip(diag.iter()) {
        *a *= Complex64::new(0.0, -weight * d).exp();
    }
}

/// One Strang substep [t0, t1]: half interaction, full kinetic, half
/// interaction, each sub-flow integrated exactly in time.
fn strang_substep(
    h: &SpinHamiltonian,
    kin: &KineticEigen,
    schedule: &AnnealSchedule,
    t0: f64,
    t1: f64,
    psi: &mut DVector<Complex64>,
) {
    let mid = 0.5 * (t0 + t1);
    let diag = h.problem_diagonal();
    apply_diagonal_phase(diag, schedule.ramp.integral(schedule.zeta_final, schedule.tau, t0, mid), psi);
    let theta = h.j * schedule.j_profile.integral(t0, t1);
    *psi = kin.apply(theta, psi);
    apply_diagonal_phase(diag, schedule.ramp.integral(schedule.zeta_final, schedule.tau, mid, t1), psi);
}

/// Fourth-order Yoshida composition coefficients.
const YOSHIDA_W1: f64 = 1.3512071919596578; // 1 / (2 - 2^(1/3))
const YOSHIDA_W0: f64 = -1.7024143839193153; // -2^(1/3) · w1

fn split_step(
    h: &SpinHamiltonian,
    kin: &KineticEigen,
    schedule: &AnnealSchedule,
    t0: f64,
    dt: f64,
    psi: &mut DVector<Complex64>,
) {
    let mut t = t0;
    for w in [YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1] {
        let t_next = t + w * dt;
        strang_substep(h, kin, schedule, t, t_next, psi);
        t = t_next;
    }
}

/// −i H(t) ψ for the adaptive integrator.
fn schroedinger_rhs(
    h: &SpinHamiltonian,
    schedule: &AnnealSchedule,
    t: f64,
    psi: &DVector<Complex64>,
    out: &mut DVector<Complex64>,
) {
    let zeta = schedule.zeta(t);
    let jt = h.j
        * match schedule.j_profile {
            JProfile::Constant => 1.0,
            JProfile::ExpDecay { rate } => (-rate * t).exp(),
        };
    let diag = h.problem_diagonal();
    for i in 0..psi.len() {
        out[i] = Complex64::new(0.0, -1.0) * zeta * diag[i] * psi[i];
    }
    for &(a, b) in h.hop_pairs() {
        let (a, b) = (a as usize, b as usize);
        out[a] += Complex64::new(0.0, 1.0) * jt * psi[b];
        out[b] += Complex64::new(0.0, 1.0) * jt * psi[a];
    }
}

/// Dormand-Prince 5(4) with PI step control from `t0` to `t1`.
fn dormand_prince(
    h: &SpinHamiltonian,
    schedule: &AnnealSchedule,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
    psi: &mut DVector<Complex64>,
) -> Result<()> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let dim = psi.len();
    let mut k: Vec<DVector<Complex64>> = (0..7).map(|_| DVector::zeros(dim)).collect();
    let mut t = t0;
    let mut dt = ((t1 - t0) / 100.0).min(0.1);
    let mut err_prev: f64 = 1.0;
    let mut tmp = DVector::zeros(dim);
    let mut steps = 0usize;
    schroedinger_rhs(h, schedule, t, psi, &mut k[0]);
    while t < t1 {
        if dt < 1e-12 {
            return Err(CoreError::Numerical(format!(
                "integration failure: step size underflow at t = {t:.6}"
            )));
        }
        let dt_eff = dt.min(t1 - t);
        for stage in 0..6 {
            tmp.copy_from(psi);
            for (j, kj) in k.iter().take(stage + 1).enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    tmp.axpy(Complex64::new(dt_eff * a, 0.0), kj, Complex64::new(1.0, 0.0));
                }
            }
            let (_, after) = k.split_at_mut(stage + 1);
            schroedinger_rhs(h, schedule, t + C[stage] * dt_eff, &tmp, &mut after[0]);
        }
        // 5th-order solution is stage 6's argument (FSAL): tmp currently
        // holds it after the last stage loop iteration
        let mut err_norm: f64 = 0.0;
        for i in 0..dim {
            let mut err = Complex64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                err += E[j] * kj[i] * dt_eff;
            }
            let scale = atol + rtol * psi[i].norm().max(tmp[i].norm());
            err_norm = err_norm.max(err.norm() / scale);
        }
        if err_norm <= 1.0 {
            t += dt_eff;
            psi.copy_from(&tmp);
            let last = k[6].clone();
            k[0].copy_from(&last);
            err_prev = err_norm.max(1e-4);
            steps += 1;
            if steps > 50_000_000 {
                return Err(CoreError::Numerical("integration failure: step budget exhausted".into()));
            }
        }
        let order = 0.2;
        let beta = 0.08;
        let factor = 0.9 * err_norm.max(1e-10).powf(-order) * err_prev.powf(beta);
        dt = dt_eff * factor.clamp(0.2, 5.0);
    }
    Ok(())
}

/// Integrate i dψ/dt = H(ζ(t)) ψ from the kinetic ground state, recording
/// observables at the schedule's sample times.
pub fn evolve(
    h: &SpinHamiltonian,
    schedule: &AnnealSchedule,
    integrator: Integrator,
    target: Option<&[i8]>,
) -> Result<AnnealRecord> {
    if !(schedule.tau > 0.0) || schedule.samples < 2 {
        return Err(CoreError::Validation("schedule needs tau > 0 and >= 2 samples".into()));
    }
    if matches!(schedule.ramp, Ramp::Linear) && schedule.zeta_final < 0.0 {
        return Err(CoreError::Validation(
            "linear ramp must be non-decreasing: zeta_final >= 0".into(),
        ));
    }
    if !(h.j > 0.0) {
        return Err(CoreError::Validation("annealing needs a positive tunneling rate".into()));
    }
    let target_idx = match target {
        Some(pattern) => Some(h.sector.index_of_pattern(pattern)?),
        None => None,
    };
    let psi0 = initial_state(h)?;
    let mut psi: DVector<Complex64> = psi0.map(|x| Complex64::new(x, 0.0));
    let kin = KineticEigen::new(h);

    let n_samples = schedule.samples;
    let sample_times: Vec<f64> =
        (0..n_samples).map(|i| schedule.tau * i as f64 / (n_samples - 1) as f64).collect();

    let mut record = AnnealRecord {
        times: sample_times.clone(),
        states: Vec::with_capacity(n_samples),
        sz: Vec::with_capacity(n_samples),
        ground_overlap: Vec::with_capacity(n_samples),
        target_overlap: target_idx.map(|_| Vec::with_capacity(n_samples)),
        norm_drift: 0.0,
        magnetization_drift: 0.0,
    };

    let mag0 = 2.0 * h.sector.n_up as f64 - h.sector.n_sites as f64;
    let sample = |t: f64, psi: &DVector<Complex64>, rec: &mut AnnealRecord| -> Result<()> {
        let norm = psi.norm();
        rec.norm_drift = rec.norm_drift.max((norm - 1.0).abs());
        if (norm - 1.0).abs() > 1e-6 {
            return Err(CoreError::Numerical(format!(
                "integration failure: norm drift {:.2e} at t = {t:.4}",
                (norm - 1.0).abs()
            )));
        }
        let sz = site_magnetizations(h, psi);
        let mag: f64 = sz.iter().sum();
        rec.magnetization_drift = rec.magnetization_drift.max((mag - mag0).abs());
        let inst: Spectrum = lowest_eigen(&h.with_zeta(schedule.zeta(t)), 2)?;
        let overlap = degenerate_overlap(&inst, psi);
        rec.ground_overlap.push(overlap);
        if let (Some(idx), Some(tov)) = (target_idx, rec.target_overlap.as_mut()) {
            tov.push(psi[idx].norm_sqr());
        }
        rec.sz.push(sz);
        rec.states.push(psi.clone());
        Ok(())
    };

    match integrator {
        Integrator::SplitStep { dt } => {
            if !(dt > 0.0) {
                return Err(CoreError::Validation("split-step dt must be positive".into()));
            }
            sample(0.0, &psi, &mut record)?;
            for w in sample_times.windows(2) {
                let (a, b) = (w[0], w[1]);
                let n_steps = ((b - a) / dt).ceil().max(1.0) as usize;
                let step = (b - a) / n_steps as f64;
                for s in 0..n_steps {
                    split_step(h, &kin, schedule, a + s as f64 * step, step, &mut psi);
                }
                sample(b, &psi, &mut record)?;
            }
        }
        Integrator::DormandPrince { rtol, atol } => {
            sample(0.0, &psi, &mut record)?;
            for w in sample_times.windows(2) {
                dormand_prince(h, schedule, w[0], w[1], rtol, atol, &mut psi)?;
                sample(w[1], &psi, &mut record)?;
            }
        }
    }
    Ok(record)
}

/// Squared overlap with the ground state, summed over a degenerate ground
/// manifold.
fn degenerate_overlap(spec: &Spectrum, psi: &DVector<Complex64>) -> f64 {
    let e0 = spec.energies[0];
    let scale = 1e-10 * (1.0 + e0.abs());
    spec.energies
        .iter()
        .zip(&spec.vectors)
        .filter(|(e, _)| (**e - e0).abs() <= scale)
        .map(|(_, phi)| {
            let amp: Complex64 =
                phi.iter().zip(psi.iter()).map(|(&p, &a)| Complex64::new(p, 0.0).conj() * a).sum();
            amp.norm_sqr()
        })
        .sum()
}

/// Outcome of a full recall run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecallSummary {
    /// Final |⟨pattern|ψ(τ)⟩|² per candidate pattern.
    pub final_overlaps: Vec<f64>,
    /// Index of the best-overlap pattern.
    pub winner: usize,
    /// Final per-site ⟨σᶻᵢ⟩.
    pub final_sz: Vec<f64>,
    pub ground_overlap_final: f64,
    pub norm_drift: f64,
}

/// Anneal under `a` and report final overlaps with each candidate pattern.
pub fn recall_run(
    h: &SpinHamiltonian,
    schedule: &AnnealSchedule,
    integrator: Integrator,
    patterns: &[Vec<i8>],
) -> Result<(RecallSummary, AnnealRecord)> {
    if patterns.is_empty() {
        return Err(CoreError::Validation("need at least one candidate pattern".into()));
    }
    let record = evolve(h, schedule, integrator, None)?;
    let psi = record.states.last().expect("samples >= 2");
    let mut final_overlaps = Vec::with_capacity(patterns.len());
    for p in patterns {
        let idx = h.sector.index_of_pattern(p)?;
        final_overlaps.push(psi[idx].norm_sqr());
    }
    let winner = (0..patterns.len())
        .max_by(|&a, &b| final_overlaps[a].partial_cmp(&final_overlaps[b]).unwrap())
        .unwrap();
    let summary = RecallSummary {
        final_overlaps,
        winner,
        final_sz: record.sz.last().unwrap().clone(),
        ground_overlap_final: *record.ground_overlap.last().unwrap(),
        norm_drift: record.norm_drift,
    };
    Ok((summary, record))
}

/// Wall-clock annealing time: τ_seconds = (Jτ) / (J[E_R] · E_R-rate).
pub fn unit_conversion(j_tau: f64, j_in_recoil: f64, recoil_rate: f64) -> Result<f64> {
    if !(j_in_recoil > 0.0) || !(recoil_rate > 0.0) {
        return Err(CoreError::Validation("J and E_R/ħ must be positive".into()));
    }
    Ok(j_tau / (j_in_recoil * recoil_rate))
}
