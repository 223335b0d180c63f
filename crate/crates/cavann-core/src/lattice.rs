//! Lowest-band physics of the external 1-D optical lattice: Bloch bands of
//! the cos² potential, localized Wannier densities and Hubbard parameters.
//!
//! Energies are in recoil units E_R = (ħ k_L)²/(2 m_A); the lattice
//! wavenumber is k_L = π/d for site spacing d.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CoreError, Result};

/// Plane-wave cutoff: basis e^{i(q + 2 j k_L) x} with j = -cutoff..=cutoff.
const PLANE_WAVE_CUTOFF: usize = 15;

/// Lowest band energy and gauge-fixed plane-wave coefficients at
/// quasimomentum `q` (units of k_L) for depth `v_l` (units of E_R).
///
/// The potential is V_L sin²(k_L x) so that x = 0 is a lattice site; the
/// coefficient phases are fixed by ψ_q(0) real positive, which yields the
/// localized symmetric Wannier function.
pub(crate) fn lowest_band(v_l: f64, q: f64) -> Result<(f64, Vec<f64>)> {
    let c = PLANE_WAVE_CUTOFF as i64;
    let dim = (2 * c + 1) as usize;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (row, j) in (-c..=c).enumerate() {
        h[(row, row)] = (q + 2.0 * j as f64).powi(2) + v_l / 2.0;
        if row + 1 < dim {
            h[(row, row + 1)] = -v_l / 4.0;
            h[(row + 1, row)] = -v_l / 4.0;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut best = 0;
    for i in 1..dim {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut coeffs: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    let at_origin: f64 = coeffs.iter().sum();
    if at_origin.abs() < 1e-10 {
        return Err(CoreError::Numerical(format!(
            "Bloch gauge fix failed at q = {q}: |ψ_q(0)| = {:.2e}",
            at_origin.abs()
        )));
    }
    if at_origin < 0.0 {
        for v in &mut coeffs {
            *v = -*v;
        }
    }
    Ok((eig.eigenvalues[best], coeffs))
}

/// Nearest-neighbor tunneling J = (band max − band min)/4 of the lowest
/// band, in units of E_R. The edges are evaluated exactly at q = 0 and
/// q = k_L.
pub fn hubbard_tunneling(v_l: f64) -> Result<f64> {
    if v_l < 0.0 {
        return Err(CoreError::Config(format!("lattice depth {v_l} must be non-negative")));
    }
    let (center, _) = lowest_band(v_l, 0.0)?;
    let (edge, _) = lowest_band(v_l, 1.0)?;
    Ok((edge - center) / 4.0)
}

/// Options for the Wannier-density computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WannierOptions {
    /// Grid step in λ_ref units (≤ λ_ref/200 by default).
    pub step: f64,
    /// Half-window extent in lattice periods.
    pub extent_periods: f64,
    /// Number of quasimomentum points across the Brillouin zone.
    pub q_points: usize,
}

impl Default for WannierOptions {
    fn default() -> Self {
        Self { step: 1.0 / 200.0, extent_periods: 4.0, q_points: 64 }
    }
}

/// Sampled lowest-band Wannier density w²(x) on a symmetric grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WannierProfile {
    /// Lattice depth in E_R.
    pub v_l: f64,
    /// Lattice spacing d in λ_ref units.
    pub spacing: f64,
    /// Grid step in λ_ref units.
    pub step: f64,
    /// Density samples at x = (i − (len−1)/2) · step; ∫ w² dx = 1.
    pub density: Vec<f64>,
    /// RMS width sqrt(∫ x² w² dx).
    pub rms_width: f64,
}

impl WannierProfile {
    /// Grid coordinate of sample `i`.
    pub fn position(&self, i: usize) -> f64 {
        (i as f64 - (self.density.len() as f64 - 1.0) / 2.0) * self.step
    }

    /// Half-extent of the sampled window.
    pub fn half_window(&self) -> f64 {
        (self.density.len() as f64 - 1.0) / 2.0 * self.step
    }

    /// Trapezoid integral of `f(x) · w²(x)` over the grid.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let n = self.density.len();
        let mut acc = 0.0;
        for i in 0..n {
            let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += weight * self.density[i] * f(self.position(i));
        }
        acc * self.step
    }
}

/// Lowest-band Wannier density via plane-wave diagonalization over the
/// Brillouin zone, normalized to ∫ w² dx = 1.
pub fn wannier_density(v_l: f64, spacing: f64, opts: WannierOptions) -> Result<WannierProfile> {
    if !(v_l > 0.0) {
        return Err(CoreError::Config(format!("lattice depth {v_l} must be positive")));
    }
    if !(spacing > 0.0) || !(opts.step > 0.0) {
        return Err(CoreError::Config("spacing and grid step must be positive".into()));
    }
    let k_l = PI / spacing;
    let half = (opts.extent_periods * spacing / opts.step).ceil() as i64;
    let n_samples = (2 * half + 1) as usize;
    let mut amplitude = vec![0.0f64; n_samples];

    // Midpoint q-grid: ±q pairs are exact, so the sum over the half-zone of
    // cosine terms reproduces the full (real, even) Wannier function.
    let nq = opts.q_points;
    let c = PLANE_WAVE_CUTOFF as i64;
    for iq in 0..nq / 2 {
        let q = 2.0 * (iq as f64 + 0.5) / nq as f64; // in (0, 1)
        let (_, coeffs) = lowest_band(v_l, q)?;
        for (i, amp) in amplitude.iter_mut().enumerate() {
            let x = (i as i64 - half) as f64 * opts.step;
            let mut psi = 0.0;
            for (row, j) in (-c..=c).enumerate() {
                psi += coeffs[row] * ((q + 2.0 * j as f64) * k_l * x).cos();
            }
            *amp += 2.0 * psi / nq as f64;
        }
    }

    let mut density: Vec<f64> = amplitude.iter().map(|a| a * a).collect();
    // Discrete-q normalization: ∫ |w|² dx over all space equals d exactly,
    // so the windowed trapezoid mass must match d up to cutoff/window error.
    let mut mass = 0.0;
    for (i, d) in density.iter().enumerate() {
        let weight = if i == 0 || i + 1 == density.len() { 0.5 } else { 1.0 };
        mass += weight * d;
    }
    mass *= opts.step;
    if (mass / spacing - 1.0).abs() > 1e-8 {
        return Err(CoreError::Numerical(format!(
            "Wannier normalization failure: windowed mass/d = {:.12} (cutoff or window too small)",
            mass / spacing
        )));
    }
    for d in &mut density {
        *d /= mass;
    }

    let mut rms2 = 0.0;
    for (i, d) in density.iter().enumerate() {
        let weight = if i == 0 || i + 1 == density.len() { 0.5 } else { 1.0 };
        let x = (i as i64 - half) as f64 * opts.step;
        rms2 += weight * x * x * d;
    }
    rms2 *= opts.step;

    Ok(WannierProfile {
        v_l,
        spacing,
        step: opts.step,
        density,
        rms_width: rms2.sqrt(),
    })
}

/// Hubbard parameters of the lattice at depth `v_l`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HubbardParams {
    /// Tunneling rate in E_R.
    pub j: f64,
    /// 1-D on-site integral ∫ w⁴ dx in E_R·(1/λ_ref); the full U also needs
    /// the transverse confinement, which is not modeled here.
    pub u_proxy: f64,
    pub v_l: f64,
}

impl HubbardParams {
    pub fn from_profile(profile: &WannierProfile) -> Result<Self> {
        let j = hubbard_tunneling(profile.v_l)?;
        let n = profile.density.len();
        let mut u = 0.0;
        for (i, d) in profile.density.iter().enumerate() {
            let weight = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            u += weight * d * d;
        }
        Ok(Self { j, u_proxy: u * profile.step, v_l: profile.v_l })
    }
}
