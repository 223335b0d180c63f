//! Coupling vectors between lattice sites and cavity modes, and the rank-one
//! single-mode interaction matrices built from them.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::geometry::{HGMode, LatticePose};
use crate::lattice::WannierProfile;

/// Overlap of each site's Wannier density with the mode profile along the
/// lattice line: v_m^i = ∫ dx w²(x − x_i) u_c(r(x)), with the pump profile
/// equal to one on the line.
///
/// The quadrature is a fixed-step trapezoid over the full stored Wannier
/// window, which must cover at least six RMS widths per site.
pub fn coupling_vector(
    mode: &HGMode,
    pose: &LatticePose,
    wannier: &WannierProfile,
) -> Result<DVector<f64>> {
    if wannier.half_window() < 6.0 * wannier.rms_width {
        return Err(CoreError::Numerical(format!(
            "quadrature window ±{:.3} does not cover 6 Wannier RMS widths (±{:.3})",
            wannier.half_window(),
            6.0 * wannier.rms_width
        )));
    }
    pose.validate(&mode.geometry)?;
    let n = wannier.density.len();
    let mut v = DVector::zeros(pose.n_sites);
    for site in 0..pose.n_sites {
        let mut acc = 0.0;
        for i in 0..n {
            let weight = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            let s = wannier.position(i);
            acc += weight * wannier.density[i] * mode.amplitude(pose.point_at(site, s));
        }
        v[site] = acc * wannier.step;
    }
    Ok(v)
}

/// Single-mode interaction matrix V_m = v vᵀ (rank one, symmetric, PSD).
pub fn single_mode_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Frobenius inner product ⟨A, B⟩ = Tr(A Bᵀ).
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
