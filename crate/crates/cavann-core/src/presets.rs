//! Bundled reference instance: an eight-site associative-memory recall with
//! two stored patterns, the cavity geometry and lattice pose it runs on,
//! and frozen reference values used by the regression and acceptance
//! suites.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::geometry::{CavityGeometry, LatticePose};
use crate::hopfield::HopfieldProblem;
use crate::lattice::{wannier_density, WannierOptions, WannierProfile};
use crate::synthesis::ModeId;

pub const N_SITES: usize = 8;
pub const N_ATOMS: usize = 4;
pub const NU: f64 = 0.7;
pub const LATTICE_DEPTH: f64 = 10.0;

pub const MEMORY_1: [i8; 8] = [1, 1, -1, -1, 1, -1, 1, -1];
pub const MEMORY_2: [i8; 8] = [1, 1, -1, 1, 1, -1, -1, -1];
pub const INPUT_1: [i8; 8] = [1, 1, 1, -1, -1, -1, 1, -1];
pub const INPUT_2: [i8; 8] = [1, 1, -1, 1, -1, -1, -1, 1];

/// Cavity: length 50 λ_ref, R/L = 2/3.
pub fn geometry() -> CavityGeometry {
    CavityGeometry::new(50.0, 2.0 / 3.0).expect("reference geometry is stable")
}

/// Site spacing d = 1.2 · λ_100 / 2 with the mode's own (Gouy-corrected)
/// wavelength of the (100, 0, 0) mode.
pub fn lattice_spacing() -> f64 {
    let geom = geometry();
    let k = crate::geometry::resonant_wavenumber(&geom, 100, 0, 0).expect("valid mode");
    1.2 * (2.0 * std::f64::consts::PI / k) / 2.0
}

/// Reference pose: first site at (−2d, 0, −5d), tilted 47° from the cavity
/// axis in the x–z plane.
pub fn pose() -> LatticePose {
    let d = lattice_spacing();
    LatticePose::new(N_SITES, d, [-2.0 * d, 0.0, -5.0 * d], 47.0)
}

/// Candidate set: n = 100..=199, l = 0..=2, m = 0 (300 modes).
pub fn candidate_modes() -> Vec<ModeId> {
    let mut out = Vec::with_capacity(300);
    for n in 100..=199 {
        for l in 0..=2 {
            out.push((n, l));
        }
    }
    out
}

/// Wannier density of the reference lattice (V_L = 10 E_R).
pub fn wannier() -> Result<WannierProfile> {
    wannier_density(LATTICE_DEPTH, lattice_spacing(), WannierOptions::default())
}

pub fn memories() -> Vec<Vec<i8>> {
    vec![MEMORY_1.to_vec(), MEMORY_2.to_vec()]
}

/// Recall problem for input pattern 1 or 2.
pub fn problem(input: usize) -> HopfieldProblem {
    let chi = match input {
        1 => INPUT_1,
        2 => INPUT_2,
        other => panic!("reference instance has inputs 1 and 2, not {other}"),
    };
    HopfieldProblem::new(memories(), chi.to_vec(), NU).expect("reference instance is valid")
}

/// Ideal interaction matrix A = W + ν diag(χ) for input 1 or 2.
pub fn ideal_matrix(input: usize) -> DMatrix<f64> {
    let p = problem(input);
    let w = crate::hopfield::hebbian_weights(&p.memories).expect("valid memories");
    crate::hopfield::recall_matrix(&w, &p.input, p.nu).expect("valid recall")
}

/// Reference recovered interaction matrix for input 1, as implemented by
/// the quantized laser inputs (frozen at two decimals).
pub fn recovered_matrix_1() -> DMatrix<f64> {
    #[rustfmt::skip]
    let rows: [[f64; 8]; 8] = [
        [ 1.72,  1.01, -1.01,  0.02,  0.99, -1.00,  0.00, -0.97],
        [ 1.01,  1.67, -0.91, -0.02,  0.99, -0.99,  0.00, -1.01],
        [-1.01, -0.91,  1.66,  0.03, -1.00,  0.98,  0.01,  1.01],
        [ 0.02, -0.02,  0.03,  0.27,  0.05,  0.03, -1.00, -0.00],
        [ 0.99,  0.99, -1.00,  0.05,  0.33, -0.97, -0.03, -1.00],
        [-1.00, -0.99,  0.98,  0.03, -0.97,  0.29,  0.01,  0.96],
        [ 0.00,  0.00,  0.01, -1.00, -0.03,  0.01,  1.70,  0.02],
        [-0.97, -1.01,  1.01, -0.00, -1.00,  0.96,  0.02,  0.30],
    ];
    DMatrix::from_fn(8, 8, |i, j| rows[i][j])
}

/// Reference quantized inputs f̃/ζ for input 1 (one decimal place).
pub const QUANTIZED_INPUTS_1: [f64; 36] = [
    -23.0, 1.5, 1.2, 0.3, 0.6, -0.2, -5.3, 1.0, -0.1, -0.9, -0.4, -1.3, 2.0, 1.6, -0.4, -0.6,
    -0.6, -0.2, 0.1, 2.2, -0.9, 2.4, -0.5, 0.0, -0.6, 2.0, 1.0, -0.1, -0.5, 2.1, -0.8, -1.7, 1.2,
    6.8, 4.5, -0.6,
];

/// Reference quantized inputs f̃/ζ for input 2.
pub const QUANTIZED_INPUTS_2: [f64; 36] = [
    9.0, 1.5, 2.8, -0.1, 2.0, -2.1, 3.4, -7.7, -1.7, -1.9, 0.6, -2.7, -1.9, 2.5, -1.4, 2.2, -1.7,
    -3.6, 6.5, 5.5, -1.3, 4.9, -1.0, -0.7, -0.2, -3.5, -0.1, -1.6, 1.3, 0.1, 0.2, -2.4, -0.5,
    12.2, 3.9, -0.2,
];

/// Reference selected mode set (n, l) the quantized inputs refer to.
pub const REFERENCE_MODES: [ModeId; 36] = [
    (100, 2), (105, 2), (107, 1), (114, 0), (117, 1), (120, 1), (122, 2), (127, 1), (130, 0),
    (135, 0), (135, 1), (138, 1), (139, 2), (140, 0), (140, 2), (145, 1), (149, 2), (152, 1),
    (152, 2), (154, 0), (159, 0), (159, 1), (161, 2), (164, 0), (166, 1), (168, 2), (173, 2),
    (178, 0), (178, 2), (180, 1), (191, 1), (193, 2), (196, 1), (198, 0), (198, 2), (199, 0),
];

/// Frozen reference values with their tolerances.
pub mod golden {
    /// Sector dimension of the 8-site, 4-atom instance.
    pub const SECTOR_DIM: usize = 70;
    /// Minimum spectral gap of the recovered input-1 matrix, units of J.
    pub const MIN_GAP: f64 = 0.56;
    pub const MIN_GAP_TOL: f64 = 0.02;
    /// Ramp value where the minimum gap sits, units of J.
    pub const ZETA_STAR: f64 = 0.28;
    pub const ZETA_STAR_TOL: f64 = 0.02;
    /// Ground-state overlap with memory 1 at ζ = 2J.
    pub const GROUND_OVERLAP: f64 = 0.976;
    pub const GROUND_OVERLAP_TOL: f64 = 0.005;
    /// Final state overlap with memory 1 after a Jτ = 50 linear ramp.
    pub const ANNEAL_OVERLAP: f64 = 0.959;
    pub const ANNEAL_OVERLAP_TOL: f64 = 0.01;
    /// Bias bound for recalling input 1.
    pub const NU_BOUND: f64 = 4.0;
    /// Tunneling at V_L = 10 E_R, units of E_R.
    pub const J_AT_DEPTH_10: f64 = 0.02;
    pub const J_REL_TOL: f64 = 0.15;
    /// Recoil rate E_R/ħ of the reference atom, rad/s.
    pub const RECOIL_RATE: f64 = 24_000.0;
    /// Wall-clock ramp time for Jτ = 50, seconds.
    pub const TAU_SECONDS: f64 = 0.1;
    pub const TAU_REL_TOL: f64 = 0.10;
    /// Spanned volume sqrt(det G) of the reference mode selection.
    pub const SELECTION_VOLUME: f64 = 3.21e-11;
    /// Allowed |ln V − ln V_ref|.
    pub const SELECTION_LOG_TOL: f64 = 5.0;
}
