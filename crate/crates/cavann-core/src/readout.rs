//! Forward model of the cavity output light for a given atomic state and
//! the least-squares inversions recovering occupations and correlations.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sector::SpinSector;
use crate::synthesis::PumpSettings;

/// Singular values below `max_sv · RANK_TOL` count as rank deficiency.
const RANK_TOL: f64 = 1e-10;

/// Per-mode output field and intensity expectations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSignal {
    /// Field expectations ⟨a_m⟩.
    pub fields: Vec<Complex64>,
    /// Intensities ⟨a†_m a_m⟩.
    pub intensities: Vec<f64>,
}

/// Site occupations ⟨n_i⟩ = (⟨σᶻᵢ⟩ + 1)/2 of a normalized sector state.
pub fn occupations(sector: &SpinSector, psi: &DVector<Complex64>) -> DVector<f64> {
    let mut n = DVector::zeros(sector.n_sites);
    for (idx, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        let bits = sector.state(idx);
        for site in 0..sector.n_sites {
            if (bits >> site) & 1 == 1 {
                n[site] += w;
            }
        }
    }
    n
}

/// Two-point correlations ⟨n_i n_j⟩ of a normalized sector state.
pub fn correlations(sector: &SpinSector, psi: &DVector<Complex64>) -> DMatrix<f64> {
    let n = sector.n_sites;
    let mut c = DMatrix::zeros(n, n);
    for (idx, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        let bits = sector.state(idx);
        for i in 0..n {
            if (bits >> i) & 1 == 0 {
                continue;
            }
            for j in 0..n {
                if (bits >> j) & 1 == 1 {
                    c[(i, j)] += w;
                }
            }
        }
    }
    c
}

/// Adiabatic cavity fields ⟨a_m⟩ = η_m Σ_i v_m^i ⟨n_i⟩ / (Δ_m + iκ_m).
pub fn field_expectations(
    occupations: &DVector<f64>,
    couplings: &[DVector<f64>],
    pumps: &PumpSettings,
) -> Vec<Complex64> {
    couplings
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let drive = pumps.eta[m] * v.dot(occupations);
            drive / Complex64::new(pumps.delta[m], pumps.kappa[m])
        })
        .collect()
}

/// Output intensities ⟨a†_m a_m⟩ = η_m²/(Δ_m²+κ_m²) Σ_ij V_m^ij ⟨n_i n_j⟩.
pub fn intensities(
    correlations: &DMatrix<f64>,
    couplings: &[DVector<f64>],
    pumps: &PumpSettings,
) -> Vec<f64> {
    couplings
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let quad = (v.transpose() * correlations * v)[(0, 0)];
            pumps.intensity_prefactor(m) * quad
        })
        .collect()
}

/// Both output observables for a sector state.
pub fn output_signal(
    sector: &SpinSector,
    psi: &DVector<Complex64>,
    couplings: &[DVector<f64>],
    pumps: &PumpSettings,
) -> OutputSignal {
    let occ = occupations(sector, psi);
    let corr = correlations(sector, psi);
    OutputSignal {
        fields: field_expectations(&occ, couplings, pumps),
        intensities: intensities(&corr, couplings, pumps),
    }
}

/// Result of inverting measured signals back to atomic observables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Symmetric ⟨n_i n_j⟩ (only from the intensity pathway).
    pub correlations: Option<Vec<Vec<f64>>>,
    /// ⟨n_i⟩ per site.
    pub occupations: Vec<f64>,
    /// ⟨σᶻᵢ⟩ = 2⟨n_i⟩ − 1.
    pub spins: Vec<f64>,
    /// Sites whose occupation the data actually determines.
    pub resolved: Vec<bool>,
    /// Residual ‖D x − y‖ of the least-squares solve.
    pub residual: f64,
    /// Condition number of the design matrix.
    pub condition: f64,
    /// Ridge parameter used (0 = plain least squares).
    pub ridge: f64,
}

fn svd_least_squares(
    design: &DMatrix<f64>,
    rhs: &DVector<f64>,
    ridge: f64,
    require_full_rank: bool,
) -> Result<(DVector<f64>, f64, f64, Vec<bool>)> {
    let svd = SVD::new(design.clone(), true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min_sv = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let null_dim = svd
        .singular_values
        .iter()
        .filter(|&&s| s <= max_sv * RANK_TOL)
        .count()
        + design.ncols().saturating_sub(svd.singular_values.len());
    if require_full_rank && null_dim > 0 {
        return Err(CoreError::RankDeficient { null_dim });
    }
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut coeffs = u.transpose() * rhs;
    for (i, c) in coeffs.iter_mut().enumerate() {
        let s = svd.singular_values[i];
        *c = if s > max_sv * RANK_TOL { *c * s / (s * s + ridge) } else { 0.0 };
    }
    let x = vt.transpose() * coeffs;
    let residual = (design * &x - rhs).norm();
    let condition = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    // a column is resolved when its unit vector lies in the row space,
    // i.e. its projection onto the well-conditioned right-singular
    // directions carries the full weight
    let resolved: Vec<bool> = (0..design.ncols())
        .map(|col| {
            let weight: f64 = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > max_sv * RANK_TOL)
                .map(|i| vt[(i, col)] * vt[(i, col)])
                .sum();
            weight > 1.0 - 1e-8
        })
        .collect();
    Ok((x, residual, condition, resolved))
}

/// Recover the symmetric correlation matrix from per-mode intensities by a
/// least-squares solve of I_m / pref_m = ⟨V_m, C⟩, then read occupations
/// off the diagonal (hardcore limit: ⟨n_i²⟩ = ⟨n_i⟩).
pub fn invert_intensities(
    measured: &[f64],
    couplings: &[DVector<f64>],
    pumps: &PumpSettings,
    ridge: f64,
) -> Result<Reconstruction> {
    let n = couplings
        .first()
        .ok_or_else(|| CoreError::Validation("no coupling vectors".into()))?
        .len();
    let unknowns = n * (n + 1) / 2;
    let active: Vec<usize> = (0..couplings.len())
        .filter(|&m| pumps.intensity_prefactor(m) > 0.0)
        .collect();
    if active.len() < unknowns {
        return Err(CoreError::RankDeficient { null_dim: unknowns - active.len() });
    }
    // columns enumerate the upper triangle (i ≤ j); off-diagonal entries
    // appear twice in Σ_ij
    let design = DMatrix::from_fn(active.len(), unknowns, |row, col| {
        let m = active[row];
        let (i, j) = triangle_index(col, n);
        let v = &couplings[m];
        let w = if i == j { 1.0 } else { 2.0 };
        w * v[i] * v[j]
    });
    let rhs = DVector::from_fn(active.len(), |row, _| {
        measured[active[row]] / pumps.intensity_prefactor(active[row])
    });
    let (x, residual, condition, _) = svd_least_squares(&design, &rhs, ridge, true)?;
    let mut corr = vec![vec![0.0; n]; n];
    for col in 0..unknowns {
        let (i, j) = triangle_index(col, n);
        corr[i][j] = x[col];
        corr[j][i] = x[col];
    }
    let occupations: Vec<f64> = (0..n).map(|i| corr[i][i]).collect();
    let spins: Vec<f64> = occupations.iter().map(|&o| 2.0 * o - 1.0).collect();
    Ok(Reconstruction {
        correlations: Some(corr),
        occupations,
        spins,
        resolved: vec![true; n],
        residual,
        condition,
        ridge,
    })
}

/// Recover occupations from field expectations: the real drive
/// Re[⟨a_m⟩ (Δ_m + iκ_m)] / η_m = Σ_i v_m^i ⟨n_i⟩ gives an M×N system.
pub fn invert_fields(
    fields: &[Complex64],
    couplings: &[DVector<f64>],
    pumps: &PumpSettings,
    ridge: f64,
) -> Result<Reconstruction> {
    let n = couplings
        .first()
        .ok_or_else(|| CoreError::Validation("no coupling vectors".into()))?
        .len();
    let active: Vec<usize> = (0..couplings.len()).filter(|&m| pumps.eta[m] > 0.0).collect();
    if active.is_empty() {
        return Err(CoreError::RankDeficient { null_dim: n });
    }
    let design = DMatrix::from_fn(active.len(), n, |row, col| couplings[active[row]][col]);
    let rhs = DVector::from_fn(active.len(), |row, _| {
        let m = active[row];
        (fields[m] * Complex64::new(pumps.delta[m], pumps.kappa[m])).re / pumps.eta[m]
    });
    let (x, residual, condition, resolved) = svd_least_squares(&design, &rhs, ridge, false)?;
    let occupations: Vec<f64> = x.iter().copied().collect();
    let spins: Vec<f64> = occupations.iter().map(|&o| 2.0 * o - 1.0).collect();
    Ok(Reconstruction {
        correlations: None,
        occupations,
        spins,
        resolved,
        residual,
        condition,
        ridge,
    })
}

/// (i, j) with i ≤ j for the `col`-th upper-triangle entry, row-major.
fn triangle_index(col: usize, n: usize) -> (usize, usize) {
    let mut c = col;
    for i in 0..n {
        let row_len = n - i;
        if c < row_len {
            return (i, i + c);
        }
        c -= row_len;
    }
    unreachable!("column {col} outside the {n}-site upper triangle")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector::SpinSector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, seed: u64) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = DVector::from_fn(dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        psi /= Complex64::new(psi.norm(), 0.0);
        psi
    }

    fn random_couplings(modes: usize, n: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..modes)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn empty_lattice_emits_nothing() {
        let sector = SpinSector::new(4, 0).unwrap();
        let psi = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let couplings = random_couplings(5, 4, 1);
        let pumps = PumpSettings::uniform_probe(5, 1000.0, 30.0);
        let sig = output_signal(&sector, &psi, &couplings, &pumps);
        for (f, i) in sig.fields.iter().zip(&sig.intensities) {
            assert!(f.norm() < 1e-14);
            assert!(i.abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_coupling_counts_atoms() {
        let sector = SpinSector::new(5, 3).unwrap();
        let psi = random_state(sector.dim(), 7);
        let ones = vec![DVector::from_element(5, 1.0)];
        let pumps = PumpSettings::uniform_probe(1, 100.0, 10.0);
        let sig = output_signal(&sector, &psi, &ones, &pumps);
        let expect = pumps.eta[0] * 3.0 / Complex64::new(pumps.delta[0], pumps.kappa[0]);
        assert!((sig.fields[0] - expect).norm() < 1e-10);
        // intensity: fixed total occupation N_A² in the quadratic form
        let expect_i = pumps.intensity_prefactor(0) * 9.0;
        assert!((sig.intensities[0] - expect_i).abs() < 1e-10);
    }

    #[test]
    fn basis_state_intensity_is_squared_field_drive() {
        let sector = SpinSector::new(6, 3).unwrap();
        let couplings = random_couplings(4, 6, 3);
        let pumps = PumpSettings::uniform_probe(4, 500.0, 20.0);
        let mut psi = DVector::from_element(sector.dim(), Complex64::new(0.0, 0.0));
        psi[11] = Complex64::new(1.0, 0.0);
        let sig = output_signal(&sector, &psi, &couplings, &pumps);
        let occ = occupations(&sector, &psi);
        for m in 0..4 {
            let drive: f64 = couplings[m].dot(&occ);
            let expect = pumps.intensity_prefactor(m) * drive * drive;
            assert!((sig.intensities[m] - expect).abs() < 1e-12);
            assert!((sig.fields[m].norm_sqr() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn field_expectation_matches_amplitude_expansion() {
        // brute-force over basis amplitudes
        let sector = SpinSector::new(5, 2).unwrap();
        let psi = random_state(sector.dim(), 9);
        let couplings = random_couplings(3, 5, 5);
        let pumps = PumpSettings::uniform_probe(3, 800.0, 15.0);
        let sig = output_signal(&sector, &psi, &couplings, &pumps);
        for m in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, amp) in psi.iter().enumerate() {
                let bits = sector.state(idx);
                let mut drive = 0.0;
                for site in 0..5 {
                    if (bits >> site) & 1 == 1 {
                        drive += couplings[m][site];
                    }
                }
                acc += amp.norm_sqr() * pumps.eta[m] * drive
                    / Complex64::new(pumps.delta[m], pumps.kappa[m]);
            }
            assert!((sig.fields[m] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn intensity_matches_pairwise_expansion() {
        let sector = SpinSector::new(5, 2).unwrap();
        let psi = random_state(sector.dim(), 13);
        let couplings = random_couplings(3, 5, 6);
        let pumps = PumpSettings::uniform_probe(3, 800.0, 15.0);
        let sig = output_signal(&sector, &psi, &couplings, &pumps);
        for m in 0..3 {
            let mut acc = 0.0;
            for (idx, amp) in psi.iter().enumerate() {
                let bits = sector.state(idx);
                let mut drive = 0.0;
                for site in 0..5 {
                    if (bits >> site) & 1 == 1 {
                        drive += couplings[m][site];
                    }
                }
                acc += amp.norm_sqr() * drive * drive;
            }
            assert!((sig.intensities[m] - pumps.intensity_prefactor(m) * acc).abs() < 1e-12);
            assert!(sig.intensities[m] >= 0.0);
        }
    }

    #[test]
    fn field_inversion_round_trip() {
        let sector = SpinSector::new(6, 3).unwrap();
        let psi = random_state(sector.dim(), 21);
        let couplings = random_couplings(10, 6, 17);
        let pumps = PumpSettings::uniform_probe(10, 600.0, 12.0);
        let occ = occupations(&sector, &psi);
        let fields = field_expectations(&occ, &couplings, &pumps);
        let rec = invert_fields(&fields, &couplings, &pumps, 0.0).unwrap();
        for i in 0..6 {
            assert!((rec.occupations[i] - occ[i]).abs() < 1e-8);
            assert!(rec.resolved[i]);
            assert!((rec.spins[i] - (2.0 * occ[i] - 1.0)).abs() < 1e-8);
        }
        assert!(rec.residual < 1e-10);
    }

    #[test]
    fn single_mode_resolves_single_site() {
        let mut v = DVector::zeros(4);
        v[0] = 1.0;
        let couplings = vec![v];
        let pumps = PumpSettings::uniform_probe(1, 100.0, 5.0);
        let occ = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let fields = field_expectations(&occ, &couplings, &pumps);
        let rec = invert_fields(&fields, &couplings, &pumps, 0.0).unwrap();
        assert!((rec.occupations[0] - 1.0).abs() < 1e-10);
        assert!(rec.resolved[0]);
        for site in 1..4 {
            assert!(!rec.resolved[site], "site {site} cannot be determined");
        }
    }

    #[test]
    fn intensity_inversion_round_trip() {
        let sector = SpinSector::new(5, 2).unwrap();
        let psi = random_state(sector.dim(), 31);
        // need ≥ 15 modes to determine the 5-site correlation matrix
        let couplings = random_couplings(15, 5, 23);
        let pumps = PumpSettings::uniform_probe(15, 900.0, 25.0);
        let corr = correlations(&sector, &psi);
        let meas = intensities(&corr, &couplings, &pumps);
        let rec = invert_intensities(&meas, &couplings, &pumps, 0.0).unwrap();
        let got = rec.correlations.as_ref().unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((got[i][j] - corr[(i, j)]).abs() < 1e-7, "({i},{j})");
            }
        }
        // hardcore consistency: diagonal equals occupations
        let occ = occupations(&sector, &psi);
        for i in 0..5 {
            assert!((rec.occupations[i] - occ[i]).abs() < 1e-7);
        }
        assert!(rec.residual < 1e-8);
    }

    #[test]
    fn rank_deficiency_reported() {
        let couplings = random_couplings(6, 5, 2); // 6 < 15 equations
        let pumps = PumpSettings::uniform_probe(6, 100.0, 5.0);
        let meas = vec![0.0; 6];
        match invert_intensities(&meas, &couplings, &pumps, 0.0) {
            Err(CoreError::RankDeficient { null_dim }) => assert_eq!(null_dim, 9),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn field_perturbation_bounded_by_condition_number() {
        let couplings = random_couplings(12, 6, 41);
        let pumps = PumpSettings::uniform_probe(12, 400.0, 9.0);
        let occ = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let fields = field_expectations(&occ, &couplings, &pumps);
        let clean = invert_fields(&fields, &couplings, &pumps, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eps = 1e-6;
        let noisy: Vec<Complex64> = fields
            .iter()
            .map(|f| f + Complex64::new(rng.random_range(-eps..eps), rng.random_range(-eps..eps)))
            .collect();
        let rec = invert_fields(&noisy, &couplings, &pumps, 0.0).unwrap();
        // design-space perturbation: |δ drive| ≤ √2 ε (|Δ| + κ)/η
        let m = couplings.len() as f64;
        let drive_eps =
            (2f64).sqrt() * eps * (pumps.delta[0].abs() + pumps.kappa[0]) / pumps.eta[0];
        let bound = clean.condition * drive_eps * m.sqrt() * 10.0;
        for i in 0..6 {
            assert!(
                (rec.occupations[i] - clean.occupations[i]).abs() <= bound,
                "site {i}: {} > {bound}",
                (rec.occupations[i] - clean.occupations[i]).abs()
            );
        }
    }

    #[test]
    fn triangle_indexing_is_bijective() {
        let n = 8;
        let mut seen = std::collections::HashSet::new();
        for col in 0..n * (n + 1) / 2 {
            let (i, j) = triangle_index(col, n);
            assert!(i <= j && j < n);
            assert!(seen.insert((i, j)));
        }
    }
}
