//! Sector-restricted spin Hamiltonian: nearest-neighbor hopping plus the
//! programmable σᶻσᶻ interaction and local fields, with dense and iterative
//! eigensolvers, spectrum curves over ζ and minimum-gap location.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::sector::SpinSector;

/// Largest dimension diagonalized densely; larger sectors use Lanczos.
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Diagonal matrix element of the interaction part for a ±1 pattern:
/// −(ζ/4) [ Σ_ij A_ij s_i s_j + Σ_i (2 Σ_j A_ij) s_i ].
pub fn classical_diagonal_energy(pattern: &[i8], zeta: f64, a: &DMatrix<f64>) -> f64 {
    let n = pattern.len();
    let mut quad = 0.0;
    let mut field = 0.0;
    for i in 0..n {
        let si = pattern[i] as f64;
        let mut row = 0.0;
        for j in 0..n {
            quad += a[(i, j)] * si * pattern[j] as f64;
            row += a[(i, j)];
        }
        field += 2.0 * row * si;
    }
    -(zeta / 4.0) * (quad + field)
}

/// Sparse symmetric Hamiltonian over a fixed-magnetization sector:
/// H = −J Σ hops + ζ · diag(problem).
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    pub sector: Arc<SpinSector>,
    pub j: f64,
    pub zeta: f64,
    pub boundary: Boundary,
    /// Pairs of basis indices connected by one adjacent swap (row < col).
    hop_pairs: Arc<Vec<(u32, u32)>>,
    /// Per-state interaction diagonal at ζ = 1.
    diag_problem: Arc<DVector<f64>>,
}

impl SpinHamiltonian {
    pub fn build(
        sector: Arc<SpinSector>,
        j: f64,
        zeta: f64,
        a: &DMatrix<f64>,
        boundary: Boundary,
    ) -> Result<Self> {
        let n = sector.n_sites;
        if a.nrows() != n || a.ncols() != n {
            return Err(CoreError::Validation(format!(
                "interaction matrix is {}x{}, lattice has {n} sites",
                a.nrows(),
                a.ncols()
            )));
        }
        if (a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
            return Err(CoreError::Validation("interaction matrix must be symmetric".into()));
        }
        let dim = sector.dim();
        let mut diag = DVector::zeros(dim);
        for idx in 0..dim {
            diag[idx] = classical_diagonal_energy(&sector.spins(idx), 1.0, a);
        }
        let mut pairs = Vec::new();
        let bonds: Vec<(usize, usize)> = match boundary {
            Boundary::Open => (0..n - 1).map(|i| (i, i + 1)).collect(),
            Boundary::Periodic => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        for idx in 0..dim {
            let s = sector.state(idx);
            for &(i, jj) in &bonds {
                let bi = (s >> i) & 1;
                let bj = (s >> jj) & 1;
                if bi != bj {
                    let t = s ^ (1 << i) ^ (1 << jj);
                    let tdx = sector
                        .index_of(t)
                        .ok_or_else(|| CoreError::Numerical("hop left the sector".into()))?;
                    if tdx > idx {
                        pairs.push((idx as u32, tdx as u32));
                    }
                }
            }
        }
        Ok(Self {
            sector,
            j,
            zeta,
            boundary,
            hop_pairs: Arc::new(pairs),
            diag_problem: Arc::new(diag),
        })
    }

    /// Same structure at a different interaction strength.
    pub fn with_zeta(&self, zeta: f64) -> Self {
        Self { zeta, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    pub fn hop_pairs(&self) -> &[(u32, u32)] {
        &self.hop_pairs
    }

    /// Interaction diagonal at unit ζ.
    pub fn problem_diagonal(&self) -> &DVector<f64> {
        &self.diag_problem
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            h[(i, i)] = self.zeta * self.diag_problem[i];
        }
        for &(a, b) in self.hop_pairs.iter() {
            h[(a as usize, b as usize)] = -self.j;
            h[(b as usize, a as usize)] = -self.j;
        }
        h
    }

    pub fn matvec(&self, v: &DVector<f64>, out: &mut DVector<f64>) {
        for i in 0..self.dim() {
            out[i] = self.zeta * self.diag_problem[i] * v[i];
        }
        for &(a, b) in self.hop_pairs.iter() {
            let (a, b) = (a as usize, b as usize);
            out[a] -= self.j * v[b];
            out[b] -= self.j * v[a];
        }
    }

    /// Cheap upper bound on ‖H‖ (Gershgorin over the hopping graph).
    pub fn norm_bound(&self) -> f64 {
        let mut degree = vec![0usize; self.dim()];
        for &(a, b) in self.hop_pairs.iter() {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        (0..self.dim())
            .map(|i| (self.zeta * self.diag_problem[i]).abs() + self.j.abs() * degree[i] as f64)
            .fold(0.0, f64::max)
    }

    /// Coordinate triplets (row, col, value) of every stored entry.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.dim() + 2 * self.hop_pairs.len());
        for i in 0..self.dim() {
            let v = self.zeta * self.diag_problem[i];
            if v != 0.0 {
                out.push((i, i, v));
            }
        }
        for &(a, b) in self.hop_pairs.iter() {
            out.push((a as usize, b as usize, -self.j));
            out.push((b as usize, a as usize, -self.j));
        }
        out
    }
}

/// Lowest eigenpairs, energies ascending, phases fixed so the
/// largest-magnitude component of each vector is positive.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

impl Spectrum {
    pub fn gap(&self) -> f64 {
        if self.energies.len() < 2 {
            0.0
        } else {
            self.energies[1] - self.energies[0]
        }
    }

    /// Squared overlap of a vector with the eigenstate `i`, summed over the
    /// degenerate subspace containing it (projector overlap).
    pub fn overlap_sq(&self, i: usize, v: &DVector<f64>) -> f64 {
        let e = self.energies[i];
        let scale = 1e-10 * (1.0 + e.abs());
        self.energies
            .iter()
            .zip(&self.vectors)
            .filter(|(ek, _)| (*ek - e).abs() <= scale)
            .map(|(_, phi)| phi.dot(v).powi(2))
            .sum()
    }
}

fn fix_phase(v: &mut DVector<f64>) {
    let mut imax = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[imax].abs() {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        *v *= -1.0;
    }
}

/// k lowest eigenpairs of a symmetric matrix by full diagonalization.
pub fn dense_lowest(h: &DMatrix<f64>, k: usize) -> Spectrum {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let k = k.min(h.nrows());
    let mut energies = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        energies.push(eig.eigenvalues[i]);
        let mut v: DVector<f64> = eig.eigenvectors.column(i).into();
        fix_phase(&mut v);
        vectors.push(v);
    }
    Spectrum { energies, vectors }
}

/// k lowest eigenpairs by Lanczos with full reorthogonalization.
pub fn lanczos_lowest(
    matvec: &dyn Fn(&DVector<f64>, &mut DVector<f64>),
    dim: usize,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Spectrum> {
    if k == 0 || dim == 0 {
        return Ok(Spectrum { energies: vec![], vectors: vec![] });
    }
    let max_iter = max_iter.min(dim);
    // deterministic pseudo-random vectors
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut fresh = move || {
        DVector::from_fn(dim, |_, _| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    };
    let mut v0 = fresh();
    v0 /= v0.norm();

    let mut basis: Vec<DVector<f64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = DVector::zeros(dim);
    let mut restarts = 0usize;

    for m in 0..max_iter {
        matvec(&basis[m], &mut w);
        let alpha = basis[m].dot(&w);
        alphas.push(alpha);
        w -= alpha * &basis[m];
        if m > 0 {
            w -= betas[m - 1] * &basis[m - 1];
        }
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w -= c * b;
            }
        }
        let beta = w.norm();
        let last_iter = m + 1 == max_iter;
        // a tiny beta means the Krylov space became invariant; its Ritz
        // pairs are exact but may miss the global lowest, so keep growing
        // in fresh orthogonal directions a few times before trusting it
        let exhausted = beta < 1e-12 && (restarts >= 3 || alphas.len() == dim);

        let enough = alphas.len() >= k + 2 || alphas.len() == dim;
        if enough && ((m + 1) % 10 == 0 || last_iter || exhausted) {
            let t = tridiagonal(&alphas, &betas);
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..alphas.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
            let t_norm = eig.eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
            let converged = order.iter().take(k).all(|&i| {
                let last = eig.eigenvectors[(alphas.len() - 1, i)];
                (beta * last).abs() <= tol * t_norm.max(1e-300)
            });
            if converged || exhausted || last_iter {
                if !converged && !exhausted {
                    return Err(CoreError::Numerical(format!(
                        "Lanczos did not converge in {max_iter} iterations; residual ~{:.2e}",
                        beta
                    )));
                }
                let mut energies = Vec::with_capacity(k);
                let mut vectors = Vec::with_capacity(k);
                for &i in order.iter().take(k.min(alphas.len())) {
                    energies.push(eig.eigenvalues[i]);
                    let mut v = DVector::zeros(dim);
                    for (j, b) in basis.iter().enumerate() {
                        v += eig.eigenvectors[(j, i)] * b;
                    }
                    v /= v.norm();
                    fix_phase(&mut v);
                    vectors.push(v);
                }
                return Ok(Spectrum { energies, vectors });
            }
        }
        if beta < 1e-12 {
            // continue the tridiagonalization in a fresh orthogonal
            // direction; beta = 0 keeps the blocks decoupled
            let mut v = fresh();
            for b in &basis {
                let c = b.dot(&v);
                v -= c * b;
            }
            let n = v.norm();
            if n < 1e-8 {
                return Err(CoreError::Numerical(
                    "Lanczos restart failed: basis spans the whole space".into(),
                ));
            }
            restarts += 1;
            betas.push(0.0);
            basis.push(v / n);
        } else {
            betas.push(beta);
            basis.push(&w / beta);
        }
    }
    unreachable!("loop always returns at m + 1 == max_iter");
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

/// k lowest eigenpairs of the sector Hamiltonian, dense below
/// [`DENSE_LIMIT`], Lanczos above. Every returned pair satisfies the
/// residual bound ‖Hφ − εφ‖ ≤ 1e-8 ‖H‖.
pub fn lowest_eigen(h: &SpinHamiltonian, k: usize) -> Result<Spectrum> {
    let spec = if h.dim() <= DENSE_LIMIT {
        dense_lowest(&h.dense(), k)
    } else {
        let mv = |v: &DVector<f64>, out: &mut DVector<f64>| h.matvec(v, out);
        lanczos_lowest(&mv, h.dim(), k, 40 * k.max(5) + 200, 1e-10)?
    };
    let scale = h.norm_bound().max(1e-300);
    let mut out = DVector::zeros(h.dim());
    for (e, v) in spec.energies.iter().zip(&spec.vectors) {
        h.matvec(v, &mut out);
        out -= *e * v;
        let res = out.norm();
        if res > 1e-8 * scale {
            return Err(CoreError::Numerical(format!(
                "eigenpair residual {res:.2e} exceeds 1e-8 · ‖H‖ = {:.2e}",
                1e-8 * scale
            )));
        }
    }
    Ok(spec)
}

/// Eigenvalue curves ε_n(ζ) for the k lowest states over a ζ grid.
#[derive(Debug, Clone)]
pub struct SpectrumCurves {
    pub zetas: Vec<f64>,
    pub spectra: Vec<Spectrum>,
}

impl SpectrumCurves {
    pub fn gap(&self, i: usize) -> f64 {
        self.spectra[i].gap()
    }
}

/// Diagonalize H(ζ) on each grid point (grid points in parallel, results
/// in grid order).
pub fn low_spectrum(h: &SpinHamiltonian, k: usize, zetas: &[f64]) -> Result<SpectrumCurves> {
    if k > h.dim() {
        return Err(CoreError::Validation(format!(
            "requested {k} eigenpairs from a {}-dimensional sector",
            h.dim()
        )));
    }
    use rayon::prelude::*;
    let spectra = zetas
        .par_iter()
        .map(|&z| lowest_eigen(&h.with_zeta(z), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumCurves { zetas: zetas.to_vec(), spectra })
}

/// Location and size of the minimum gap ε₁ − ε₀ over ζ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinGap {
    pub zeta_star: f64,
    pub gap: f64,
    /// Gap closed below 1e-12.
    pub degenerate: bool,
}

/// Locate the minimum of ε₁(ζ) − ε₀(ζ) by coarse scan plus local grid
/// refinement down to a ζ resolution of 1e-3 (in the same units as the
/// grid, i.e. units of J when ζ is measured in J).
pub fn min_gap(h: &SpinHamiltonian, zeta_lo: f64, zeta_hi: f64, coarse_points: usize) -> Result<MinGap> {
    if !(zeta_hi > zeta_lo) || coarse_points < 3 {
        return Err(CoreError::Validation("need zeta_hi > zeta_lo and >= 3 grid points".into()));
    }
    let gap_at = |z: f64| -> Result<f64> { Ok(lowest_eigen(&h.with_zeta(z), 2)?.gap()) };
    let mut lo = zeta_lo;
    let mut hi = zeta_hi;
    let mut points = coarse_points;
    let mut best = (f64::INFINITY, lo);
    loop {
        let step = (hi - lo) / (points - 1) as f64;
        for i in 0..points {
            let z = lo + i as f64 * step;
            let g = gap_at(z)?;
            if g < best.0 {
                best = (g, z);
            }
        }
        if step <= 1e-3 {
            break;
        }
        lo = (best.1 - step).max(zeta_lo);
        hi = (best.1 + step).min(zeta_hi);
        points = 21;
    }
    Ok(MinGap { zeta_star: best.1, gap: best.0, degenerate: best.0 < 1e-12 })
}
