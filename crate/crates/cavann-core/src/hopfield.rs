//! Associative-memory recall problems: Hebbian weights, the biased
//! interaction matrix, the classical energy landscape, bias bounds and the
//! exhaustive ground-state oracle.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Exhaustive scans refuse chains longer than this.
pub const MAX_BRUTE_FORCE_SITES: usize = 24;

/// A recall instance: stored ±1 memories, a ±1 input pattern and the bias
/// strength ν coupling the input to the local fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfieldProblem {
    pub memories: Vec<Vec<i8>>,
    pub input: Vec<i8>,
    pub nu: f64,
}

fn check_pattern(p: &[i8], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(CoreError::Validation(format!(
            "{what} has length {}, expected {n}",
            p.len()
        )));
    }
    if p.iter().any(|&s| s != 1 && s != -1) {
        return Err(CoreError::Validation(format!("{what} entries must be ±1")));
    }
    Ok(())
}

fn dot(a: &[i8], b: &[i8]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as i32 * y as i32) as f64).sum()
}

impl HopfieldProblem {
    pub fn new(memories: Vec<Vec<i8>>, input: Vec<i8>, nu: f64) -> Result<Self> {
        if memories.is_empty() {
            return Err(CoreError::Validation("need at least one memory pattern".into()));
        }
        let n = input.len();
        check_pattern(&input, n, "input pattern")?;
        for (p, m) in memories.iter().enumerate() {
            check_pattern(m, n, &format!("memory {p}"))?;
        }
        for a in 0..memories.len() {
            for b in a + 1..memories.len() {
                if memories[a] == memories[b] {
                    return Err(CoreError::Validation(format!("memories {a} and {b} coincide")));
                }
            }
        }
        if nu < 0.0 {
            return Err(CoreError::Validation(format!("bias strength {nu} must be >= 0")));
        }
        Ok(Self { memories, input, nu })
    }

    pub fn n_sites(&self) -> usize {
        self.input.len()
    }

    /// Classical energy E(s) = −(1/2P) Σ_q ⟨s, w_q⟩² − ν ⟨s, χ⟩.
    pub fn energy(&self, s: &[i8]) -> f64 {
        let p = self.memories.len() as f64;
        let quad: f64 = self.memories.iter().map(|w| dot(s, w).powi(2)).sum();
        -quad / (2.0 * p) - self.nu * dot(s, &self.input)
    }

    /// All memories have equal pairwise dot products (degenerate memory
    /// energies at ν = 0); always true for a single memory or a pair.
    pub fn memories_degenerate(&self) -> bool {
        let p = self.memories.len();
        if p <= 2 {
            return true;
        }
        let first = dot(&self.memories[0], &self.memories[1]);
        for a in 0..p {
            for b in a + 1..p {
                if (dot(&self.memories[a], &self.memories[b]) - first).abs() > 1e-9 {
                    return false;
                }
            }
        }
        true
    }
}

/// Hebbian weight matrix W_ij = (1/P) Σ_p w_p^i w_p^j.
pub fn hebbian_weights(memories: &[Vec<i8>]) -> Result<DMatrix<f64>> {
    if memories.is_empty() {
        return Err(CoreError::Validation("need at least one memory pattern".into()));
    }
    let n = memories[0].len();
    for (p, m) in memories.iter().enumerate() {
        check_pattern(m, n, &format!("memory {p}"))?;
    }
    let p = memories.len() as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        memories.iter().map(|w| (w[i] as i32 * w[j] as i32) as f64).sum::<f64>() / p
    }))
}

/// Interaction matrix of a recall: A_ij = W_ij + ν χ_i δ_ij.
pub fn recall_matrix(weights: &DMatrix<f64>, input: &[i8], nu: f64) -> Result<DMatrix<f64>> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(CoreError::Validation("weight matrix must be square".into()));
    }
    check_pattern(input, n, "input pattern")?;
    let mut a = weights.clone();
    for i in 0..n {
        a[(i, i)] += nu * input[i] as f64;
    }
    Ok(a)
}

/// Per-memory sums Σ_j w_p^j; nonzero sums flag patterns whose recall
/// matrix induces extra local fields beyond ν χ.
pub fn balance_check(memories: &[Vec<i8>]) -> Vec<i64> {
    memories
        .iter()
        .map(|w| w.iter().map(|&s| s as i64).sum())
        .collect()
}

/// Recall matrix with the diagonal compensated for unbalanced memories:
/// A_ii = h_i/2 − Σ_{j≠i} A_ij with the desired local field h_i = 2 ν χ_i,
/// so the induced fields match the biased recall exactly even when
/// Σ_j W_ij ≠ 0.
pub fn recall_matrix_compensated(
    weights: &DMatrix<f64>,
    input: &[i8],
    nu: f64,
) -> Result<DMatrix<f64>> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(CoreError::Validation("weight matrix must be square".into()));
    }
    check_pattern(input, n, "input pattern")?;
    let mut a = weights.clone();
    for i in 0..n {
        let off_row: f64 = (0..n).filter(|&j| j != i).map(|j| weights[(i, j)]).sum();
        a[(i, i)] = nu * input[i] as f64 - off_row;
    }
    Ok(a)
}

/// Upper bound on ν below which the input pattern cannot become the ground
/// state: max_p Σ_q (⟨w_p,w_q⟩² − ⟨χ,w_q⟩²) / [2P (N − ⟨χ,w_p⟩)].
pub fn nu_upper_bound(problem: &HopfieldProblem) -> Result<f64> {
    let n = problem.n_sites() as f64;
    let p = problem.memories.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for wp in &problem.memories {
        let overlap = dot(&problem.input, wp);
        if overlap == n {
            return Err(CoreError::Validation(
                "input pattern equals a stored memory; bias bound undefined".into(),
            ));
        }
        let num: f64 = problem
            .memories
            .iter()
            .map(|wq| dot(wp, wq).powi(2) - dot(&problem.input, wq).powi(2))
            .sum();
        best = best.max(num / (2.0 * p * (n - overlap)));
    }
    Ok(best)
}

/// Lower end of the usable ν interval: zero for degenerate memories,
/// otherwise the bias needed for the best-overlap memory to undercut every
/// other memory.
pub fn nu_lower_bound(problem: &HopfieldProblem) -> f64 {
    if problem.memories_degenerate() {
        return 0.0;
    }
    let p = problem.memories.len() as f64;
    let self_energy: Vec<f64> = problem
        .memories
        .iter()
        .map(|wp| {
            problem.memories.iter().map(|wq| dot(wp, wq).powi(2)).sum::<f64>() / (2.0 * p)
        })
        .collect();
    let overlaps: Vec<f64> =
        problem.memories.iter().map(|w| dot(&problem.input, w)).collect();
    let k = (0..problem.memories.len())
        .max_by(|&a, &b| overlaps[a].partial_cmp(&overlaps[b]).unwrap())
        .unwrap();
    let mut nu_min: f64 = 0.0;
    for q in 0..problem.memories.len() {
        if q == k || overlaps[k] <= overlaps[q] {
            continue;
        }
        nu_min = nu_min.max((self_energy[q] - self_energy[k]) / (overlaps[k] - overlaps[q]));
    }
    nu_min
}

/// Energies of the named states plus the ν validity interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub memory_energies: Vec<f64>,
    pub input_energy: f64,
    pub input_overlaps: Vec<f64>,
    pub degenerate_memories: bool,
    pub nu_interval: (f64, f64),
}

pub fn energy_report(problem: &HopfieldProblem) -> Result<EnergyReport> {
    Ok(EnergyReport {
        memory_energies: problem.memories.iter().map(|w| problem.energy(w)).collect(),
        input_energy: problem.energy(&problem.input),
        input_overlaps: problem.memories.iter().map(|w| dot(&problem.input, w)).collect(),
        degenerate_memories: problem.memories_degenerate(),
        nu_interval: (nu_lower_bound(problem), nu_upper_bound(problem)?),
    })
}

/// Exhaustive minimum of the classical energy, over all ±1 patterns or
/// over the fixed-magnetization slice Σ s_i = 2 n_up − N. Returns all ties,
/// lexicographically sorted (−1 before +1, leftmost site most significant).
pub fn brute_force_ground(
    problem: &HopfieldProblem,
    sector_up: Option<usize>,
) -> Result<Vec<Vec<i8>>> {
    let n = problem.n_sites();
    if n > MAX_BRUTE_FORCE_SITES {
        return Err(CoreError::Config(format!(
            "{n} sites exceeds the {MAX_BRUTE_FORCE_SITES}-site exhaustive-scan guard"
        )));
    }
    let total: u32 = 1 << n;
    let to_pattern = |bits: u32| -> Vec<i8> {
        (0..n).map(|i| if (bits >> i) & 1 == 1 { 1 } else { -1 }).collect()
    };
    // per-thread minima folded in fixed order
    let chunk = 1u32 << n.saturating_sub(6).min(20);
    let ranges: Vec<(u32, u32)> = (0..total)
        .step_by(chunk as usize)
        .map(|s| (s, (s + chunk).min(total)))
        .collect();
    let partials: Vec<(f64, Vec<u32>)> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut best = f64::INFINITY;
            let mut ties: Vec<u32> = Vec::new();
            for bits in lo..hi {
                if let Some(k) = sector_up {
                    if bits.count_ones() as usize != k {
                        continue;
                    }
                }
                let e = problem.energy(&to_pattern(bits));
                if e < best - 1e-12 {
                    best = e;
                    ties.clear();
                    ties.push(bits);
                } else if (e - best).abs() <= 1e-12 {
                    ties.push(bits);
                }
            }
            (best, ties)
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut ties: Vec<u32> = Vec::new();
    for (e, t) in partials {
        if e < best - 1e-12 {
            best = e;
            ties = t;
        } else if (e - best).abs() <= 1e-12 {
            ties.extend(t);
        }
    }
    if ties.is_empty() {
        return Err(CoreError::Validation("sector slice is empty".into()));
    }
    let mut patterns: Vec<Vec<i8>> = ties.into_iter().map(to_pattern).collect();
    patterns.sort();
    Ok(patterns)
}
