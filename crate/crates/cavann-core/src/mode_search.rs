//! Greedy selection of a well-spanning mode subset: maximize the
//! determinant of the Gram matrix of normalized single-mode matrices over
//! a candidate pool, scan lattice poses, and post-select on norm
//! uniformity.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::coupling_vector;
use crate::error::{CoreError, Result};
use crate::geometry::{CavityGeometry, HGMode, LatticePose};
use crate::lattice::WannierProfile;
use crate::synthesis::ModeId;

/// Candidate modes with precomputed coupling vectors and the pairwise Gram
/// matrix of the normalized single-mode matrices.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub mode_ids: Vec<ModeId>,
    /// Raw coupling vectors v_m.
    pub vectors: Vec<DVector<f64>>,
    /// Raw Frobenius norms ‖V_m‖ = ‖v_m‖².
    pub raw_norms: Vec<f64>,
    /// ⟨V̂_a, V̂_b⟩ = (v̂_a · v̂_b)² for unit v̂.
    gram_hat: DMatrix<f64>,
    pub pose: LatticePose,
}

impl CandidatePool {
    /// Evaluate coupling vectors for every candidate `(n, l)` (m = 0) at
    /// the given pose and build the normalized pairwise Gram matrix.
    pub fn build(
        geom: &CavityGeometry,
        pose: &LatticePose,
        wannier: &WannierProfile,
        candidates: &[ModeId],
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(CoreError::Validation("empty candidate list".into()));
        }
        let vectors: Vec<DVector<f64>> = candidates
            .par_iter()
            .map(|&(n, l)| {
                let mode = HGMode::resonant(geom, n, l, 0)?;
                coupling_vector(&mode, pose, wannier)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut raw_norms = Vec::with_capacity(vectors.len());
        let mut unit = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            let ns = v.norm_squared();
            if ns < 1e-280 {
                return Err(CoreError::Numerical(format!(
                    "candidate mode {:?} couples to no site",
                    candidates[i]
                )));
            }
            raw_norms.push(ns);
            unit.push(v / ns.sqrt());
        }
        let k = unit.len();
        let gram_hat = DMatrix::from_fn(k, k, |a, b| unit[a].dot(&unit[b]).powi(2));
        Ok(Self {
            mode_ids: candidates.to_vec(),
            vectors,
            raw_norms,
            gram_hat,
            pose: pose.clone(),
        })
    }

    /// Pool assembled from externally supplied coupling vectors.
    pub fn from_vectors(
        mode_ids: Vec<ModeId>,
        vectors: Vec<DVector<f64>>,
        pose: LatticePose,
    ) -> Result<Self> {
        let mut raw_norms = Vec::with_capacity(vectors.len());
        let mut unit = Vec::with_capacity(vectors.len());
        for v in &vectors {
            let ns = v.norm_squared();
            if ns < 1e-280 {
                return Err(CoreError::Validation("zero coupling vector in pool".into()));
            }
            raw_norms.push(ns);
            unit.push(v / ns.sqrt());
        }
        let k = unit.len();
        let gram_hat = DMatrix::from_fn(k, k, |a, b| unit[a].dot(&unit[b]).powi(2));
        Ok(Self { mode_ids, vectors, raw_norms, gram_hat, pose })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// ln det of the normalized Gram matrix of a subset; −∞ when the
    /// subset is linearly dependent.
    pub fn log_merit(&self, subset: &[usize]) -> f64 {
        let m = subset.len();
        let g = DMatrix::from_fn(m, m, |a, b| self.gram_hat[(subset[a], subset[b])]);
        match nalgebra::Cholesky::new(g) {
            Some(ch) => {
                let l = ch.l();
                2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>()
            }
            None => f64::NEG_INFINITY,
        }
    }
}

/// Merit of a subset: determinant of the normalized Gram matrix, in
/// [0, 1], equal to 1 exactly for pairwise orthogonal mode matrices.
pub fn merit(subset: &[usize], pool: &CandidatePool) -> Result<f64> {
    if subset.len() < 2 {
        return Err(CoreError::Validation("merit needs at least two modes".into()));
    }
    let mut seen = subset.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != subset.len() {
        return Ok(0.0);
    }
    let ld = pool.log_merit(subset);
    Ok(if ld.is_finite() { ld.exp().min(1.0) } else { 0.0 })
}

/// Outcome of the greedy selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Pool indices of the selected modes, in selection order.
    pub indices: Vec<usize>,
    pub mode_ids: Vec<ModeId>,
    /// ln det of the normalized Gram matrix.
    pub log_merit: f64,
    /// det itself (may underflow for large subsets; the log is exact).
    pub merit: f64,
    /// max/min raw norm over the subset.
    pub norm_ratio: f64,
    /// ln merit after the addition phase, before replacements.
    pub log_merit_additions: f64,
    /// Merit evaluations spent in each phase.
    pub pair_evals: usize,
    pub addition_evals: usize,
    pub replacement_evals: usize,
    pub pose: LatticePose,
}

/// Incremental Cholesky of the normalized Gram of the current selection.
struct Factor {
    l: DMatrix<f64>,
    size: usize,
}

impl Factor {
    fn new(capacity: usize) -> Self {
        Self { l: DMatrix::zeros(capacity, capacity), size: 0 }
    }

    /// log-det gain ln(1 − q) of bordering with a candidate whose Gram
    /// column against the selection is `g`; −∞ when the candidate is
    /// (numerically) dependent on the selection.
    fn border_gain(&self, g: &[f64]) -> f64 {
        const DEPENDENCE_TOL: f64 = 1e-13;
        let mut y = vec![0.0; self.size];
        for i in 0..self.size {
            let mut s = g[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s / self.l[(i, i)];
        }
        let q: f64 = y.iter().map(|x| x * x).sum();
        if q < 1.0 - DEPENDENCE_TOL {
            (1.0 - q).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn push(&mut self, g: &[f64]) {
        let mut y = vec![0.0; self.size];
        for i in 0..self.size {
            let mut s = g[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s / self.l[(i, i)];
        }
        let q: f64 = y.iter().map(|x| x * x).sum();
        for (j, &v) in y.iter().enumerate() {
            self.l[(self.size, j)] = v;
        }
        self.l[(self.size, self.size)] = (1.0 - q).max(0.0).sqrt();
        self.size += 1;
    }
}

/// Three-phase greedy subset selection of `m` modes: best pair over all
/// pairs, repeated best addition, then `passes` replacement sweeps over
/// the selected modes (accepting only strict improvements).
pub fn greedy_select(pool: &CandidatePool, m: usize, passes: usize) -> Result<SelectionResult> {
    let k = pool.len();
    if m < 2 || m > k {
        return Err(CoreError::Validation(format!("cannot select {m} of {k} modes")));
    }
    let g = &pool.gram_hat;

    // phase (i): best of all K(K−1)/2 pairs; ties to lowest indices
    let mut pair_evals = 0usize;
    let mut best_pair = (0usize, 1usize);
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            pair_evals += 1;
            let val = 1.0 - g[(a, b)] * g[(a, b)];
            if val > best_val {
                best_val = val;
                best_pair = (a, b);
            }
        }
    }
    let mut selected = vec![best_pair.0, best_pair.1];
    let mut in_set = vec![false; k];
    in_set[best_pair.0] = true;
    in_set[best_pair.1] = true;

    let mut factor = Factor::new(m);
    factor.push(&[]);
    factor.push(&[g[(best_pair.0, best_pair.1)]]);

    // phase (ii): repeated best single addition (< MK evaluations)
    let mut addition_evals = 0usize;
    while selected.len() < m {
        let gains: Vec<(f64, usize)> = (0..k)
            .into_par_iter()
            .filter(|&x| !in_set[x])
            .map(|x| {
                let col: Vec<f64> = selected.iter().map(|&s| g[(s, x)]).collect();
                (factor.border_gain(&col), x)
            })
            .collect();
        addition_evals += gains.len();
        let best = gains
            .into_iter()
            .max_by(|a, b| match a.0.partial_cmp(&b.0).unwrap() {
                std::cmp::Ordering::Equal => b.1.cmp(&a.1),
                other => other,
            })
            .expect("candidates remain");
        if !best.0.is_finite() {
            return Err(CoreError::InfeasiblePool(format!(
                "no candidate extends the selection past {} modes",
                selected.len()
            )));
        }
        let col: Vec<f64> = selected.iter().map(|&s| g[(s, best.1)]).collect();
        factor.push(&col);
        in_set[best.1] = true;
        selected.push(best.1);
    }
    let log_merit_additions = pool.log_merit(&selected);

    // phase (iii): replacement sweeps, ≤ M(K−M) evaluations per pass
    let mut replacement_evals = 0usize;
    let mut current_log = log_merit_additions;
    for _ in 0..passes {
        for pos in 0..m {
            let others: Vec<usize> =
                selected.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &s)| s).collect();
            let sub = DMatrix::from_fn(m - 1, m - 1, |a, b| g[(others[a], others[b])]);
            let base = match nalgebra::Cholesky::new(sub) {
                Some(ch) => {
                    let l = ch.l();
                    let mut fac = Factor::new(m);
                    fac.l.view_mut((0, 0), (m - 1, m - 1)).copy_from(&l);
                    fac.size = m - 1;
                    fac
                }
                None => continue, // remainder already dependent; replacement cannot help
            };
            let base_log = 2.0 * (0..m - 1).map(|i| base.l[(i, i)].ln()).sum::<f64>();
            let evals: Vec<(f64, usize)> = (0..k)
                .into_par_iter()
                .filter(|&x| !in_set[x])
                .map(|x| {
                    let col: Vec<f64> = others.iter().map(|&s| g[(s, x)]).collect();
                    (base_log + base.border_gain(&col), x)
                })
                .collect();
            replacement_evals += evals.len();
            let best = evals.into_iter().max_by(|a, b| match a.0.partial_cmp(&b.0).unwrap() {
                std::cmp::Ordering::Equal => b.1.cmp(&a.1),
                other => other,
            });
            if let Some((log_new, x)) = best {
                if log_new > current_log {
                    in_set[selected[pos]] = false;
                    in_set[x] = true;
                    selected[pos] = x;
                    current_log = log_new;
                }
            }
        }
    }

    let log_merit = pool.log_merit(&selected);
    let norms: Vec<f64> = selected.iter().map(|&i| pool.raw_norms[i]).collect();
    let norm_ratio = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / norms.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SelectionResult {
        mode_ids: selected.iter().map(|&i| pool.mode_ids[i]).collect(),
        indices: selected,
        log_merit,
        merit: if log_merit.is_finite() { log_merit.exp() } else { 0.0 },
        norm_ratio,
        log_merit_additions,
        pair_evals,
        addition_evals,
        replacement_evals,
        pose: pool.pose.clone(),
    })
}

/// Run the greedy selection at every pose and keep the best merit;
/// ties broken by first occurrence. Infeasibility is fatal only when every
/// pose is infeasible.
pub fn pose_scan<F>(poses: &[LatticePose], build: F, m: usize, passes: usize) -> Result<SelectionResult>
where
    F: Fn(&LatticePose) -> Result<CandidatePool> + Sync,
{
    if poses.is_empty() {
        return Err(CoreError::Validation("empty pose list".into()));
    }
    let results: Vec<Result<SelectionResult>> = poses
        .par_iter()
        .map(|pose| greedy_select(&build(pose)?, m, passes))
        .collect();
    let mut best: Option<SelectionResult> = None;
    let mut first_err: Option<CoreError> = None;
    for r in results {
        match r {
            Ok(sel) => {
                let better = match &best {
                    None => true,
                    Some(b) => sel.log_merit > b.log_merit,
                };
                if better {
                    best = Some(sel);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| first_err.expect("no results at all"))
}

/// Norm-uniformity post-selection: score = max/min raw norm, accepted
/// when score ≤ max_ratio.
pub fn uniformity_filter(result: &SelectionResult, max_ratio: f64) -> (bool, f64) {
    (result.norm_ratio <= max_ratio, result.norm_ratio)
}
