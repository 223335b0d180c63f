//! Programming a target interaction matrix into laser input parameters:
//! Gram-matrix inversion, finite-precision quantization, recovery of the
//! implemented matrix and conversion to physical pump settings.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coupling::frobenius_inner;
use crate::error::{CoreError, Result};

/// Condition-number threshold beyond which a basis is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Identity of a cavity mode inside a basis, as (n, l) with m = 0.
pub type ModeId = (u32, u32);

/// A set of single-mode matrices used as a basis of symmetric matrices,
/// with its Gram matrix and SPD factorization.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub mode_ids: Vec<ModeId>,
    pub matrices: Vec<DMatrix<f64>>,
    pub gram: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// Spectral condition number of the Gram matrix.
    pub condition: f64,
}

impl ModeBasis {
    pub fn new(mode_ids: Vec<ModeId>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(CoreError::Validation("empty mode basis".into()));
        }
        let n = matrices[0].nrows();
        if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(CoreError::Validation("mode matrices must share dimensions".into()));
        }
        let m = matrices.len();
        if m > n * (n + 1) / 2 {
            return Err(CoreError::Validation(format!(
                "basis size {m} exceeds dim of symmetric matrices {}",
                n * (n + 1) / 2
            )));
        }
        let gram = gram_matrix(&matrices);
        let eigs = SymmetricEigen::new(gram.clone()).eigenvalues;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &e in eigs.iter() {
            lo = lo.min(e);
            hi = hi.max(e);
        }
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(lo > 0.0) || condition > CONDITION_LIMIT {
            return Err(CoreError::IllConditioned { cond: condition, limit: CONDITION_LIMIT });
        }
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| CoreError::IllConditioned { cond: condition, limit: CONDITION_LIMIT })?;
        Ok(Self { mode_ids, matrices, gram, chol, condition })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn site_count(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Solve G x = b with one step of iterative refinement.
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(b);
        let r = b - &self.gram * &x;
        x += self.chol.solve(&r);
        x
    }
}

/// Gram matrix G_mn = Tr(V_m V_n) of a list of symmetric matrices.
pub fn gram_matrix(matrices: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = matrices.len();
    DMatrix::from_fn(m, m, |a, b| frobenius_inner(&matrices[a], &matrices[b]))
}

/// Laser input parameters for a target matrix: f_m = ζ Σ_n (G⁻¹)_mn ⟨V_n, A⟩.
///
/// When A lies in the span of the basis, Σ_m f_m V_m = ζ A to solve accuracy.
pub fn synthesize_inputs(a: &DMatrix<f64>, basis: &ModeBasis, zeta: f64) -> Result<DVector<f64>> {
    let n = basis.site_count();
    if a.nrows() != n || a.ncols() != n {
        return Err(CoreError::Validation("target matrix dimension mismatch".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
        return Err(CoreError::Validation("target matrix must be symmetric".into()));
    }
    let b = DVector::from_fn(basis.len(), |m, _| frobenius_inner(&basis.matrices[m], a));
    Ok(zeta * basis.solve(&b))
}

/// Round each component to the nearest multiple of `step`, half away from
/// zero.
pub fn quantize_inputs(f: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return Err(CoreError::Validation(format!("quantization step {step} must be positive")));
    }
    Ok(f.map(|x| (x / step).round() * step))
}

/// Trace norm Σ|λ_i| of a symmetric matrix.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().map(|e| e.abs()).sum()
}

/// Matrix implemented by the (possibly quantized) inputs: S = Σ f̃_m V_m,
/// returned normalized to unit trace norm together with ζ′ = ‖S‖_tr.
pub fn recovered_matrix(f: &DVector<f64>, basis: &ModeBasis) -> Result<(DMatrix<f64>, f64)> {
    let n = basis.site_count();
    let mut s = DMatrix::zeros(n, n);
    for (m, mat) in basis.matrices.iter().enumerate() {
        s += f[m] * mat;
    }
    let zeta = trace_norm(&s);
    if zeta < 1e-300 {
        return Err(CoreError::DegenerateProgram);
    }
    Ok((s / zeta, zeta))
}

/// Per-mode pump strength, detuning and decay realizing a set of inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PumpSettings {
    /// Pump strengths η_m (rate units).
    pub eta: Vec<f64>,
    /// Pump-cavity detunings Δ_c,m.
    pub delta: Vec<f64>,
    /// Cavity decay rates κ_m.
    pub kappa: Vec<f64>,
}

impl PumpSettings {
    /// Realize inputs with |Δ_c,m| = κ and sgn(Δ_c,m) = sgn(−f_m):
    /// η_m = sqrt(|f_m| · 2κ) in ħ = 1 units.
    pub fn from_inputs(f: &DVector<f64>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(CoreError::Validation(format!("decay rate {kappa} must be positive")));
        }
        let mut eta = Vec::with_capacity(f.len());
        let mut delta = Vec::with_capacity(f.len());
        for &fm in f.iter() {
            let sign = if fm > 0.0 { -1.0 } else { 1.0 };
            delta.push(sign * kappa);
            eta.push((fm.abs() * 2.0 * kappa).sqrt());
        }
        Ok(Self { eta, delta, kappa: vec![kappa; f.len()] })
    }

    /// Uniform readout probe: every mode driven at strength η with Δ = −κ.
    pub fn uniform_probe(modes: usize, kappa: f64, eta: f64) -> Self {
        Self {
            eta: vec![eta; modes],
            delta: vec![-kappa; modes],
            kappa: vec![kappa; modes],
        }
    }

    /// Input parameter implied by mode m: f_m = −Δ η² / (Δ² + κ²).
    pub fn input_parameter(&self, m: usize) -> f64 {
        let (eta, delta, kappa) = (self.eta[m], self.delta[m], self.kappa[m]);
        -delta * eta * eta / (delta * delta + kappa * kappa)
    }

    /// Detection prefactor η_m² / (Δ_m² + κ_m²).
    pub fn intensity_prefactor(&self, m: usize) -> f64 {
        let (eta, delta, kappa) = (self.eta[m], self.delta[m], self.kappa[m]);
        eta * eta / (delta * delta + kappa * kappa)
    }

    /// Check that a stated input is reproduced by these settings.
    pub fn verify_inputs(&self, f: &DVector<f64>) -> Result<()> {
        for m in 0..f.len() {
            let back = self.input_parameter(m);
            let scale = f[m].abs().max(1e-300);
            if (back - f[m]).abs() / scale > 1e-12 && (back - f[m]).abs() > 1e-300 {
                return Err(CoreError::Sign(format!(
                    "mode {m}: settings give f = {back:.6e}, requested {:.6e}",
                    f[m]
                )));
            }
        }
        Ok(())
    }
}

/// A fully synthesized interaction program.
#[derive(Debug, Clone)]
pub struct InteractionProgram {
    /// Target matrix in its natural scale.
    pub target: DMatrix<f64>,
    /// Effective interaction strength: trace norm of Σ f_m V_m.
    pub zeta: f64,
    /// Raw inputs from the Gram inversion.
    pub inputs: DVector<f64>,
    /// Inputs rounded to the quantization step.
    pub quantized: DVector<f64>,
    /// Recovered matrix Σ f̃_m V_m / ζ′, unit trace norm.
    pub recovered: DMatrix<f64>,
    /// Trace norm ζ′ of Σ f̃_m V_m.
    pub zeta_recovered: f64,
    /// Quantization step in units of ζ (zero disables rounding).
    pub step: f64,
    pub mode_ids: Vec<ModeId>,
}

impl InteractionProgram {
    /// Synthesize `target` on `basis` with interaction strength `zeta_req`,
    /// rounding the inputs to multiples of `step · ζ`.
    pub fn synthesize(
        target: &DMatrix<f64>,
        basis: &ModeBasis,
        zeta_req: f64,
        step: f64,
    ) -> Result<Self> {
        let f = synthesize_inputs(target, basis, zeta_req)?;
        let mut s = DMatrix::zeros(basis.site_count(), basis.site_count());
        for (m, mat) in basis.matrices.iter().enumerate() {
            s += f[m] * mat;
        }
        let zeta = trace_norm(&s);
        if zeta < 1e-300 {
            return Err(CoreError::DegenerateProgram);
        }
        let quantized = if step > 0.0 { quantize_inputs(&f, step * zeta)? } else { f.clone() };
        let (recovered, zeta_recovered) = recovered_matrix(&quantized, basis)?;
        Ok(Self {
            target: target.clone(),
            zeta,
            inputs: f,
            quantized,
            recovered,
            zeta_recovered,
            step,
            mode_ids: basis.mode_ids.clone(),
        })
    }

    /// Recovered matrix rescaled to the target's scale, Σ f̃_m V_m / ζ —
    /// directly comparable element-wise with the target.
    pub fn recovered_target_scale(&self) -> DMatrix<f64> {
        &self.recovered * (self.zeta_recovered / self.zeta) * trace_norm(&self.target)
    }

    /// Dimensionless inputs f̃/ζ as programmed on the lasers.
    pub fn quantized_over_zeta(&self) -> DVector<f64> {
        &self.quantized / self.zeta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::single_mode_matrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn random_basis(n: usize, m: usize, seed: u64) -> ModeBasis {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<DMatrix<f64>> = (0..m)
            .map(|_| {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                single_mode_matrix(&(v.normalize()))
            })
            .collect();
        ModeBasis::new((0..m as u32).map(|i| (i, 0)).collect(), mats).unwrap()
    }

    #[test]
    fn gram_of_disjoint_modes_is_diagonal() {
        let v1 = unit(4, 0);
        let v2 = unit(4, 2);
        let g = gram_matrix(&[single_mode_matrix(&v1), single_mode_matrix(&v2)]);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(0, 0)], 1.0);
    }

    #[test]
    fn duplicate_modes_are_singular() {
        let v = DVector::from_vec(vec![1.0, 0.5, -0.25]);
        let m = single_mode_matrix(&v);
        let g = gram_matrix(&[m.clone(), m.clone()]);
        assert!(g.determinant().abs() < 1e-12);
        // and the basis constructor rejects them
        assert!(matches!(
            ModeBasis::new(vec![(0, 0), (1, 0)], vec![m.clone(), m]),
            Err(CoreError::IllConditioned { .. })
        ));
    }

    #[test]
    fn gram_matches_elementwise_double_loop() {
        let basis = random_basis(5, 6, 42);
        for a in 0..6 {
            for b in 0..6 {
                let mut brute = 0.0;
                for i in 0..5 {
                    for j in 0..5 {
                        brute += basis.matrices[a][(i, j)] * basis.matrices[b][(i, j)];
                    }
                }
                assert!((basis.gram[(a, b)] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthesis_of_single_basis_matrix() {
        let basis = random_basis(4, 5, 7);
        let f = synthesize_inputs(&basis.matrices[0].clone(), &basis, 1.0).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-10);
        for m in 1..5 {
            assert!(f[m].abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_basis_collapses_to_traces() {
        // disjoint-support unit modes: G = identity
        let mats: Vec<DMatrix<f64>> = (0..4).map(|i| single_mode_matrix(&unit(4, i))).collect();
        let basis = ModeBasis::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)], mats).unwrap();
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 0)] = 0.3;
        a[(2, 2)] = -1.7;
        let f = synthesize_inputs(&a, &basis, 2.0).unwrap();
        for m in 0..4 {
            let expect = 2.0 * frobenius_inner(&basis.matrices[m], &a);
            assert!((f[m] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn in_span_round_trip() {
        let basis = random_basis(6, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = DVector::from_fn(10, |_, _| rng.random_range(-2.0..2.0));
        let mut a = DMatrix::zeros(6, 6);
        for m in 0..10 {
            a += c[m] * &basis.matrices[m];
        }
        let zeta = 1.7;
        let f = synthesize_inputs(&a, &basis, zeta).unwrap();
        let mut s = DMatrix::zeros(6, 6);
        for m in 0..10 {
            s += f[m] * &basis.matrices[m];
        }
        assert!((s / zeta - &a).amax() < 1e-10);
    }

    #[test]
    fn synthesis_is_linear() {
        let basis = random_basis(5, 8, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut ChaCha8Rng| {
            let c = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let mut a = DMatrix::zeros(5, 5);
            for m in 0..8 {
                a += c[m] * &basis.matrices[m];
            }
            a
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let combo = 0.4 * &a + 1.9 * &b;
        let fa = synthesize_inputs(&a, &basis, 1.0).unwrap();
        let fb = synthesize_inputs(&b, &basis, 1.0).unwrap();
        let fc = synthesize_inputs(&combo, &basis, 1.0).unwrap();
        assert!((0.4 * fa + 1.9 * fb - fc).amax() < 1e-9);
    }

    #[test]
    fn quantization_definition() {
        let f = DVector::from_vec(vec![-23.04, 1.49]);
        let q = quantize_inputs(&f, 0.1).unwrap();
        assert!((q[0] + 23.0).abs() < 1e-12);
        assert!((q[1] - 1.5).abs() < 1e-12);
        // half away from zero
        let q2 = quantize_inputs(&DVector::from_vec(vec![0.05, -0.05]), 0.1).unwrap();
        assert!((q2[0] - 0.1).abs() < 1e-12);
        assert!((q2[1] + 0.1).abs() < 1e-12);
        // step -> 0 not allowed; tiny step recovers f
        let fine = quantize_inputs(&f, 1e-9).unwrap();
        assert!((fine - &f).amax() < 1e-9);
    }

    #[test]
    fn recovered_matrix_unit_trace_norm() {
        let basis = random_basis(5, 8, 9);
        let f = DVector::from_fn(8, |m, _| if m == 0 { 1.0 } else { 0.0 });
        let (rec, zeta) = recovered_matrix(&f, &basis).unwrap();
        assert!((trace_norm(&rec) - 1.0).abs() < 1e-10);
        assert!((zeta - trace_norm(&basis.matrices[0])).abs() < 1e-10);
        let zerof = DVector::zeros(8);
        assert!(matches!(recovered_matrix(&zerof, &basis), Err(CoreError::DegenerateProgram)));
    }

    #[test]
    fn pump_parameters_round_trip() {
        let f = DVector::from_vec(vec![-23.0, 1.5, 0.0, -0.4]);
        let kappa = 1000.0;
        let pumps = PumpSettings::from_inputs(&f, kappa).unwrap();
        pumps.verify_inputs(&f).unwrap();
        assert_eq!(pumps.eta[2], 0.0);
        // η² = 2 κ |f| at |Δ| = κ
        assert!((pumps.eta[0].powi(2) - 46.0 * kappa).abs() < 1e-6);
        for m in 0..4 {
            assert_eq!(pumps.delta[m].signum(), if f[m] > 0.0 { -1.0 } else { 1.0 });
        }
    }

    proptest::proptest! {
        #[test]
        fn quantization_moves_at_most_half_step(
            values in proptest::collection::vec(-1e3f64..1e3, 1..24),
            step in 1e-6f64..10.0,
        ) {
            let f = DVector::from_vec(values);
            let q = quantize_inputs(&f, step).unwrap();
            for i in 0..f.len() {
                proptest::prop_assert!((q[i] - f[i]).abs() <= step / 2.0 + 1e-12 * step);
                let k = q[i] / step;
                proptest::prop_assert!((k - k.round()).abs() <= 1e-9 * (1.0 + k.abs()));
            }
        }

        #[test]
        fn pump_settings_reproduce_any_inputs(
            values in proptest::collection::vec(-50f64..50.0, 1..16),
            kappa in 1f64..1e4,
        ) {
            let f = DVector::from_vec(values);
            let pumps = PumpSettings::from_inputs(&f, kappa).unwrap();
            proptest::prop_assert!(pumps.verify_inputs(&f).is_ok());
        }
    }

    #[test]
    fn quantization_error_bound_holds() {
        // ‖Ã − Â‖_max ≤ (step/2) Σ_m ‖V_m‖_max / ζ′ on random instances
        let basis = random_basis(6, 12, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let c = DVector::from_fn(12, |_, _| rng.random_range(-3.0..3.0));
            let mut a = DMatrix::zeros(6, 6);
            for m in 0..12 {
                a += c[m] * &basis.matrices[m];
            }
            let prog = InteractionProgram::synthesize(&a, &basis, 1.0, 0.1).unwrap();
            let a_hat = &a / trace_norm(&a);
            let dev = (&prog.recovered - a_hat).amax();
            let sum_vmax: f64 = basis.matrices.iter().map(|m| m.amax()).sum();
            let bound = 0.05 * prog.zeta * sum_vmax / prog.zeta_recovered;
            assert!(dev <= bound + 1e-12, "dev {dev:.3e} > bound {bound:.3e}");
        }
    }
}
