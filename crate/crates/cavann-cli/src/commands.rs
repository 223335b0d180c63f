//! Stage implementations shared by the subcommands and the pipeline.

use anyhow::{anyhow, bail, Context as _, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use cavann_core::anneal::{
    evolve, unit_conversion, AnnealSchedule, Integrator, JProfile, Ramp,
};
use cavann_core::coupling::{coupling_vector, single_mode_matrix};
use cavann_core::geometry::{HGMode, LatticePose};
use cavann_core::hopfield::{
    balance_check, brute_force_ground, energy_report, hebbian_weights, nu_upper_bound,
    recall_matrix, HopfieldProblem,
};
use cavann_core::lattice::{hubbard_tunneling, wannier_density, WannierOptions, WannierProfile};
use cavann_core::mode_search::{greedy_select, pose_scan, uniformity_filter, CandidatePool};
use cavann_core::presets;
use cavann_core::readout::{
    correlations, intensities, invert_intensities, output_signal, Reconstruction,
};
use cavann_core::sector::SpinSector;
use cavann_core::spin::{lowest_eigen, min_gap, low_spectrum, Boundary, SpinHamiltonian};
use cavann_core::synthesis::{InteractionProgram, ModeBasis, ModeId, PumpSettings};

use crate::config::ExperimentConfig;
use crate::output::{matrix_from_rows, matrix_rows, OutDir};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: OutDir,
}

impl Context {
    fn wannier(&self) -> Result<WannierProfile> {
        Ok(wannier_density(self.cfg.lattice.depth, self.cfg.spacing()?, WannierOptions::default())?)
    }

    fn sector(&self) -> Result<Arc<SpinSector>> {
        Ok(Arc::new(SpinSector::new(self.cfg.lattice.sites, self.cfg.lattice.atoms)?))
    }

    fn integrator(&self) -> Integrator {
        Integrator::SplitStep { dt: self.cfg.runtime.integrator_dt }
    }
}

// ---------------------------------------------------------------- selection

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub mode_ids: Vec<ModeId>,
    pub log_merit: f64,
    pub merit: f64,
    pub norm_ratio: f64,
    pub uniformity_accepted: bool,
    pub pose: LatticePose,
    pub poses_scanned: usize,
    pub pair_evals: usize,
    pub addition_evals: usize,
    pub replacement_evals: usize,
}

pub fn select_modes(
    ctx: &mut Context,
    dump_wannier: bool,
    dump_mode: Option<(u32, u32)>,
) -> Result<SelectionArtifact> {
    let geom = ctx.cfg.cavity()?;
    let wannier = ctx.wannier()?;
    let poses = ctx.cfg.poses()?;
    let candidates = ctx.cfg.candidate_modes();
    let m = ctx.cfg.basis_size();
    let passes = ctx.cfg.search.passes;

    let result = pose_scan(
        &poses,
        |pose| CandidatePool::build(&geom, pose, &wannier, &candidates),
        m,
        passes,
    )?;
    let (accepted, score) = uniformity_filter(&result, ctx.cfg.search.max_norm_ratio);

    let artifact = SelectionArtifact {
        mode_ids: result.mode_ids.clone(),
        log_merit: result.log_merit,
        merit: result.merit,
        norm_ratio: score,
        uniformity_accepted: accepted,
        pose: result.pose.clone(),
        poses_scanned: poses.len(),
        pair_evals: result.pair_evals,
        addition_evals: result.addition_evals,
        replacement_evals: result.replacement_evals,
    };
    ctx.out.write_json("selection.json", &artifact)?;

    println!("selected {} modes (n, l) with Gram log-det {:.4}:", artifact.mode_ids.len(), artifact.log_merit);
    let list: Vec<String> =
        artifact.mode_ids.iter().map(|(n, l)| format!("({n},{l})")).collect();
    println!("  {}", list.join(" "));
    println!(
        "norm uniformity {:.2} -> {}",
        score,
        if accepted { "accepted" } else { "rejected" }
    );

    if dump_wannier {
        let rows: Vec<Vec<f64>> = (0..wannier.density.len())
            .map(|i| vec![wannier.position(i), wannier.density[i]])
            .collect();
        ctx.out.write_csv(
            "wannier.csv",
            "x in lambda_ref, density in 1/lambda_ref",
            &["x", "density"],
            &rows,
        )?;
    }
    if let Some((n, l)) = dump_mode {
        let mode = HGMode::resonant(&geom, n, l, 0)?;
        let pose = &artifact.pose;
        let d = pose.spacing;
        let mut rows = Vec::new();
        let steps = 60 * (pose.n_sites + 4);
        for i in 0..=steps {
            let s = -2.0 * d + (pose.n_sites as f64 + 4.0) * d * i as f64 / steps as f64;
            rows.push(vec![s, mode.amplitude(pose.point_at(0, s))]);
        }
        ctx.out.write_csv(
            &format!("mode_{n}_{l}.csv"),
            "s along lattice line in lambda_ref, amplitude in 1/lambda_ref",
            &["s", "amplitude"],
            &rows,
        )?;
    }
    Ok(artifact)
}

pub fn load_selection(path: &Path) -> Result<SelectionArtifact> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading selection {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------- synthesis

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramArtifact {
    pub mode_ids: Vec<ModeId>,
    pub pose: LatticePose,
    pub target: Vec<Vec<f64>>,
    pub zeta: f64,
    pub zeta_recovered: f64,
    pub quantization_step: f64,
    pub inputs: Vec<f64>,
    pub quantized: Vec<f64>,
    /// Σ f̃ V / ζ′ (unit trace norm).
    pub recovered_unit: Vec<Vec<f64>>,
    /// Σ f̃ V / ζ · ‖target‖_tr-free scale: directly comparable to `target`.
    pub recovered_target_scale: Vec<Vec<f64>>,
    pub max_deviation_target_scale: f64,
    pub basis_condition: f64,
    pub pumps: PumpSettings,
}

/// Rebuild the coupling vectors and basis matrices of a stored selection.
fn rebuild_basis(
    cfg: &ExperimentConfig,
    selection: &SelectionArtifact,
    wannier: &WannierProfile,
) -> Result<(Vec<DVector<f64>>, ModeBasis)> {
    let geom = cfg.cavity()?;
    let mut vectors = Vec::with_capacity(selection.mode_ids.len());
    for &(n, l) in &selection.mode_ids {
        let mode = HGMode::resonant(&geom, n, l, 0)?;
        vectors.push(coupling_vector(&mode, &selection.pose, wannier)?);
    }
    let mats: Vec<DMatrix<f64>> = vectors.iter().map(single_mode_matrix).collect();
    let basis = ModeBasis::new(selection.mode_ids.clone(), mats)?;
    Ok((vectors, basis))
}

fn target_matrix(cfg: &ExperimentConfig) -> Result<DMatrix<f64>> {
    let weights = hebbian_weights(&cfg.problem.memories)?;
    let sums = balance_check(&cfg.problem.memories);
    if sums.iter().any(|&s| s != 0) {
        if cfg.problem.compensate_unbalanced {
            return Ok(cavann_core::hopfield::recall_matrix_compensated(
                &weights,
                &cfg.problem.input,
                cfg.problem.nu,
            )?);
        }
        eprintln!(
            "warning: unbalanced memories (sums {sums:?}) induce stray local fields; \
             set problem.compensate_unbalanced = true to correct the diagonal"
        );
    }
    Ok(recall_matrix(&weights, &cfg.problem.input, cfg.problem.nu)?)
}

pub fn synthesize(ctx: &mut Context, selection: &SelectionArtifact) -> Result<ProgramArtifact> {
    let wannier = ctx.wannier()?;
    let (_, basis) = rebuild_basis(&ctx.cfg, selection, &wannier)?;
    let target = target_matrix(&ctx.cfg)?;
    let program = InteractionProgram::synthesize(
        &target,
        &basis,
        ctx.cfg.synthesis.zeta,
        ctx.cfg.synthesis.quantization_step,
    )?;
    let pumps = PumpSettings::from_inputs(&program.quantized, ctx.cfg.synthesis.kappa)?;
    pumps.verify_inputs(&program.quantized)?;

    let recovered_scale = program.recovered_target_scale();
    let artifact = ProgramArtifact {
        mode_ids: basis.mode_ids.clone(),
        pose: selection.pose.clone(),
        target: matrix_rows(&target),
        zeta: program.zeta,
        zeta_recovered: program.zeta_recovered,
        quantization_step: program.step,
        inputs: program.inputs.iter().copied().collect(),
        quantized: program.quantized.iter().copied().collect(),
        recovered_unit: matrix_rows(&program.recovered),
        recovered_target_scale: matrix_rows(&recovered_scale),
        max_deviation_target_scale: (&recovered_scale - &target).amax(),
        basis_condition: basis.condition,
        pumps,
    };
    ctx.out.write_json("program.json", &artifact)?;

    let over_zeta = program.quantized_over_zeta();
    let rows: Vec<Vec<f64>> = basis
        .mode_ids
        .iter()
        .enumerate()
        .map(|(m, &(n, l))| vec![n as f64, l as f64, over_zeta[m]])
        .collect();
    ctx.out.write_csv(
        "inputs.csv",
        "per-mode quantized input f/zeta (dimensionless)",
        &["n", "l", "f_over_zeta"],
        &rows,
    )?;
    println!(
        "synthesized program: zeta = {:.4}, max |recovered - target| = {:.4}",
        artifact.zeta, artifact.max_deviation_target_scale
    );
    Ok(artifact)
}

pub fn load_program(path: &Path) -> Result<ProgramArtifact> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading program {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

// ----------------------------------------------------------------- spectrum

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumArtifact {
    pub min_gap: f64,
    pub zeta_star: f64,
    pub degenerate_gap: bool,
    pub ground_overlap_final: f64,
    pub levels: usize,
}

/// Expected recall winner: sector-restricted classical ground state.
fn expected_winner(cfg: &ExperimentConfig) -> Result<Vec<i8>> {
    let problem =
        HopfieldProblem::new(cfg.problem.memories.clone(), cfg.problem.input.clone(), cfg.problem.nu)?;
    let ground = brute_force_ground(&problem, Some(cfg.lattice.atoms))?;
    Ok(ground[0].clone())
}

pub fn spectrum(ctx: &mut Context, program: &ProgramArtifact) -> Result<SpectrumArtifact> {
    let sector = ctx.sector()?;
    let a = matrix_from_rows(&program.recovered_target_scale);
    let h = SpinHamiltonian::build(sector.clone(), 1.0, 0.0, &a, Boundary::Open)?;

    let k = ctx.cfg.spectrum.levels.min(sector.dim());
    let points = ctx.cfg.spectrum.grid_points.max(3);
    let zf = ctx.cfg.schedule.zeta_final;
    let zetas: Vec<f64> = (0..points).map(|i| zf * i as f64 / (points - 1) as f64).collect();
    let curves = low_spectrum(&h, k, &zetas)?;

    let target = expected_winner(&ctx.cfg)?;
    let target_idx = sector.index_of_pattern(&target)?;
    let mut unit = DVector::zeros(sector.dim());
    unit[target_idx] = 1.0;

    let mut rows = Vec::with_capacity(points);
    for (i, z) in zetas.iter().enumerate() {
        let mut row = vec![*z];
        row.extend(curves.spectra[i].energies.iter());
        row.push(curves.spectra[i].gap());
        rows.push(row);
    }
    let mut cols: Vec<String> = vec!["zeta_over_j".into()];
    cols.extend((0..k).map(|i| format!("e{i}")));
    cols.push("gap".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    ctx.out.write_csv("spectrum.csv", "zeta and energies in J", &col_refs, &rows)?;

    let mg = min_gap(&h, 0.0, zf, points)?;
    let final_spec = lowest_eigen(&h.with_zeta(zf), 2)?;
    let overlap = final_spec.overlap_sq(0, &unit);
    let artifact = SpectrumArtifact {
        min_gap: mg.gap,
        zeta_star: mg.zeta_star,
        degenerate_gap: mg.degenerate,
        ground_overlap_final: overlap,
        levels: k,
    };
    ctx.out.write_json("spectrum_summary.json", &artifact)?;

    // sparse export for external verification
    let triplets = h.with_zeta(zf).triplets();
    let rows: Vec<Vec<f64>> =
        triplets.iter().map(|&(r, c, v)| vec![r as f64, c as f64, v]).collect();
    ctx.out.write_csv(
        "hamiltonian_triplets.csv",
        &format!("sector Hamiltonian at zeta = {zf} J, COO entries in J"),
        &["row", "col", "value"],
        &rows,
    )?;

    println!(
        "spectrum: min gap {:.4} J at zeta = {:.4} J; ground overlap with winner at zeta_f: {:.4}",
        mg.gap, mg.zeta_star, overlap
    );
    Ok(artifact)
}

// ------------------------------------------------------------------- anneal

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealRunArtifact {
    pub tau: f64,
    pub final_overlaps: BTreeMap<String, f64>,
    pub winner: String,
    pub ground_overlap_final: f64,
    pub norm_drift: f64,
    pub magnetization_drift: f64,
    pub wall_seconds_estimate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnealArtifact {
    pub runs: Vec<AnnealRunArtifact>,
}

pub fn anneal(
    ctx: &mut Context,
    program: &ProgramArtifact,
) -> Result<(AnnealArtifact, DVector<Complex64>)> {
    let sector = ctx.sector()?;
    let a = matrix_from_rows(&program.recovered_target_scale);
    let h = SpinHamiltonian::build(sector.clone(), 1.0, 0.0, &a, Boundary::Open)?;
    let target = expected_winner(&ctx.cfg)?;
    let j_recoil = hubbard_tunneling(ctx.cfg.lattice.depth)?;

    let mut runs = Vec::new();
    let mut last_state = None;
    for &tau in &ctx.cfg.schedule.taus {
        let schedule = AnnealSchedule {
            ramp: Ramp::Linear,
            zeta_final: ctx.cfg.schedule.zeta_final,
            tau,
            j_profile: JProfile::Constant,
            samples: ctx.cfg.schedule.samples,
        };
        let record = evolve(&h, &schedule, ctx.integrator(), Some(&target))?;

        let n = sector.n_sites;
        let mut rows = Vec::with_capacity(record.times.len());
        for (i, t) in record.times.iter().enumerate() {
            let mut row = vec![*t];
            row.extend(record.sz[i].iter());
            row.push(record.ground_overlap[i]);
            row.push(record.target_overlap.as_ref().unwrap()[i]);
            rows.push(row);
        }
        let mut cols: Vec<String> = vec!["t_j".into()];
        cols.extend((1..=n).map(|i| format!("sz_{i}")));
        cols.push("ground_overlap".into());
        cols.push("target_overlap".into());
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        ctx.out.write_csv(
            &format!("trajectory_tau{tau:.0}.csv"),
            "time in 1/J, spins dimensionless",
            &col_refs,
            &rows,
        )?;

        // final overlaps with every configured pattern
        let psi = record.states.last().unwrap().clone();
        let mut final_overlaps = BTreeMap::new();
        for (p, mem) in ctx.cfg.problem.memories.iter().enumerate() {
            let idx = sector.index_of_pattern(mem)?;
            final_overlaps.insert(format!("memory_{}", p + 1), psi[idx].norm_sqr());
        }
        if let Ok(idx) = sector.index_of_pattern(&ctx.cfg.problem.input) {
            final_overlaps.insert("input".into(), psi[idx].norm_sqr());
        }
        let winner = final_overlaps
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k.clone())
            .unwrap_or_default();
        runs.push(AnnealRunArtifact {
            tau,
            final_overlaps,
            winner,
            ground_overlap_final: *record.ground_overlap.last().unwrap(),
            norm_drift: record.norm_drift,
            magnetization_drift: record.magnetization_drift,
            wall_seconds_estimate: unit_conversion(tau, j_recoil, presets::golden::RECOIL_RATE)?,
        });
        last_state = Some(psi);
    }
    let artifact = AnnealArtifact { runs };
    ctx.out.write_json("anneal_summary.json", &artifact)?;
    for run in &artifact.runs {
        println!(
            "anneal tau = {:>6.1}/J (~{:.0} ms): winner {} at overlap {:.4}, ground overlap {:.4}",
            run.tau,
            run.wall_seconds_estimate * 1e3,
            run.winner,
            run.final_overlaps[&run.winner],
            run.ground_overlap_final
        );
    }
    Ok((artifact, last_state.expect("at least one tau")))
}

// ------------------------------------------------------------------ readout

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadoutArtifact {
    pub reconstruction: Reconstruction,
    pub rounded_spins: Vec<i8>,
    pub matches_expected_winner: bool,
}

fn xorshift_normal(state: &mut u64) -> f64 {
    let mut next = || {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state >> 11) as f64 / (1u64 << 53) as f64
    };
    let (u1, u2): (f64, f64) = (next().max(1e-300), next());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn readout(
    ctx: &mut Context,
    program: &ProgramArtifact,
    state: Option<&DVector<Complex64>>,
) -> Result<ReadoutArtifact> {
    let sector = ctx.sector()?;
    let wannier = ctx.wannier()?;
    let selection = SelectionArtifact {
        mode_ids: program.mode_ids.clone(),
        log_merit: 0.0,
        merit: 0.0,
        norm_ratio: 0.0,
        uniformity_accepted: true,
        pose: program.pose.clone(),
        poses_scanned: 1,
        pair_evals: 0,
        addition_evals: 0,
        replacement_evals: 0,
    };
    let (couplings, _) = rebuild_basis(&ctx.cfg, &selection, &wannier)?;

    // Fig-style signatures of the stored patterns under the programmed pumps
    for (p, mem) in ctx.cfg.problem.memories.iter().enumerate() {
        let idx = sector.index_of_pattern(mem)?;
        let mut psi = DVector::from_element(sector.dim(), Complex64::new(0.0, 0.0));
        psi[idx] = Complex64::new(1.0, 0.0);
        let corr = correlations(&sector, &psi);
        let ints = intensities(&corr, &couplings, &program.pumps);
        let rows: Vec<Vec<f64>> = program
            .mode_ids
            .iter()
            .zip(&ints)
            .map(|(&(n, l), &i)| vec![n as f64, l as f64, i])
            .collect();
        ctx.out.write_csv(
            &format!("intensities_memory{}.csv", p + 1),
            "intracavity photon number per mode",
            &["n", "l", "intensity"],
            &rows,
        )?;
    }

    // reconstruct the supplied state (or the expected winner's basis state)
    let psi = match state {
        Some(s) => s.clone(),
        None => {
            let winner = expected_winner(&ctx.cfg)?;
            let idx = sector.index_of_pattern(&winner)?;
            let mut v = DVector::from_element(sector.dim(), Complex64::new(0.0, 0.0));
            v[idx] = Complex64::new(1.0, 0.0);
            v
        }
    };
    let probe = PumpSettings::uniform_probe(
        couplings.len(),
        ctx.cfg.synthesis.kappa,
        ctx.cfg.readout.probe_eta,
    );
    let sig = output_signal(&sector, &psi, &couplings, &probe);
    let mut measured = sig.intensities.clone();
    if ctx.cfg.readout.noise > 0.0 {
        let mut rng_state = ctx.cfg.runtime.seed | 1;
        let scale = measured.iter().cloned().fold(0.0, f64::max);
        for v in &mut measured {
            *v += ctx.cfg.readout.noise * scale * xorshift_normal(&mut rng_state);
        }
    }
    let rec = invert_intensities(&measured, &couplings, &probe, ctx.cfg.readout.ridge)?;
    let rows: Vec<Vec<f64>> = program
        .mode_ids
        .iter()
        .zip(&measured)
        .map(|(&(n, l), &i)| vec![n as f64, l as f64, i])
        .collect();
    ctx.out.write_csv(
        "intensities_final_state.csv",
        "intracavity photon number per mode",
        &["n", "l", "intensity"],
        &rows,
    )?;

    let rounded: Vec<i8> = rec.spins.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect();
    let expected = expected_winner(&ctx.cfg)?;
    let artifact = ReadoutArtifact {
        matches_expected_winner: rounded == expected,
        rounded_spins: rounded,
        reconstruction: rec,
    };
    ctx.out.write_json("reconstruction.json", &artifact)?;
    println!(
        "readout: spins {:?}, residual {:.2e}, matches expected winner: {}",
        artifact.rounded_spins, artifact.reconstruction.residual, artifact.matches_expected_winner
    );
    Ok(artifact)
}

// ----------------------------------------------------------------- hopfield

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsArtifact {
    pub nu_interval: (f64, f64),
    pub memory_energies: Vec<f64>,
    pub input_energy: f64,
    pub input_overlaps: Vec<f64>,
    pub degenerate_memories: bool,
    pub balance_sums: Vec<i64>,
    pub sector_winner: Vec<i8>,
}

pub fn hopfield_bounds(ctx: &mut Context) -> Result<BoundsArtifact> {
    let cfg = &ctx.cfg;
    let problem =
        HopfieldProblem::new(cfg.problem.memories.clone(), cfg.problem.input.clone(), cfg.problem.nu)?;
    let report = energy_report(&problem)?;
    let winner = expected_winner(cfg)?;

    // energy-vs-nu table: input plus every memory
    let bound = nu_upper_bound(&problem)?;
    let nu_max = (1.5 * bound).max(1.0);
    let steps = 120;
    let mut rows = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let nu = nu_max * i as f64 / steps as f64;
        let p = HopfieldProblem::new(problem.memories.clone(), problem.input.clone(), nu)?;
        let mut row = vec![nu, p.energy(&p.input)];
        for mem in &p.memories {
            row.push(p.energy(mem));
        }
        rows.push(row);
    }
    let mut cols: Vec<String> = vec!["nu".into(), "e_input".into()];
    cols.extend((1..=problem.memories.len()).map(|i| format!("e_memory_{i}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    ctx.out.write_csv("energies_vs_nu.csv", "energies dimensionless", &col_refs, &rows)?;

    let artifact = BoundsArtifact {
        nu_interval: report.nu_interval,
        memory_energies: report.memory_energies,
        input_energy: report.input_energy,
        input_overlaps: report.input_overlaps,
        degenerate_memories: report.degenerate_memories,
        balance_sums: balance_check(&problem.memories),
        sector_winner: winner,
    };
    ctx.out.write_json("hopfield_bounds.json", &artifact)?;
    println!(
        "bias interval: ({}, {}); expected sector winner {:?}",
        artifact.nu_interval.0, artifact.nu_interval.1, artifact.sector_winner
    );
    Ok(artifact)
}

// ----------------------------------------------------------------- pipeline

pub fn pipeline(
    ctx: &mut Context,
    stop_after: Option<&str>,
    reuse_selection: Option<&Path>,
) -> Result<()> {
    let stages = ["select-modes", "synthesize", "spectrum", "anneal", "readout"];
    if let Some(name) = stop_after {
        if !stages.contains(&name) {
            bail!("unknown stage '{name}'; expected one of {stages:?}");
        }
    }
    let stop = |name: &str| stop_after == Some(name);

    let selection = match reuse_selection {
        Some(path) => load_selection(path).context("stage select-modes (reuse)")?,
        None => select_modes(ctx, false, None).context("stage select-modes")?,
    };
    if stop("select-modes") {
        return Ok(());
    }
    let program = synthesize(ctx, &selection).context("stage synthesize")?;
    if stop("synthesize") {
        return Ok(());
    }
    spectrum(ctx, &program).context("stage spectrum")?;
    if stop("spectrum") {
        return Ok(());
    }
    let (_, final_state) = anneal(ctx, &program).context("stage anneal")?;
    if stop("anneal") {
        return Ok(());
    }
    readout(ctx, &program, Some(&final_state)).context("stage readout")?;
    hopfield_bounds(ctx).context("stage hopfield-bounds")?;
    Ok(())
}

// ------------------------------------------------------------------- golden

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenFixture {
    pub schema_version: u32,
    pub quantities: BTreeMap<String, FixtureEntry>,
}

impl GoldenFixture {
    pub fn builtin() -> Self {
        use presets::golden as g;
        let mut quantities = BTreeMap::new();
        let mut add = |name: &str, value: f64, tolerance: f64| {
            quantities.insert(name.to_string(), FixtureEntry { value, tolerance });
        };
        add("sector_dimension", g::SECTOR_DIM as f64, 0.0);
        add("min_gap", g::MIN_GAP, g::MIN_GAP_TOL);
        add("min_gap_zeta", g::ZETA_STAR, g::ZETA_STAR_TOL);
        add("ground_overlap_2j", g::GROUND_OVERLAP, g::GROUND_OVERLAP_TOL);
        add("anneal_overlap_tau50", g::ANNEAL_OVERLAP, g::ANNEAL_OVERLAP_TOL);
        add("nu_upper_bound", g::NU_BOUND, 0.0);
        add("tunneling_depth10", g::J_AT_DEPTH_10, g::J_AT_DEPTH_10 * g::J_REL_TOL);
        add("ramp_seconds", g::TAU_SECONDS, g::TAU_SECONDS * g::TAU_REL_TOL);
        add("selection_log_volume", g::SELECTION_VOLUME.ln(), g::SELECTION_LOG_TOL);
        Self { schema_version: crate::config::SCHEMA_VERSION, quantities }
    }
}

/// Compute the comparison bundle on the bundled reference instance.
pub fn golden_bundle(ctx: &mut Context) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let sector = Arc::new(SpinSector::new(presets::N_SITES, presets::N_ATOMS)?);
    out.insert("sector_dimension".into(), sector.dim() as f64);

    let a = presets::recovered_matrix_1();
    let h = SpinHamiltonian::build(sector.clone(), 1.0, 0.0, &a, Boundary::Open)?;
    let mg = min_gap(&h, 0.0, 2.0, 201)?;
    out.insert("min_gap".into(), mg.gap);
    out.insert("min_gap_zeta".into(), mg.zeta_star);

    let spec = lowest_eigen(&h.with_zeta(2.0), 2)?;
    let idx = sector.index_of_pattern(&presets::MEMORY_1)?;
    let mut unit = DVector::zeros(sector.dim());
    unit[idx] = 1.0;
    out.insert("ground_overlap_2j".into(), spec.overlap_sq(0, &unit));

    let schedule = AnnealSchedule::linear(2.0, 50.0);
    let record = evolve(&h, &schedule, ctx.integrator(), Some(&presets::MEMORY_1))?;
    out.insert(
        "anneal_overlap_tau50".into(),
        *record.target_overlap.as_ref().unwrap().last().unwrap(),
    );

    out.insert("nu_upper_bound".into(), nu_upper_bound(&presets::problem(1))?);
    let j = hubbard_tunneling(10.0)?;
    out.insert("tunneling_depth10".into(), j);
    out.insert("ramp_seconds".into(), unit_conversion(50.0, j, presets::golden::RECOIL_RATE)?);

    let geom = presets::geometry();
    let pose = presets::pose();
    let wannier = presets::wannier()?;
    let pool = CandidatePool::build(&geom, &pose, &wannier, &presets::candidate_modes())?;
    let sel = greedy_select(&pool, 36, 1)?;
    out.insert("selection_log_volume".into(), 0.5 * sel.log_merit);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenReport {
    pub results: Vec<GoldenLine>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenLine {
    pub quantity: String,
    pub expected: f64,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

pub fn golden(
    ctx: &mut Context,
    fixture_path: Option<&Path>,
    bundle_path: Option<&Path>,
) -> Result<GoldenReport> {
    let fixture: GoldenFixture = match fixture_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading fixture {}", path.display()))?;
            serde_json::from_str(&text)?
        }
        None => GoldenFixture::builtin(),
    };
    let bundle: BTreeMap<String, f64> = match bundle_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading bundle {}", path.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text)?;
            let map = doc
                .get("quantities")
                .and_then(|q| q.as_object())
                .ok_or_else(|| anyhow!("bundle has no 'quantities' object"))?;
            map.iter()
                .map(|(k, v)| {
                    v.as_f64()
                        .map(|x| (k.clone(), x))
                        .ok_or_else(|| anyhow!("bundle quantity '{k}' is not a number"))
                })
                .collect::<Result<_>>()?
        }
        None => golden_bundle(ctx)?,
    };
    ctx.out.write_json(
        "golden_bundle.json",
        &serde_json::json!({ "quantities": bundle }),
    )?;

    let mut results = Vec::new();
    let mut passed = true;
    for (name, entry) in &fixture.quantities {
        let measured = *bundle
            .get(name)
            .ok_or_else(|| anyhow!("bundle is missing fixture quantity '{name}'"))?;
        let ok = (measured - entry.value).abs() <= entry.tolerance;
        passed &= ok;
        println!(
            "golden {name:<24} expected {:>12.6} ± {:<9.4} measured {:>12.6}  {}",
            entry.value,
            entry.tolerance,
            measured,
            if ok { "PASS" } else { "FAIL" }
        );
        results.push(GoldenLine {
            quantity: name.clone(),
            expected: entry.value,
            tolerance: entry.tolerance,
            measured,
            pass: ok,
        });
    }
    let report = GoldenReport { results, passed };
    ctx.out.write_json("golden_report.json", &report)?;
    Ok(report)
}
