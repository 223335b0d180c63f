//! Experiment configuration: one human-editable TOML file (JSON accepted)
//! covering geometry, lattice, search, problem, schedule and runtime.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use cavann_core::geometry::{CavityGeometry, LatticePose};
use cavann_core::synthesis::ModeId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub geometry: GeometryBlock,
    pub candidates: CandidateBlock,
    pub lattice: LatticeBlock,
    pub pose: PoseBlock,
    pub search: SearchBlock,
    pub problem: ProblemBlock,
    pub synthesis: SynthesisBlock,
    pub schedule: ScheduleBlock,
    pub spectrum: SpectrumBlock,
    pub readout: ReadoutBlock,
    pub runtime: RuntimeBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryBlock {
    /// Cavity length in units of λ_ref.
    pub length: f64,
    /// Mirror curvature over length, R/L.
    pub mirror_ratio: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self { length: 50.0, mirror_ratio: 2.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateBlock {
    pub n_min: u32,
    pub n_max: u32,
    pub l_max: u32,
}

impl Default for CandidateBlock {
    fn default() -> Self {
        Self { n_min: 100, n_max: 199, l_max: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeBlock {
    pub sites: usize,
    pub atoms: usize,
    /// Depth V_L in recoil units E_R.
    pub depth: f64,
    /// Site spacing as a multiple of λ_ref_mode/2 of the (n_min, 0, 0) mode.
    pub spacing_factor: f64,
}

impl Default for LatticeBlock {
    fn default() -> Self {
        Self { sites: 8, atoms: 4, depth: 10.0, spacing_factor: 1.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PoseBlock {
    /// First-site coordinates in units of the site spacing d.
    pub z0: f64,
    pub x0: f64,
    pub y0: f64,
    /// In-plane angle from the cavity axis, degrees.
    pub angle_deg: f64,
}

impl Default for PoseBlock {
    fn default() -> Self {
        Self { z0: -5.0, x0: -2.0, y0: 0.0, angle_deg: 47.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SearchBlock {
    /// Basis size M; 0 means N(N+1)/2.
    pub basis_size: usize,
    pub max_norm_ratio: f64,
    /// Replacement sweeps in the greedy search.
    pub passes: usize,
    /// Additional poses to scan (the base pose is always included).
    pub pose_grid: Vec<PoseBlock>,
}

impl Default for SearchBlock {
    fn default() -> Self {
        Self { basis_size: 0, max_norm_ratio: 100.0, passes: 1, pose_grid: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemBlock {
    pub memories: Vec<Vec<i8>>,
    pub input: Vec<i8>,
    pub nu: f64,
    /// Compensate the target diagonal when memories are unbalanced
    /// (Σ_j w_p^j ≠ 0), keeping the induced local fields at 2νχ.
    pub compensate_unbalanced: bool,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        Self {
            memories: vec![
                vec![1, 1, -1, -1, 1, -1, 1, -1],
                vec![1, 1, -1, 1, 1, -1, -1, -1],
            ],
            input: vec![1, 1, 1, -1, -1, -1, 1, -1],
            nu: 0.7,
            compensate_unbalanced: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisBlock {
    /// Interaction strength passed to the Gram inversion.
    pub zeta: f64,
    /// Input quantization step in units of ζ (0 disables rounding).
    pub quantization_step: f64,
    /// Cavity decay rate κ in units of J/ħ for the pump settings.
    pub kappa: f64,
}

impl Default for SynthesisBlock {
    fn default() -> Self {
        Self { zeta: 1.0, quantization_step: 0.1, kappa: 1000.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleBlock {
    /// Final interaction strength in units of J.
    pub zeta_final: f64,
    /// Annealing times in 1/J units.
    pub taus: Vec<f64>,
    pub samples: usize,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self { zeta_final: 2.0, taus: vec![50.0], samples: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumBlock {
    /// Number of eigenvalue curves.
    pub levels: usize,
    /// ζ-grid points between 0 and zeta_final.
    pub grid_points: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { levels: 8, grid_points: 201 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutBlock {
    /// Probe pump strength for the uniform readout drive.
    pub probe_eta: f64,
    /// Additive Gaussian noise on the measured signals (0 = off).
    pub noise: f64,
    /// Ridge parameter for the inversions.
    pub ridge: f64,
}

impl Default for ReadoutBlock {
    fn default() -> Self {
        Self { probe_eta: 100.0, noise: 0.0, ridge: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeBlock {
    /// Worker threads (0 = all cores).
    pub threads: usize,
    pub seed: u64,
    pub out_dir: String,
    /// Split-step integrator step in 1/J units.
    pub integrator_dt: f64,
}

impl Default for RuntimeBlock {
    fn default() -> Self {
        Self { threads: 0, seed: 1, out_dir: "out".into(), integrator_dt: 2e-3 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: Default::default(),
            candidates: Default::default(),
            lattice: Default::default(),
            pose: Default::default(),
            search: Default::default(),
            problem: Default::default(),
            synthesis: Default::default(),
            schedule: Default::default(),
            spectrum: Default::default(),
            readout: Default::default(),
            runtime: Default::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Cross-field consistency; every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version: expected {SCHEMA_VERSION}, found {}", self.schema_version);
        }
        let n = self.lattice.sites;
        if self.lattice.atoms > n {
            bail!("lattice.atoms: {} exceeds lattice.sites = {n}", self.lattice.atoms);
        }
        if !(self.lattice.depth > 0.0) {
            bail!("lattice.depth: must be positive, found {}", self.lattice.depth);
        }
        if self.candidates.n_min < 1 || self.candidates.n_max < self.candidates.n_min {
            bail!(
                "candidates.n_min/n_max: invalid range {}..{}",
                self.candidates.n_min,
                self.candidates.n_max
            );
        }
        let m = self.basis_size();
        let pool = (self.candidates.n_max - self.candidates.n_min + 1) as usize
            * (self.candidates.l_max + 1) as usize;
        if m > pool {
            bail!("search.basis_size: {m} exceeds the candidate pool of {pool} modes");
        }
        if m > n * (n + 1) / 2 {
            bail!("search.basis_size: {m} exceeds N(N+1)/2 = {}", n * (n + 1) / 2);
        }
        if self.problem.input.len() != n {
            bail!("problem.input: length {} does not match lattice.sites = {n}", self.problem.input.len());
        }
        for (i, mem) in self.problem.memories.iter().enumerate() {
            if mem.len() != n {
                bail!("problem.memories[{i}]: length {} does not match lattice.sites = {n}", mem.len());
            }
        }
        if self.problem.nu < 0.0 {
            bail!("problem.nu: must be non-negative, found {}", self.problem.nu);
        }
        if self.schedule.taus.is_empty() {
            bail!("schedule.taus: at least one annealing time required");
        }
        if self.schedule.samples < 2 {
            bail!("schedule.samples: need at least 2, found {}", self.schedule.samples);
        }
        if !(self.runtime.integrator_dt > 0.0) {
            bail!("runtime.integrator_dt: must be positive");
        }
        Ok(())
    }

    /// Basis size M, defaulting to N(N+1)/2.
    pub fn basis_size(&self) -> usize {
        if self.search.basis_size == 0 {
            self.lattice.sites * (self.lattice.sites + 1) / 2
        } else {
            self.search.basis_size
        }
    }

    pub fn cavity(&self) -> Result<CavityGeometry> {
        Ok(CavityGeometry::new(self.geometry.length, self.geometry.mirror_ratio)?)
    }

    /// Site spacing: spacing_factor · λ/2 of the (n_min, 0, 0) mode.
    pub fn spacing(&self) -> Result<f64> {
        let geom = self.cavity()?;
        let k = cavann_core::geometry::resonant_wavenumber(&geom, self.candidates.n_min, 0, 0)?;
        Ok(self.lattice.spacing_factor * (std::f64::consts::PI / k))
    }

    pub fn pose_from(&self, block: &PoseBlock) -> Result<LatticePose> {
        let d = self.spacing()?;
        Ok(LatticePose::new(
            self.lattice.sites,
            d,
            [block.x0 * d, block.y0 * d, block.z0 * d],
            block.angle_deg,
        ))
    }

    pub fn base_pose(&self) -> Result<LatticePose> {
        self.pose_from(&self.pose)
    }

    /// Base pose followed by the configured grid.
    pub fn poses(&self) -> Result<Vec<LatticePose>> {
        let mut out = vec![self.base_pose()?];
        for block in &self.search.pose_grid {
            out.push(self.pose_from(block)?);
        }
        Ok(out)
    }

    pub fn candidate_modes(&self) -> Vec<ModeId> {
        let mut out = Vec::new();
        for n in self.candidates.n_min..=self.candidates.n_max {
            for l in 0..=self.candidates.l_max {
                out.push((n, l));
            }
        }
        out
    }
}
