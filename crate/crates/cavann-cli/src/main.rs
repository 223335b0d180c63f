//! `cavann` — drive the multimode-cavity annealer simulation from mode
//! selection through annealing and readout, emitting CSV/JSON artifacts.

mod commands;
mod config;
mod output;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::Context;
use config::ExperimentConfig;
use output::OutDir;

#[derive(Parser)]
#[command(name = "cavann", version, about = "Multimode-cavity quantum annealer simulator")]
struct Cli {
    /// Experiment configuration (TOML; .json also accepted). Defaults to
    /// the bundled reference instance.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides runtime.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (overrides runtime.threads; 0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Random seed (overrides runtime.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a well-spanning mode subset at the configured pose(s).
    SelectModes {
        /// Also dump the sampled Wannier density as CSV.
        #[arg(long)]
        dump_wannier: bool,
        /// Also dump one mode's amplitude along the lattice line ("n,l").
        #[arg(long)]
        dump_mode: Option<String>,
    },
    /// Turn the configured problem matrix into laser inputs.
    Synthesize {
        /// Reuse a stored selection (default: <out>/selection.json).
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Eigenvalue curves and minimum gap of the programmed Hamiltonian.
    Spectrum {
        /// Program file (default: <out>/program.json).
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Time evolution through the annealing ramp.
    Anneal {
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Forward-model output intensities and invert them back to spins.
    Readout {
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Energy landscape and bias bounds of the configured recall problem.
    HopfieldBounds,
    /// Run select-modes → synthesize → spectrum → anneal → readout.
    Pipeline {
        /// Stop after the named stage.
        #[arg(long)]
        stage: Option<String>,
        /// Reuse a stored selection instead of searching.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Compare computed reference quantities against a tolerance fixture.
    Golden {
        /// Fixture JSON (default: built-in reference values).
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Reuse a previously computed bundle instead of recomputing.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(threads) = cli.threads {
        cfg.runtime.threads = threads;
    }
    if let Some(seed) = cli.seed {
        cfg.runtime.seed = seed;
    }
    let out_root = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.runtime.out_dir));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.runtime.threads)
        .build()
        .context("building worker pool")?;

    pool.install(|| -> Result<bool> {
        // hash the experiment content only: worker count and output path
        // cannot change results, so they are normalized away
        let mut canonical = cfg.clone();
        canonical.runtime.threads = 0;
        canonical.runtime.out_dir = String::new();
        let out = OutDir::create(&out_root, &canonical.to_toml()?, cfg.runtime.seed, cfg.runtime.threads)?;
        let mut ctx = Context { cfg, out };
        let mut all_ok = true;
        let result = (|| -> Result<()> {
            match &cli.cmd {
                Cmd::SelectModes { dump_wannier, dump_mode } => {
                    let mode = match dump_mode {
                        Some(text) => Some(parse_mode(text)?),
                        None => None,
                    };
                    commands::select_modes(&mut ctx, *dump_wannier, mode)?;
                }
                Cmd::Synthesize { selection } => {
                    let path = selection.clone().unwrap_or_else(|| ctx.out.path("selection.json"));
                    let sel = commands::load_selection(&path)?;
                    commands::synthesize(&mut ctx, &sel)?;
                }
                Cmd::Spectrum { program } => {
                    let path = program.clone().unwrap_or_else(|| ctx.out.path("program.json"));
                    let prog = commands::load_program(&path)?;
                    commands::spectrum(&mut ctx, &prog)?;
                }
                Cmd::Anneal { program } => {
                    let path = program.clone().unwrap_or_else(|| ctx.out.path("program.json"));
                    let prog = commands::load_program(&path)?;
                    commands::anneal(&mut ctx, &prog)?;
                }
                Cmd::Readout { program } => {
                    let path = program.clone().unwrap_or_else(|| ctx.out.path("program.json"));
                    let prog = commands::load_program(&path)?;
                    commands::readout(&mut ctx, &prog, None)?;
                }
                Cmd::HopfieldBounds => {
                    commands::hopfield_bounds(&mut ctx)?;
                }
                Cmd::Pipeline { stage, selection } => {
                    commands::pipeline(&mut ctx, stage.as_deref(), selection.as_deref())?;
                }
                Cmd::Golden { fixture, bundle } => {
                    let report = commands::golden(&mut ctx, fixture.as_deref(), bundle.as_deref())?;
                    all_ok = report.passed;
                }
            }
            Ok(())
        })();
        // persist whatever was produced, also on stage errors
        ctx.out.finalize()?;
        result?;
        Ok(all_ok)
    })
}

fn parse_mode(text: &str) -> Result<(u32, u32)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("--dump-mode expects 'n,l', got '{text}'");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
