//! `voxwalk` command-line interface: voxelize structures, train the
//! denoiser, sample pocket-conditioned molecules, and evaluate the results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SampleBackend;
use config::{Preset, RunConfig};
use voxwalk::VoxwalkError;

#[derive(Parser)]
#[command(name = "voxwalk", version, about = "Pocket-conditioned molecule generation on voxel grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file (a previous run's config.resolved works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter preset: desk (small grids) or paper (production scale).
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap; 1 guarantees byte-identical reruns.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid_length: Option<usize>,
    #[arg(long)]
    resolution: Option<f32>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Override any config key, e.g. --set chains=4 (highest precedence).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> voxwalk::Result<RunConfig> {
        let mut cfg = RunConfig::preset(Preset::parse(&self.preset)?);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.seed {
            cfg.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.threads {
            cfg.set("threads", &v.to_string())?;
        }
        if let Some(v) = self.grid_length {
            cfg.set("grid_length", &v.to_string())?;
        }
        if let Some(v) = self.resolution {
            cfg.set("resolution", &v.to_string())?;
        }
        if let Some(v) = self.sigma {
            cfg.set("sigma", &v.to_string())?;
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                VoxwalkError::Invalid(format!("--set expects key=value, got '{kv}'"))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Center, optionally augment, and voxelize a ligand (and pocket) pair.
    Voxelize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ligand: PathBuf,
        #[arg(long)]
        pocket: Option<PathBuf>,
        /// Apply one seeded random rigid-body augmentation before voxelizing.
        #[arg(long)]
        augment_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the conditional denoiser on a manifest of VXGR grid pairs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Lines of `<ligand.vxgr> <pocket.vxgr>`, relative to the manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Continue from a previous weights.vxwt instead of fresh weights.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run conditional walk-jump sampling and recover molecules.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Trained weights file (requires --pocket).
        #[arg(long, requires = "pocket", conflicts_with_all = ["oracle", "pocket_key"])]
        weights: Option<PathBuf>,
        /// Pocket grid (VXGR) conditioning the denoiser backend.
        #[arg(long)]
        pocket: Option<PathBuf>,
        /// Mixture-oracle manifest: lines of `<key> <ligand.vxgr>`.
        #[arg(long, requires = "pocket_key")]
        oracle: Option<PathBuf>,
        /// Pocket key selecting oracle components.
        #[arg(long)]
        pocket_key: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare generated structures against a reference set.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Pocket structure for clash counting.
        #[arg(long)]
        pocket: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Voxelize a ligand and report how well peak detection recovers it.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Vox(VoxwalkError),
}

impl From<VoxwalkError> for CliError {
    fn from(e: VoxwalkError) -> CliError {
        CliError::Vox(e)
    }
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn run(cmd: &Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Voxelize {
            common,
            ligand,
            pocket,
            augment_seed,
            out,
        } => {
            let cfg = common.resolve()?;
            init_threads(cfg.threads);
            Ok(commands::cmd_voxelize(
                &cfg,
                ligand,
                pocket.as_deref(),
                *augment_seed,
                out,
            )?)
        }
        Cmd::Train {
            common,
            manifest,
            resume,
            out,
        } => {
            let cfg = common.resolve()?;
            init_threads(cfg.threads);
            Ok(commands::cmd_train(&cfg, manifest, resume.as_deref(), out)?)
        }
        Cmd::Sample {
            common,
            weights,
            pocket,
            oracle,
            pocket_key,
            out,
        } => {
            let cfg = common.resolve()?;
            init_threads(cfg.threads);
            let backend = match (weights, oracle) {
                (Some(w), None) => SampleBackend::Weights {
                    weights: w.clone(),
                    pocket: pocket.clone().expect("clap enforces --pocket"),
                },
                (None, Some(m)) => SampleBackend::Oracle {
                    manifest: m.clone(),
                    key: pocket_key.clone().expect("clap enforces --pocket-key"),
                },
                _ => {
                    return Err(CliError::Usage(
                        "choose a backend: --weights + --pocket, or --oracle + --pocket-key"
                            .into(),
                    ))
                }
            };
            Ok(commands::cmd_sample(&cfg, &backend, out)?)
        }
        Cmd::Evaluate {
            common,
            generated,
            reference,
            pocket,
            out,
        } => {
            let cfg = common.resolve()?;
            init_threads(cfg.threads);
            Ok(commands::cmd_evaluate(
                &cfg,
                generated,
                reference,
                pocket.as_deref(),
                out,
            )?)
        }
        Cmd::Roundtrip { common, input, out } => {
            let cfg = common.resolve()?;
            init_threads(cfg.threads);
            Ok(commands::cmd_roundtrip(&cfg, input, out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with status 2 on usage errors
    match run(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Vox(e)) => {
            let (class, code) = match &e {
                VoxwalkError::NonFinite { .. } | VoxwalkError::Diverged(_) => ("numeric", 4u8),
                _ => ("input", 3u8),
            };
            eprintln!("error[{class}]: {e}");
            ExitCode::from(code)
        }
    }
}
