//! Flat key=value run configuration with preset defaults and overrides.
//!
//! Precedence, lowest to highest: preset defaults, config file, command-line
//! `--set key=value` overrides. The fully resolved config is echoed to
//! `{out}/config.resolved` before any work starts, and re-running from that
//! file reproduces the run.

use std::fmt::Write as _;
use std::path::Path;

use voxwalk::denoiser::{DenoiserConfig, TrainConfig};
use voxwalk::peaks::PeakConfig;
use voxwalk::sampler::SamplerConfig;
use voxwalk::{GridSpec, Result, VoxwalkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(VoxwalkError::Invalid(format!(
                "unknown preset '{other}' (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub threads: usize,

    pub grid_length: usize,
    pub resolution: f32,
    pub ligand_channels: usize,
    pub pocket_channels: usize,

    pub sigma: f64,
    pub embed_channels: usize,
    pub mid_channels: usize,

    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    pub train_steps: u64,

    pub delta: f64,
    pub friction: f64,
    pub warmup: u64,
    pub jump_every: u64,
    pub sample_steps: u64,
    pub chains: usize,

    pub peak_threshold: f32,
    pub min_separation: f64,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> RunConfig {
        let (denoiser, train) = match preset {
            Preset::Desk => (DenoiserConfig::desk(), TrainConfig::desk()),
            Preset::Paper => (DenoiserConfig::paper(), TrainConfig::paper()),
        };
        let sampler = SamplerConfig::benchmark(denoiser.sigma);
        let peaks = PeakConfig::default();
        RunConfig {
            preset,
            seed: 0,
            threads: 0,
            grid_length: denoiser.grid_length,
            resolution: 0.25,
            ligand_channels: denoiser.ligand_channels,
            pocket_channels: denoiser.pocket_channels,
            sigma: denoiser.sigma,
            embed_channels: denoiser.embed_channels,
            mid_channels: denoiser.mid_channels,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            ema_decay: train.ema_decay,
            train_steps: train.steps,
            delta: sampler.delta,
            friction: sampler.friction,
            warmup: sampler.warmup,
            jump_every: sampler.jump_every,
            sample_steps: sampler.total_steps,
            chains: sampler.chains,
            peak_threshold: peaks.threshold,
            min_separation: peaks.min_separation,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| {
                VoxwalkError::Invalid(format!("bad value '{v}' for config key '{key}'"))
            })
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "grid_length" => self.grid_length = num(key, value)?,
            "resolution" => self.resolution = num(key, value)?,
            "ligand_channels" => self.ligand_channels = num(key, value)?,
            "pocket_channels" => self.pocket_channels = num(key, value)?,
            "sigma" => {
                self.sigma = num(key, value)?;
                // dependent sampler defaults track sigma unless set explicitly
                self.delta = self.sigma / 2.0;
                self.friction = 1.0 / self.delta;
            }
            "embed_channels" => self.embed_channels = num(key, value)?,
            "mid_channels" => self.mid_channels = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "ema_decay" => self.ema_decay = num(key, value)?,
            "train_steps" => self.train_steps = num(key, value)?,
            "delta" => {
                self.delta = num(key, value)?;
                self.friction = 1.0 / self.delta;
            }
            "friction" => self.friction = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "jump_every" => self.jump_every = num(key, value)?,
            "sample_steps" => self.sample_steps = num(key, value)?,
            "chains" => self.chains = num(key, value)?,
            "peak_threshold" => self.peak_threshold = num(key, value)?,
            "min_separation" => self.min_separation = num(key, value)?,
            "preset" => self.preset = Preset::parse(value)?,
            other => {
                return Err(VoxwalkError::Invalid(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Parse a flat key=value file ('#' comments, blank lines allowed).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| VoxwalkError::Parse {
                line: lineno + 1,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The resolved config as the same key=value format that `apply_file`
    /// reads back.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let p = match self.preset {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        };
        let _ = writeln!(s, "preset = {p}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "grid_length = {}", self.grid_length);
        let _ = writeln!(s, "resolution = {}", self.resolution);
        let _ = writeln!(s, "ligand_channels = {}", self.ligand_channels);
        let _ = writeln!(s, "pocket_channels = {}", self.pocket_channels);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "embed_channels = {}", self.embed_channels);
        let _ = writeln!(s, "mid_channels = {}", self.mid_channels);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "ema_decay = {}", self.ema_decay);
        let _ = writeln!(s, "train_steps = {}", self.train_steps);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "friction = {}", self.friction);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(s, "jump_every = {}", self.jump_every);
        let _ = writeln!(s, "sample_steps = {}", self.sample_steps);
        let _ = writeln!(s, "chains = {}", self.chains);
        let _ = writeln!(s, "peak_threshold = {}", self.peak_threshold);
        let _ = writeln!(s, "min_separation = {}", self.min_separation);
        s
    }

    pub fn ligand_spec(&self) -> Result<GridSpec> {
        GridSpec::centered(self.grid_length, self.resolution, self.ligand_channels)
    }

    pub fn pocket_spec(&self) -> Result<GridSpec> {
        GridSpec::centered(self.grid_length, self.resolution, self.pocket_channels)
    }

    pub fn denoiser_config(&self) -> DenoiserConfig {
        DenoiserConfig {
            grid_length: self.grid_length,
            ligand_channels: self.ligand_channels,
            pocket_channels: self.pocket_channels,
            embed_channels: self.embed_channels,
            mid_channels: self.mid_channels,
            sigma: self.sigma,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            ema_decay: self.ema_decay,
            steps: self.train_steps,
            seed: self.seed,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            sigma: self.sigma,
            delta: self.delta,
            friction: self.friction,
            warmup: self.warmup,
            jump_every: self.jump_every,
            total_steps: self.sample_steps,
            chains: self.chains,
            seed: self.seed,
        }
    }

    pub fn peak_config(&self) -> PeakConfig {
        PeakConfig {
            threshold: self.peak_threshold,
            refine: true,
            min_separation: self.min_separation,
        }
    }
}
