//! Conditional walk-jump sampling: underdamped Langevin MCMC over noisy
//! grids (walk) with decoupled single-step clean estimation (jump).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, VoxwalkError};
use crate::grid::{GridSpec, VoxelGrid};
use crate::score::{Pocket, ScoreModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub sigma: f64,
    /// Step size δ; default σ/2.
    pub delta: f64,
    /// Friction γ; default 1/δ so the effective friction γδ is 1.
    pub friction: f64,
    /// Warm-up walk steps before any jump.
    pub warmup: u64,
    /// Walk steps between jumps. 0 means a single jump at the last step.
    pub jump_every: u64,
    /// Total walk steps per chain.
    pub total_steps: u64,
    pub chains: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(sigma: f64) -> SamplerConfig {
        let delta = sigma / 2.0;
        SamplerConfig {
            sigma,
            delta,
            friction: 1.0 / delta,
            warmup: 400,
            jump_every: 100,
            total_steps: 500,
            chains: 1,
            seed: 0,
        }
    }

    /// Benchmark recipe: 400 warm-up steps, jump every 100, 500 total.
    pub fn benchmark(sigma: f64) -> SamplerConfig {
        SamplerConfig::new(sigma)
    }

    /// Recipe for chains seeded from an existing ligand: 50 warm-up + 50 walk.
    pub fn ligand_seeded(sigma: f64) -> SamplerConfig {
        SamplerConfig {
            warmup: 50,
            jump_every: 50,
            total_steps: 100,
            ..SamplerConfig::new(sigma)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.delta > 0.0) || !(self.friction > 0.0) {
            return Err(VoxwalkError::Invalid(
                "sigma, delta and friction must be > 0".into(),
            ));
        }
        if self.chains == 0 {
            return Err(VoxwalkError::Invalid("need at least one chain".into()));
        }
        Ok(())
    }
}

/// One underdamped Langevin chain: position y, velocity v, its own RNG stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub y: VoxelGrid,
    pub v: VoxelGrid,
    pub step: u64,
    rng: ChaCha8Rng,
}

/// Independent, reproducible RNG stream for a chain of a run.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Initialize a chain from noise: y0 = N(0, σ²I) + U(0, 1) per voxel, v0 = 0.
pub fn init_chain(spec: &GridSpec, sigma: f64, mut rng: ChaCha8Rng) -> Result<ChainState> {
    if !(sigma > 0.0) {
        return Err(VoxwalkError::Invalid("sigma must be > 0".into()));
    }
    let data = (0..spec.total_voxels())
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            (sigma * g + rng.gen::<f64>()) as f32
        })
        .collect();
    Ok(ChainState {
        y: VoxelGrid { spec: *spec, data },
        v: VoxelGrid::zeros(*spec),
        step: 0,
        rng,
    })
}

/// Initialize a chain from a smooth version of an existing ligand:
/// y0 = x_seed + σε, v0 = 0.
pub fn seed_chain_from_ligand(
    x_seed: &VoxelGrid,
    sigma: f64,
    mut rng: ChaCha8Rng,
) -> ChainState {
    let data = x_seed
        .data
        .iter()
        .map(|&x| {
            let g: f64 = rng.sample(StandardNormal);
            x + (sigma * g) as f32
        })
        .collect();
    ChainState {
        y: VoxelGrid {
            spec: x_seed.spec,
            data,
        },
        v: VoxelGrid::zeros(x_seed.spec),
        step: 0,
        rng,
    }
}

impl ChainState {
    /// Duplicate a warmed chain onto a fresh RNG stream. Copied chains must
    /// not share noise, so the stream is re-split rather than cloned.
    pub fn fork(&self, seed: u64, new_stream: u64) -> ChainState {
        ChainState {
            y: self.y.clone(),
            v: self.v.clone(),
            step: self.step,
            rng: chain_rng(seed, new_stream),
        }
    }
}

fn step_impl(
    state: &mut ChainState,
    model: &dyn ScoreModel,
    pocket: &Pocket,
    delta: f64,
    friction: f64,
    zero_noise: bool,
) -> Result<()> {
    let half = (delta / 2.0) as f32;
    let c1 = (-friction * delta).exp() as f32;
    let c2 = (1.0 - (-2.0 * friction * delta).exp()).sqrt() as f32;

    for (y, v) in state.y.data.iter_mut().zip(&state.v.data) {
        *y += half * v;
    }
    let g = model.score(&state.y, pocket)?;
    for (v, gi) in state.v.data.iter_mut().zip(&g.data) {
        *v += half * gi;
    }
    for (v, gi) in state.v.data.iter_mut().zip(&g.data) {
        let eps: f32 = if zero_noise {
            0.0
        } else {
            let e: f64 = state.rng.sample(StandardNormal);
            e as f32
        };
        *v = c1 * *v + half * gi + c2 * eps;
    }
    for (y, v) in state.y.data.iter_mut().zip(&state.v.data) {
        *y += half * v;
    }
    state.step += 1;
    if !state.y.is_finite() || !state.v.is_finite() {
        return Err(VoxwalkError::NonFinite {
            step: state.step,
            what: "chain position or velocity".into(),
        });
    }
    Ok(())
}

/// One BAOAB walk step: half drift, score evaluation, half kick,
/// Ornstein-Uhlenbeck velocity refresh with the second half kick, half drift.
pub fn walk_step(
    state: &mut ChainState,
    model: &dyn ScoreModel,
    pocket: &Pocket,
    delta: f64,
    friction: f64,
) -> Result<()> {
    step_impl(state, model, pocket, delta, friction, false)
}

/// Walk step with the Gaussian noise forced to zero; for deterministic
/// trace tests only.
pub fn walk_step_no_noise(
    state: &mut ChainState,
    model: &dyn ScoreModel,
    pocket: &Pocket,
    delta: f64,
    friction: f64,
) -> Result<()> {
    step_impl(state, model, pocket, delta, friction, true)
}

/// Jump: estimate a clean grid from the current chain position. Decoupled
/// from the walk; the chain state is untouched.
pub fn jump(state: &ChainState, model: &dyn ScoreModel, pocket: &Pocket) -> Result<VoxelGrid> {
    model.estimate(&state.y, pocket)
}

/// One clean-grid emission from a chain.
#[derive(Debug, Clone)]
pub struct JumpSample {
    pub chain: usize,
    pub step: u64,
    pub grid: VoxelGrid,
}

/// A chain aborted on non-finite state; the rest of the run continues.
#[derive(Debug, Clone)]
pub struct ChainAbort {
    pub chain: usize,
    pub step: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub samples: Vec<JumpSample>,
    pub aborts: Vec<ChainAbort>,
}

fn run_one_chain(
    chain: usize,
    model: &dyn ScoreModel,
    pocket: &Pocket,
    spec: &GridSpec,
    cfg: &SamplerConfig,
) -> (Vec<JumpSample>, Option<ChainAbort>) {
    let mut samples = Vec::new();
    let rng = chain_rng(cfg.seed, chain as u64);
    let mut state = match init_chain(spec, cfg.sigma, rng) {
        Ok(s) => s,
        Err(e) => {
            return (
                samples,
                Some(ChainAbort {
                    chain,
                    step: 0,
                    message: e.to_string(),
                }),
            )
        }
    };
    let emit = |samples: &mut Vec<JumpSample>, state: &ChainState| -> Result<()> {
        let grid = jump(state, model, pocket)?;
        samples.push(JumpSample {
            chain,
            step: state.step,
            grid,
        });
        Ok(())
    };
    let should_emit = |step: u64| -> bool {
        if cfg.jump_every == 0 {
            step == cfg.total_steps
        } else {
            step > cfg.warmup && (step - cfg.warmup) % cfg.jump_every == 0
        }
    };
    if cfg.total_steps == 0 {
        if let Err(e) = emit(&mut samples, &state) {
            return (
                samples,
                Some(ChainAbort {
                    chain,
                    step: 0,
                    message: e.to_string(),
                }),
            );
        }
        return (samples, None);
    }
    for _ in 0..cfg.total_steps {
        if let Err(e) = walk_step(&mut state, model, pocket, cfg.delta, cfg.friction) {
            return (
                samples,
                Some(ChainAbort {
                    chain,
                    step: state.step,
                    message: e.to_string(),
                }),
            );
        }
        if should_emit(state.step) {
            if let Err(e) = emit(&mut samples, &state) {
                return (
                    samples,
                    Some(ChainAbort {
                        chain,
                        step: state.step,
                        message: e.to_string(),
                    }),
                );
            }
        }
    }
    (samples, None)
}

/// Run conditional walk-jump sampling: per chain, initialize from noise,
/// warm up, then emit a clean estimate every `jump_every` steps. Chains use
/// independent RNG streams derived from (seed, chain id) and run in parallel;
/// output is ordered by (chain, step) regardless of schedule.
pub fn run_cwjs(
    model: &dyn ScoreModel,
    pocket: &Pocket,
    ligand_spec: &GridSpec,
    cfg: &SamplerConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    let chain_ids: Vec<usize> = (0..cfg.chains).collect();
    let run = |&chain: &usize| run_one_chain(chain, model, pocket, ligand_spec, cfg);

    #[cfg(feature = "parallel")]
    let per_chain: Vec<_> = {
        use rayon::prelude::*;
        chain_ids.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_chain: Vec<_> = chain_ids.iter().map(run).collect();

    let mut out = RunOutput::default();
    for (samples, abort) in per_chain {
        out.samples.extend(samples);
        out.aborts.extend(abort);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::MixtureOracle;

    fn spec() -> GridSpec {
        GridSpec::centered(8, 0.25, 2).unwrap()
    }

    /// Model with a constant score field; estimate returns y unchanged.
    struct ConstScore {
        g: f32,
        sigma: f64,
    }

    impl ScoreModel for ConstScore {
        fn sigma(&self) -> f64 {
            self.sigma
        }
        fn estimate(&self, y: &VoxelGrid, _: &Pocket) -> Result<VoxelGrid> {
            // estimate chosen so the derived score is the constant g
            let s2 = (self.sigma * self.sigma) as f32;
            Ok(VoxelGrid {
                spec: y.spec,
                data: y.data.iter().map(|&v| v + self.g * s2).collect(),
            })
        }
    }

    #[test]
    fn init_chain_moments_and_zero_velocity() {
        let spec = GridSpec::centered(16, 0.25, 7).unwrap();
        let state = init_chain(&spec, 1.0, chain_rng(5, 0)).unwrap();
        assert!(state.v.data.iter().all(|&v| v == 0.0));
        assert_eq!(state.step, 0);
        let n = state.y.data.len() as f64;
        let mean: f64 = state.y.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn init_chain_is_seed_reproducible() {
        let s = spec();
        let a = init_chain(&s, 0.9, chain_rng(7, 3)).unwrap();
        let b = init_chain(&s, 0.9, chain_rng(7, 3)).unwrap();
        let c = init_chain(&s, 0.9, chain_rng(7, 4)).unwrap();
        assert_eq!(a.y, b.y);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn hand_traced_single_step_with_constant_score() {
        let s = spec();
        let (delta, friction) = (0.45_f64, 2.2_f64);
        let g = 0.37_f32;
        let model = ConstScore { g, sigma: 1.0 };
        let mut state = init_chain(&s, 1.0, chain_rng(1, 0)).unwrap();
        let y0 = state.y.clone();
        walk_step_no_noise(&mut state, &model, &Pocket::key("k"), delta, friction).unwrap();
        let decay = (-friction * delta).exp();
        let v_expect = ((delta / 2.0) * (1.0 + decay)) as f32 * g;
        let dy_expect = ((delta * delta / 4.0) * (1.0 + decay)) as f32 * g;
        for i in 0..state.y.data.len() {
            assert!((state.v.data[i] - v_expect).abs() <= 1e-7);
            assert!((state.y.data[i] - (y0.data[i] + dy_expect)).abs() <= 1e-7);
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_score_zero_noise_leaves_state_unchanged() {
        let s = spec();
        let model = ConstScore { g: 0.0, sigma: 1.0 };
        let mut state = init_chain(&s, 1.0, chain_rng(2, 0)).unwrap();
        let y0 = state.y.clone();
        let v0 = state.v.clone();
        walk_step_no_noise(&mut state, &model, &Pocket::key("k"), 0.5, 2.0).unwrap();
        assert_eq!(state.y, y0);
        assert_eq!(state.v, v0);
        assert_eq!(state.step, 1);
    }

    fn single_component_oracle(sigma: f64) -> (MixtureOracle, VoxelGrid) {
        let s = spec();
        let target = VoxelGrid {
            spec: s,
            data: (0..s.total_voxels())
                .map(|i| 0.3 + 0.4 * ((i % 7) as f32 / 7.0))
                .collect(),
        };
        let oracle = MixtureOracle::new(sigma, vec![("k".into(), target.clone())]).unwrap();
        (oracle, target)
    }

    #[test]
    fn stationary_moments_match_gaussian_target() {
        // Target smoothed density is N(x*, sigma^2); after warm-up the chain's
        // time-averaged moments must match it and v must be unit variance.
        let sigma = 1.0;
        let (oracle, target) = single_component_oracle(sigma);
        let pocket = Pocket::key("k");
        let (delta, friction) = (0.5, 2.0);
        let mut state = init_chain(oracle.spec(), sigma, chain_rng(11, 0)).unwrap();
        for _ in 0..500 {
            walk_step(&mut state, &oracle, &pocket, delta, friction).unwrap();
        }
        let n = state.y.data.len();
        let steps = 5000usize;
        let mut sum = vec![0.0f64; n];
        let mut sum2 = vec![0.0f64; n];
        let mut vsum2 = 0.0f64;
        for _ in 0..steps {
            walk_step(&mut state, &oracle, &pocket, delta, friction).unwrap();
            for i in 0..n {
                let y = state.y.data[i] as f64;
                sum[i] += y;
                sum2[i] += y * y;
                vsum2 += (state.v.data[i] as f64).powi(2);
            }
        }
        let mut mean_err = 0.0f64;
        let mut var_avg = 0.0f64;
        for i in 0..n {
            let m = sum[i] / steps as f64;
            mean_err += (m - target.data[i] as f64).abs();
            var_avg += sum2[i] / steps as f64 - m * m;
        }
        mean_err /= n as f64;
        var_avg /= n as f64;
        let v_var = vsum2 / (steps * n) as f64;
        assert!(mean_err < 0.05 * sigma, "mean err {mean_err}");
        assert!((var_avg - sigma * sigma).abs() < 0.10 * sigma * sigma, "y var {var_avg}");
        assert!((v_var - 1.0).abs() < 0.10, "v var {v_var}");
    }

    #[test]
    fn logp_trend_increases_over_warmup() {
        let sigma = 1.0;
        let (oracle, _) = single_component_oracle(sigma);
        let pocket = Pocket::key("k");
        let mut state = init_chain(oracle.spec(), sigma, chain_rng(13, 0)).unwrap();
        // push the chain far from the target so the warm-up has work to do
        for y in state.y.data.iter_mut() {
            *y += 5.0;
        }
        let mut window_means = Vec::new();
        let mut acc = 0.0f64;
        for step in 1..=60u64 {
            walk_step(&mut state, &oracle, &pocket, 0.5, 2.0).unwrap();
            let y64: Vec<f64> = state.y.data.iter().map(|&v| v as f64).collect();
            acc += oracle.logp_smoothed(&y64, "k").unwrap();
            if step % 10 == 0 {
                window_means.push(acc / 10.0);
                acc = 0.0;
            }
        }
        let (first, last) = (window_means[0], *window_means.last().unwrap());
        assert!(
            last > first + 100.0,
            "log-density did not rise over warm-up: {window_means:?}"
        );
    }

    #[test]
    fn jump_is_decoupled_from_the_walk() {
        let sigma = 0.9;
        let (oracle, target) = single_component_oracle(sigma);
        let pocket = Pocket::key("k");
        let cfg = SamplerConfig::new(sigma);

        // reference trajectory without jumps
        let mut a = init_chain(oracle.spec(), sigma, chain_rng(3, 0)).unwrap();
        for _ in 0..20 {
            walk_step(&mut a, &oracle, &pocket, cfg.delta, cfg.friction).unwrap();
        }
        // same trajectory with jumps interleaved everywhere
        let mut b = init_chain(oracle.spec(), sigma, chain_rng(3, 0)).unwrap();
        for _ in 0..20 {
            let j1 = jump(&b, &oracle, &pocket).unwrap();
            let j2 = jump(&b, &oracle, &pocket).unwrap();
            assert_eq!(j1, j2);
            walk_step(&mut b, &oracle, &pocket, cfg.delta, cfg.friction).unwrap();
        }
        assert_eq!(a.y, b.y);
        assert_eq!(a.v, b.v);

        // single-component oracle: jump returns the component exactly
        let j = jump(&a, &oracle, &pocket).unwrap();
        assert!(j.max_abs_diff(&target) < 1e-6);
    }

    #[test]
    fn jump_does_not_mutate_state() {
        let (oracle, _) = single_component_oracle(1.0);
        let state = init_chain(oracle.spec(), 1.0, chain_rng(4, 0)).unwrap();
        let y0 = state.y.clone();
        let v0 = state.v.clone();
        jump(&state, &oracle, &Pocket::key("k")).unwrap();
        assert_eq!(state.y, y0);
        assert_eq!(state.v, v0);
    }

    #[test]
    fn run_cwjs_benchmark_schedule_emits_one_jump() {
        let (oracle, _) = single_component_oracle(1.0);
        let cfg = SamplerConfig {
            chains: 2,
            seed: 9,
            ..SamplerConfig::benchmark(1.0)
        };
        let out = run_cwjs(&oracle, &Pocket::key("k"), oracle.spec(), &cfg).unwrap();
        assert!(out.aborts.is_empty());
        assert_eq!(out.samples.len(), 2);
        assert!(out.samples.iter().all(|s| s.step == 500));
    }

    #[test]
    fn run_cwjs_terminal_jump_when_total_equals_warmup() {
        let (oracle, _) = single_component_oracle(1.0);
        let cfg = SamplerConfig {
            warmup: 30,
            total_steps: 30,
            jump_every: 0,
            chains: 1,
            seed: 1,
            ..SamplerConfig::new(1.0)
        };
        let out = run_cwjs(&oracle, &Pocket::key("k"), oracle.spec(), &cfg).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].step, 30);
    }

    #[test]
    fn run_cwjs_zero_steps_emits_initialization_jump() {
        let (oracle, _) = single_component_oracle(1.0);
        let cfg = SamplerConfig {
            warmup: 0,
            total_steps: 0,
            jump_every: 0,
            chains: 1,
            seed: 1,
            ..SamplerConfig::new(1.0)
        };
        let out = run_cwjs(&oracle, &Pocket::key("k"), oracle.spec(), &cfg).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].step, 0);
    }

    #[test]
    fn run_cwjs_chains_are_distinct_and_reruns_identical() {
        let s = spec();
        let mut comps = Vec::new();
        for i in 0..3 {
            comps.push((
                "k".to_string(),
                VoxelGrid {
                    spec: s,
                    data: (0..s.total_voxels())
                        .map(|j| ((i * 31 + j) % 11) as f32 / 11.0)
                        .collect(),
                },
            ));
        }
        let oracle = MixtureOracle::new(0.8, comps).unwrap();
        let cfg = SamplerConfig {
            warmup: 10,
            jump_every: 10,
            total_steps: 20,
            chains: 4,
            seed: 7,
            ..SamplerConfig::new(0.8)
        };
        let run = || run_cwjs(&oracle, &Pocket::key("k"), oracle.spec(), &cfg).unwrap();
        let o1 = run();
        let o2 = run();
        assert_eq!(o1.samples.len(), o2.samples.len());
        for (a, b) in o1.samples.iter().zip(&o2.samples) {
            assert_eq!(a.chain, b.chain);
            assert_eq!(a.step, b.step);
            assert_eq!(a.grid, b.grid);
        }
        // chains pairwise distinct
        let finals: Vec<&JumpSample> = o1.samples.iter().filter(|s| s.step == 20).collect();
        assert_eq!(finals.len(), 4);
        for i in 0..finals.len() {
            for j in i + 1..finals.len() {
                assert_ne!(finals[i].grid.data, finals[j].grid.data);
            }
        }
    }

    #[test]
    fn forked_chains_diverge() {
        let (oracle, _) = single_component_oracle(1.0);
        let pocket = Pocket::key("k");
        let mut base = init_chain(oracle.spec(), 1.0, chain_rng(21, 0)).unwrap();
        for _ in 0..10 {
            walk_step(&mut base, &oracle, &pocket, 0.5, 2.0).unwrap();
        }
        let mut f1 = base.fork(21, 100);
        let mut f2 = base.fork(21, 101);
        assert_eq!(f1.y, f2.y);
        walk_step(&mut f1, &oracle, &pocket, 0.5, 2.0).unwrap();
        walk_step(&mut f2, &oracle, &pocket, 0.5, 2.0).unwrap();
        assert_ne!(f1.y, f2.y);
    }

    #[test]
    fn seed_chain_from_ligand_zero_sigma_copies_seed() {
        let s = spec();
        let x = VoxelGrid {
            spec: s,
            data: (0..s.total_voxels()).map(|i| (i % 5) as f32 / 5.0).collect(),
        };
        let state = seed_chain_from_ligand(&x, 0.0, chain_rng(1, 0));
        assert_eq!(state.y, x);
        assert!(state.v.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seed_chain_noise_moments() {
        let s = GridSpec::centered(16, 0.25, 7).unwrap();
        let x = VoxelGrid::zeros(s);
        let sigma = 0.7;
        let state = seed_chain_from_ligand(&x, sigma, chain_rng(2, 0));
        let n = state.y.data.len() as f64;
        let mean: f64 = state.y.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var: f64 = state.y.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02);
        assert!((var.sqrt() - sigma).abs() < 0.02);
        let again = seed_chain_from_ligand(&x, sigma, chain_rng(2, 0));
        assert_eq!(state.y, again.y);
    }

    #[test]
    fn nonfinite_chain_aborts_run_but_not_others() {
        struct ExplodingScore;
        impl ScoreModel for ExplodingScore {
            fn sigma(&self) -> f64 {
                1.0
            }
            fn estimate(&self, y: &VoxelGrid, _: &Pocket) -> Result<VoxelGrid> {
                // chain 0's stream produces a different y0 than others; blow
                // up only for grids whose first voxel is below the median to
                // hit some chains but not all
                let bad = y.data[0] < 0.5;
                Ok(VoxelGrid {
                    spec: y.spec,
                    data: y
                        .data
                        .iter()
                        .map(|&v| if bad { f32::NAN } else { v })
                        .collect(),
                })
            }
        }
        let cfg = SamplerConfig {
            warmup: 1,
            jump_every: 1,
            total_steps: 2,
            chains: 8,
            seed: 3,
            ..SamplerConfig::new(1.0)
        };
        let s = spec();
        let out = run_cwjs(&ExplodingScore, &Pocket::key("k"), &s, &cfg).unwrap();
        assert!(!out.aborts.is_empty());
        assert!(out.aborts.len() < 8, "all chains aborted");
    }
}
