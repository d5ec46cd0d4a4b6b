//! AdamW training loop with decoupled weight decay and an EMA shadow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{loss_and_grad, DenoiserParams};
use crate::error::{Result, VoxwalkError};
use crate::grid::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub ema_decay: f64,
    pub steps: u64,
    pub seed: u64,
}

impl TrainConfig {
    /// Hyperparameters of the production run.
    pub fn paper() -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-5,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            ema_decay: 0.999,
            steps: 10_000,
            seed: 0,
        }
    }

    /// Small-scale preset for local experiments and tests.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            ema_decay: 0.999,
            steps: 500,
            seed: 0,
        }
    }
}

/// One row of the training metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: u64,
    pub step: u64,
    pub loss: f64,
}

struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

const ADAM_EPS: f64 = 1e-8;

/// Train `params` in place on (ligand, pocket) grid pairs. Single-threaded
/// over steps; returns the per-step loss log.
pub fn train(
    params: &mut DenoiserParams,
    dataset: &[(VoxelGrid, VoxelGrid)],
    tc: &TrainConfig,
) -> Result<Vec<TrainRecord>> {
    if dataset.is_empty() {
        return Err(VoxwalkError::Invalid("empty training dataset".into()));
    }
    if tc.batch_size == 0 {
        return Err(VoxwalkError::Invalid("batch size must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut state = AdamState {
        m_w: params.convs.iter().map(|c| vec![0.0; c.w.len()]).collect(),
        v_w: params.convs.iter().map(|c| vec![0.0; c.w.len()]).collect(),
        m_b: params.convs.iter().map(|c| vec![0.0; c.b.len()]).collect(),
        v_b: params.convs.iter().map(|c| vec![0.0; c.b.len()]).collect(),
    };
    let mut log = Vec::with_capacity(tc.steps as usize);
    let mut seen = 0u64;
    for step in 1..=tc.steps {
        let batch: Vec<(&VoxelGrid, &VoxelGrid)> = (0..tc.batch_size)
            .map(|_| {
                let i = rng.gen_range(0..dataset.len());
                (&dataset[i].0, &dataset[i].1)
            })
            .collect();
        let (loss, grads) = loss_and_grad(params, &batch, &mut rng).map_err(|e| match e {
            VoxwalkError::NonFinite { .. } => VoxwalkError::Diverged(step),
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(VoxwalkError::Diverged(step));
        }

        let t = step as i32;
        let bc1 = 1.0 - tc.beta1.powi(t);
        let bc2 = 1.0 - tc.beta2.powi(t);
        for (li, conv) in params.convs.iter_mut().enumerate() {
            adamw_update(
                &mut conv.w,
                &grads[li].w,
                &mut state.m_w[li],
                &mut state.v_w[li],
                tc,
                bc1,
                bc2,
                tc.weight_decay,
            );
            // biases are not decayed
            adamw_update(
                &mut conv.b,
                &grads[li].b,
                &mut state.m_b[li],
                &mut state.v_b[li],
                tc,
                bc1,
                bc2,
                0.0,
            );
        }
        params.update_ema(tc.ema_decay);

        seen += tc.batch_size as u64;
        log.push(TrainRecord {
            epoch: seen / dataset.len() as u64,
            step,
            loss,
        });
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn adamw_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    tc: &TrainConfig,
    bc1: f64,
    bc2: f64,
    wd: f64,
) {
    for i in 0..p.len() {
        m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
        v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= tc.learning_rate * (m_hat / (v_hat.sqrt() + ADAM_EPS) + wd * p[i]);
    }
}
