//! The conditional denoiser: ligand and pocket encoders mapped into a shared
//! embedding, summed, and pushed through a small two-level encoder-decoder
//! trunk with an additive skip. The final layer is zero-initialized and has
//! no activation, so an untrained denoiser outputs zero.

use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::{silu, silu_backward, upsample2, upsample2_backward, Conv3, Conv3Grad, Vol};
use crate::error::{Result, VoxwalkError};
use crate::grid::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserConfig {
    pub grid_length: usize,
    pub ligand_channels: usize,
    pub pocket_channels: usize,
    pub embed_channels: usize,
    pub mid_channels: usize,
    pub sigma: f64,
}

impl DenoiserConfig {
    /// Desk-scale preset: 16-voxel grids, 8 embedding channels.
    pub fn desk() -> DenoiserConfig {
        DenoiserConfig {
            grid_length: 16,
            ligand_channels: 7,
            pocket_channels: 4,
            embed_channels: 8,
            mid_channels: 16,
            sigma: 0.9,
        }
    }

    /// Production-scale preset: 64-voxel grids, 16 embedding channels.
    pub fn paper() -> DenoiserConfig {
        DenoiserConfig {
            grid_length: 64,
            ligand_channels: 7,
            pocket_channels: 4,
            embed_channels: 16,
            mid_channels: 32,
            sigma: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_length < 4 || self.grid_length % 2 != 0 {
            return Err(VoxwalkError::Invalid(format!(
                "grid length must be even and >= 4, got {}",
                self.grid_length
            )));
        }
        if self.embed_channels == 0 || self.mid_channels == 0 {
            return Err(VoxwalkError::Invalid("channel widths must be >= 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(VoxwalkError::Invalid("sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Layer order, also the serialization order.
pub const LAYER_NAMES: [&str; 15] = [
    "lig_in", "lig_b1a", "lig_b1b", "lig_b2a", "lig_b2b", "poc_in", "poc_b1a", "poc_b1b",
    "poc_b2a", "poc_b2b", "down", "mid_a", "mid_b", "up", "head",
];

pub(crate) const LIG_IN: usize = 0;
pub(crate) const POC_IN: usize = 5;
pub(crate) const DOWN: usize = 10;
pub(crate) const MID_A: usize = 11;
pub(crate) const MID_B: usize = 12;
pub(crate) const UP: usize = 13;
pub(crate) const HEAD: usize = 14;

/// Denoiser weights plus their EMA shadow.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    pub convs: Vec<Conv3>,
    pub ema: Vec<Conv3>,
}

pub(crate) fn layer_shapes(cfg: &DenoiserConfig) -> Vec<(usize, usize)> {
    let (cx, cp, ce, cm) = (
        cfg.ligand_channels,
        cfg.pocket_channels,
        cfg.embed_channels,
        cfg.mid_channels,
    );
    vec![
        (cx, ce), // lig_in
        (ce, ce),
        (ce, ce),
        (ce, ce),
        (ce, ce),
        (cp, ce), // poc_in
        (ce, ce),
        (ce, ce),
        (ce, ce),
        (ce, ce),
        (ce, cm), // down (stride 2)
        (cm, cm),
        (cm, cm),
        (cm, ce), // up (after upsample)
        (ce, cx), // head (zero-init)
    ]
}

impl DenoiserParams {
    /// Kaiming fan-in initialization; the head stays zero.
    pub fn init<R: Rng>(config: DenoiserConfig, rng: &mut R) -> Result<DenoiserParams> {
        config.validate()?;
        let mut convs = Vec::new();
        for (idx, (cin, cout)) in layer_shapes(&config).into_iter().enumerate() {
            let mut c = Conv3::zeros(cin, cout);
            if idx != HEAD {
                let std = (2.0 / (cin as f64 * 27.0)).sqrt();
                for w in c.w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w = z * std;
                }
            }
            convs.push(c);
        }
        let ema = convs.clone();
        Ok(DenoiserParams { config, convs, ema })
    }

    pub fn grad_zeros(&self) -> Vec<Conv3Grad> {
        self.convs.iter().map(Conv3::grad_zeros).collect()
    }

    /// One EMA update: shadow <- decay * shadow + (1 - decay) * params.
    pub fn update_ema(&mut self, decay: f64) {
        for (s, p) in self.ema.iter_mut().zip(&self.convs) {
            for (sw, pw) in s.w.iter_mut().zip(&p.w) {
                *sw = decay * *sw + (1.0 - decay) * pw;
            }
            for (sb, pb) in s.b.iter_mut().zip(&p.b) {
                *sb = decay * *sb + (1.0 - decay) * pb;
            }
        }
    }
}

struct BlockTrace {
    t1: Vol,
    t2: Vol,
    out: Vol,
}

struct EncTrace {
    pre: Vol,
    h: Vol,
    b1: BlockTrace,
    b2: BlockTrace,
}

pub(crate) struct Trace {
    lig: EncTrace,
    poc: EncTrace,
    embed: Vol,
    down_pre: Vol,
    down_act: Vol,
    mid: BlockTrace,
    up_in: Vol,
    up_pre: Vol,
    skip: Vol,
    pub out: Vol,
}

fn block_forward(a: &Conv3, b: &Conv3, input: &Vol) -> BlockTrace {
    let t1 = a.forward(input, 1);
    let t2 = silu(&t1);
    let mut out = b.forward(&t2, 1);
    out.add_assign(input);
    BlockTrace { t1, t2, out }
}

fn block_backward(
    a: &Conv3,
    b: &Conv3,
    input: &Vol,
    trace: &BlockTrace,
    grad_out: &Vol,
    ga: &mut Conv3Grad,
    gb: &mut Conv3Grad,
) -> Vol {
    let d_t2 = b.backward(&trace.t2, grad_out, 1, gb);
    let d_t1 = silu_backward(&trace.t1, &d_t2);
    let mut d_in = a.backward(input, &d_t1, 1, ga);
    d_in.add_assign(grad_out);
    d_in
}

fn encode(convs: &[Conv3], base: usize, input: &Vol) -> EncTrace {
    let pre = convs[base].forward(input, 1);
    let h = silu(&pre);
    let b1 = block_forward(&convs[base + 1], &convs[base + 2], &h);
    let b2 = block_forward(&convs[base + 3], &convs[base + 4], &b1.out);
    EncTrace { pre, h, b1, b2 }
}

fn encode_backward(
    convs: &[Conv3],
    base: usize,
    input: &Vol,
    trace: &EncTrace,
    grad_out: &Vol,
    grads: &mut [Conv3Grad],
) {
    let d_b1 = {
        let (left, right) = grads.split_at_mut(base + 4);
        block_backward(
            &convs[base + 3],
            &convs[base + 4],
            &trace.b1.out,
            &trace.b2,
            grad_out,
            &mut left[base + 3],
            &mut right[0],
        )
    };
    let d_h = {
        let (left, right) = grads.split_at_mut(base + 2);
        block_backward(
            &convs[base + 1],
            &convs[base + 2],
            &trace.h,
            &trace.b1,
            &d_b1,
            &mut left[base + 1],
            &mut right[0],
        )
    };
    let d_pre = silu_backward(&trace.pre, &d_h);
    convs[base].backward(input, &d_pre, 1, &mut grads[base]);
}

/// Full forward pass; returns all intermediates needed for backprop.
pub(crate) fn forward_trace(convs: &[Conv3], y: &Vol, xi: &Vol) -> Trace {
    let lig = encode(convs, LIG_IN, y);
    let poc = encode(convs, POC_IN, xi);
    let mut embed = lig.b2.out.clone();
    embed.add_assign(&poc.b2.out);
    let down_pre = convs[DOWN].forward(&embed, 2);
    let down_act = silu(&down_pre);
    let mid = block_forward(&convs[MID_A], &convs[MID_B], &down_act);
    let up_in = upsample2(&mid.out);
    let up_pre = convs[UP].forward(&up_in, 1);
    let up_act = silu(&up_pre);
    let mut skip = up_act;
    skip.add_assign(&embed);
    let out = convs[HEAD].forward(&skip, 1);
    Trace {
        lig,
        poc,
        embed,
        down_pre,
        down_act,
        mid,
        up_in,
        up_pre,
        skip,
        out,
    }
}

/// Forward pass given a precomputed pocket embedding (pocket encoder output).
pub(crate) fn forward_with_pocket_embedding(convs: &[Conv3], y: &Vol, e_poc: &Vol) -> Vol {
    let lig = encode(convs, LIG_IN, y);
    let mut embed = lig.b2.out;
    embed.add_assign(e_poc);
    let down_act = silu(&convs[DOWN].forward(&embed, 2));
    let mid = block_forward(&convs[MID_A], &convs[MID_B], &down_act);
    let up_act = silu(&convs[UP].forward(&upsample2(&mid.out), 1));
    let mut skip = up_act;
    skip.add_assign(&embed);
    convs[HEAD].forward(&skip, 1)
}

/// Pocket encoder output on its own, for caching across walk steps.
pub(crate) fn pocket_embedding(convs: &[Conv3], xi: &Vol) -> Vol {
    encode(convs, POC_IN, xi).b2.out
}

/// Backprop `grad_out` through the trace, accumulating parameter gradients.
pub(crate) fn backward_trace(
    convs: &[Conv3],
    y: &Vol,
    xi: &Vol,
    trace: &Trace,
    grad_out: &Vol,
    grads: &mut [Conv3Grad],
) {
    let d_skip = convs[HEAD].backward(&trace.skip, grad_out, 1, &mut grads[HEAD]);
    // skip = up_act + embed
    let d_up_pre = silu_backward(&trace.up_pre, &d_skip);
    let d_up_in = convs[UP].backward(&trace.up_in, &d_up_pre, 1, &mut grads[UP]);
    let d_mid_out = upsample2_backward(&d_up_in);
    let d_down_act = {
        let (left, right) = grads.split_at_mut(MID_B);
        block_backward(
            &convs[MID_A],
            &convs[MID_B],
            &trace.down_act,
            &trace.mid,
            &d_mid_out,
            &mut left[MID_A],
            &mut right[0],
        )
    };
    let d_down_pre = silu_backward(&trace.down_pre, &d_down_act);
    let mut d_embed = convs[DOWN].backward(&trace.embed, &d_down_pre, 2, &mut grads[DOWN]);
    d_embed.add_assign(&d_skip);
    encode_backward(convs, LIG_IN, y, &trace.lig, &d_embed, grads);
    encode_backward(convs, POC_IN, xi, &trace.poc, &d_embed, grads);
}

fn check_shapes(cfg: &DenoiserConfig, y: &VoxelGrid, xi: &VoxelGrid) -> Result<()> {
    if y.spec.length != cfg.grid_length || y.spec.channels != cfg.ligand_channels {
        return Err(VoxwalkError::ShapeMismatch(format!(
            "ligand grid is {}ch/{}^3, denoiser expects {}ch/{}^3",
            y.spec.channels, y.spec.length, cfg.ligand_channels, cfg.grid_length
        )));
    }
    if xi.spec.length != cfg.grid_length || xi.spec.channels != cfg.pocket_channels {
        return Err(VoxwalkError::ShapeMismatch(format!(
            "pocket grid is {}ch/{}^3, denoiser expects {}ch/{}^3",
            xi.spec.channels, xi.spec.length, cfg.pocket_channels, cfg.grid_length
        )));
    }
    Ok(())
}

/// Denoiser forward on f32 grids: x̂ = U(E_lig(y) + E_poc(ξ)).
pub fn forward(params: &DenoiserParams, y: &VoxelGrid, xi: &VoxelGrid) -> Result<VoxelGrid> {
    check_shapes(&params.config, y, xi)?;
    let l = params.config.grid_length;
    let yv = Vol::from_f32(y.spec.channels, l, &y.data);
    let xv = Vol::from_f32(xi.spec.channels, l, &xi.data);
    let trace = forward_trace(&params.convs, &yv, &xv);
    Ok(VoxelGrid {
        spec: y.spec,
        data: trace.out.to_f32(),
    })
}

/// Denoising loss and exact gradients on a batch with externally supplied
/// noise, one noise vector per pair. Deterministic given its inputs.
pub fn loss_and_grad_with_noise(
    params: &DenoiserParams,
    batch: &[(&VoxelGrid, &VoxelGrid)],
    noise: &[Vec<f64>],
) -> Result<(f64, Vec<Conv3Grad>)> {
    if batch.is_empty() {
        return Err(VoxwalkError::Invalid("empty batch".into()));
    }
    if noise.len() != batch.len() {
        return Err(VoxwalkError::ShapeMismatch(
            "one noise vector per batch entry required".into(),
        ));
    }
    let cfg = &params.config;
    let l = cfg.grid_length;
    let sigma = cfg.sigma;
    let n_vox = (cfg.ligand_channels * l * l * l) as f64;
    let mut grads = params.grad_zeros();
    let mut loss = 0.0f64;
    for ((x, xi), eps) in batch.iter().zip(noise) {
        check_shapes(cfg, x, xi)?;
        if eps.len() != x.data.len() {
            return Err(VoxwalkError::ShapeMismatch("noise length mismatch".into()));
        }
        let xv = Vol::from_f32(x.spec.channels, l, &x.data);
        let mut yv = xv.clone();
        for (v, e) in yv.data.iter_mut().zip(eps) {
            *v += sigma * e;
        }
        let pv = Vol::from_f32(xi.spec.channels, l, &xi.data);
        let trace = forward_trace(&params.convs, &yv, &pv);
        let scale = 1.0 / (batch.len() as f64 * n_vox);
        let mut d_out = Vol::zeros(cfg.ligand_channels, l);
        for i in 0..trace.out.data.len() {
            let diff = trace.out.data[i] - xv.data[i];
            loss += diff * diff * scale;
            d_out.data[i] = 2.0 * diff * scale;
        }
        backward_trace(&params.convs, &yv, &pv, &trace, &d_out, &mut grads);
    }
    if !loss.is_finite() {
        return Err(VoxwalkError::NonFinite {
            step: 0,
            what: "denoising loss".into(),
        });
    }
    Ok((loss, grads))
}

/// Denoising loss and gradients with noise drawn from `rng`:
/// y = x + σε, loss = mean over batch and voxels of (x̂(y|ξ) - x)².
pub fn loss_and_grad<R: Rng>(
    params: &DenoiserParams,
    batch: &[(&VoxelGrid, &VoxelGrid)],
    rng: &mut R,
) -> Result<(f64, Vec<Conv3Grad>)> {
    let noise: Vec<Vec<f64>> = batch
        .iter()
        .map(|(x, _)| (0..x.data.len()).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    loss_and_grad_with_noise(params, batch, &noise)
}
