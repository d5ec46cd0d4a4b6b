//! Small conditional 3D convolutional denoiser with exact hand-written
//! gradients, trainable at desk scale, usable as a `ScoreModel` backend.

pub mod io;
pub mod net;
pub mod tensor;
pub mod train;

use std::sync::Mutex;

pub use io::{load_params, load_params_file, peek_meta_file, save_params, save_params_file};
pub use net::{forward, loss_and_grad, DenoiserConfig, DenoiserParams};
pub use train::{train, TrainConfig, TrainRecord};

use crate::error::{Result, VoxwalkError};
use crate::grid::VoxelGrid;
use crate::score::{Pocket, ScoreModel};
use net::{forward_with_pocket_embedding, pocket_embedding};
use tensor::{Conv3, Vol};

/// Which weight set drives inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSet {
    /// EMA shadow (the default for sampling).
    Ema,
    Raw,
}

/// `ScoreModel` backend wrapping the denoiser forward pass. The pocket
/// encoder output is cached across calls with the same pocket grid, which
/// the walk loop hits on every step.
pub struct DenoiserModel {
    config: DenoiserConfig,
    convs: Vec<Conv3>,
    pocket_cache: Mutex<Option<(u64, Vol)>>,
}

impl DenoiserModel {
    pub fn new(params: &DenoiserParams, weights: WeightSet) -> DenoiserModel {
        let convs = match weights {
            WeightSet::Ema => params.ema.clone(),
            WeightSet::Raw => params.convs.clone(),
        };
        DenoiserModel {
            config: params.config,
            convs,
            pocket_cache: Mutex::new(None),
        }
    }

    fn pocket_vol(&self, xi: &VoxelGrid) -> Result<Vol> {
        if xi.spec.length != self.config.grid_length
            || xi.spec.channels != self.config.pocket_channels
        {
            return Err(VoxwalkError::ShapeMismatch(format!(
                "pocket grid is {}ch/{}^3, denoiser expects {}ch/{}^3",
                xi.spec.channels,
                xi.spec.length,
                self.config.pocket_channels,
                self.config.grid_length
            )));
        }
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        use std::hash::{Hash, Hasher};
        for v in &xi.data {
            v.to_bits().hash(&mut hasher);
        }
        let key = hasher.finish();
        let mut cache = self.pocket_cache.lock().expect("pocket cache poisoned");
        if let Some((k, e)) = cache.as_ref() {
            if *k == key {
                return Ok(e.clone());
            }
        }
        let vol = Vol::from_f32(xi.spec.channels, xi.spec.length, &xi.data);
        let e_poc = pocket_embedding(&self.convs, &vol);
        *cache = Some((key, e_poc.clone()));
        Ok(e_poc)
    }
}

impl ScoreModel for DenoiserModel {
    fn sigma(&self) -> f64 {
        self.config.sigma
    }

    fn estimate(&self, y: &VoxelGrid, pocket: &Pocket) -> Result<VoxelGrid> {
        let xi = match pocket {
            Pocket::Grid(g) => g,
            Pocket::Key(_) => {
                return Err(VoxwalkError::Invalid(
                    "denoiser conditions on a pocket grid, not a key".into(),
                ))
            }
        };
        if y.spec.length != self.config.grid_length
            || y.spec.channels != self.config.ligand_channels
        {
            return Err(VoxwalkError::ShapeMismatch(format!(
                "ligand grid is {}ch/{}^3, denoiser expects {}ch/{}^3",
                y.spec.channels,
                y.spec.length,
                self.config.ligand_channels,
                self.config.grid_length
            )));
        }
        let e_poc = self.pocket_vol(xi)?;
        let yv = Vol::from_f32(y.spec.channels, y.spec.length, &y.data);
        let out = forward_with_pocket_embedding(&self.convs, &yv, &e_poc);
        Ok(VoxelGrid {
            spec: y.spec,
            data: out.to_f32(),
        })
    }
}
