//! Conditional score estimation: the `ScoreModel` interface and the exact
//! analytic mixture oracle used for verification and as a sampler backend.

use crate::error::{Result, VoxwalkError};
use crate::grid::{GridSpec, VoxelGrid};

/// What a score model conditions on: a discrete pocket key (mixture oracle)
/// or a voxelized pocket grid (trained denoiser).
#[derive(Debug, Clone)]
pub enum Pocket {
    Key(String),
    Grid(VoxelGrid),
}

impl Pocket {
    pub fn key(k: impl Into<String>) -> Pocket {
        Pocket::Key(k.into())
    }
}

/// Conditional Bayes estimator x̂(y|ξ) with the derived score
/// g = (x̂ - y) / σ². Backends implement `estimate`; `score` is derived, so
/// the identity x̂ = y + σ²g holds by construction.
pub trait ScoreModel: Sync {
    fn sigma(&self) -> f64;

    fn estimate(&self, y: &VoxelGrid, pocket: &Pocket) -> Result<VoxelGrid>;

    fn score(&self, y: &VoxelGrid, pocket: &Pocket) -> Result<VoxelGrid> {
        let xhat = self.estimate(y, pocket)?;
        let inv_s2 = 1.0 / (self.sigma() * self.sigma());
        let data = xhat
            .data
            .iter()
            .zip(&y.data)
            .map(|(&x, &yv)| ((x as f64 - yv as f64) * inv_s2) as f32)
            .collect();
        Ok(VoxelGrid {
            spec: y.spec,
            data,
        })
    }
}

/// Exact conditional estimator for an empirical point-mass mixture p(x|ξ):
/// components are clean ligand grids tagged with a pocket key, and only the
/// components matching the queried key participate.
pub struct MixtureOracle {
    sigma: f64,
    spec: GridSpec,
    components: Vec<(String, Vec<f64>)>,
}

impl MixtureOracle {
    pub fn new(sigma: f64, components: Vec<(String, VoxelGrid)>) -> Result<MixtureOracle> {
        if !(sigma > 0.0) {
            return Err(VoxwalkError::Invalid(format!(
                "oracle sigma must be > 0, got {sigma}"
            )));
        }
        let spec = components
            .first()
            .map(|(_, g)| g.spec)
            .ok_or_else(|| VoxwalkError::Invalid("oracle needs at least one component".into()))?;
        let mut comps = Vec::with_capacity(components.len());
        for (key, g) in components {
            if g.spec != spec {
                return Err(VoxwalkError::ShapeMismatch(
                    "all oracle components must share one grid spec".into(),
                ));
            }
            comps.push((key, g.data.iter().map(|&v| v as f64).collect()));
        }
        Ok(MixtureOracle {
            sigma,
            spec,
            components: comps,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn matching(&self, key: &str) -> Result<Vec<&Vec<f64>>> {
        let m: Vec<&Vec<f64>> = self
            .components
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, x)| x)
            .collect();
        if m.is_empty() {
            return Err(VoxwalkError::NoComponent(key.to_string()));
        }
        Ok(m)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.spec.total_voxels() {
            return Err(VoxwalkError::ShapeMismatch(format!(
                "query has {} voxels, components have {}",
                y.len(),
                self.spec.total_voxels()
            )));
        }
        Ok(())
    }

    /// Posterior weights over matching components, log-sum-exp stabilized.
    fn weights(&self, y: &[f64], comps: &[&Vec<f64>]) -> Vec<f64> {
        let inv_2s2 = 1.0 / (2.0 * self.sigma * self.sigma);
        let logits: Vec<f64> = comps
            .iter()
            .map(|x| {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 * inv_2s2
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    /// Posterior-mean grid in f64: x̂(y|ξ) = Σᵢ wᵢ xᵢ.
    pub fn estimate64(&self, y: &[f64], key: &str) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let comps = self.matching(key)?;
        let w = self.weights(y, &comps);
        let mut out = vec![0.0f64; y.len()];
        for (wi, x) in w.iter().zip(&comps) {
            for (o, v) in out.iter_mut().zip(x.iter()) {
                *o += wi * v;
            }
        }
        Ok(out)
    }

    /// Smoothed conditional score in f64: (x̂ - y) / σ².
    pub fn score64(&self, y: &[f64], key: &str) -> Result<Vec<f64>> {
        let xhat = self.estimate64(y, key)?;
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        Ok(xhat
            .iter()
            .zip(y)
            .map(|(x, yv)| (x - yv) * inv_s2)
            .collect())
    }

    /// Unnormalized log of the smoothed conditional density:
    /// log (1/n) Σᵢ exp(-‖y-xᵢ‖²/(2σ²)), up to the Gaussian normalizer.
    pub fn logp_smoothed(&self, y: &[f64], key: &str) -> Result<f64> {
        self.check_len(y)?;
        let comps = self.matching(key)?;
        let inv_2s2 = 1.0 / (2.0 * self.sigma * self.sigma);
        let logits: Vec<f64> = comps
            .iter()
            .map(|x| {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 * inv_2s2
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|&l| (l - m).exp()).sum();
        Ok(m + sum.ln() - (comps.len() as f64).ln())
    }

    pub fn posterior_weights(&self, y: &[f64], key: &str) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let comps = self.matching(key)?;
        Ok(self.weights(y, &comps))
    }
}

impl ScoreModel for MixtureOracle {
    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn estimate(&self, y: &VoxelGrid, pocket: &Pocket) -> Result<VoxelGrid> {
        let key = match pocket {
            Pocket::Key(k) => k,
            Pocket::Grid(_) => {
                return Err(VoxwalkError::Invalid(
                    "mixture oracle conditions on a pocket key, not a grid".into(),
                ))
            }
        };
        if !y.spec.same_geometry(&self.spec) || y.spec.channels != self.spec.channels {
            return Err(VoxwalkError::ShapeMismatch(
                "query grid does not match oracle component spec".into(),
            ));
        }
        let y64: Vec<f64> = y.data.iter().map(|&v| v as f64).collect();
        let xhat = self.estimate64(&y64, key)?;
        Ok(VoxelGrid {
            spec: y.spec,
            data: xhat.iter().map(|&v| v as f32).collect(),
        })
    }
}
