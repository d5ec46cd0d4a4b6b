//! Pocket-conditioned molecule generation on voxel grids.
//!
//! The pipeline: parse ligand/pocket structures, voxelize them into
//! multi-channel occupancy grids, estimate the smoothed conditional score
//! (analytic mixture oracle or trained conditional denoiser), sample noisy
//! grids with underdamped Langevin MCMC and jump to clean estimates, then
//! recover atoms by peak detection and evaluate the results geometrically.

pub mod denoiser;
pub mod elements;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod peaks;
pub mod sampler;
pub mod score;
pub mod structio;
pub mod voxelizer;

pub use elements::Element;
pub use error::{Result, VoxwalkError};
pub use grid::{GridSpec, VoxelGrid};
pub use peaks::{detect_atoms, PeakConfig, RoundtripReport};
pub use sampler::{run_cwjs, SamplerConfig};
pub use score::{MixtureOracle, Pocket, ScoreModel};
pub use structio::{Atom, ComplexPair, Structure, StructureKind};
