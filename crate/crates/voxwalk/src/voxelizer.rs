//! Point clouds to occupancy grids: Gaussian-like per-atom densities combined
//! with the product formula, one channel per element.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::elements::{Element, LIGAND_ELEMENTS, POCKET_ELEMENTS};
use crate::error::{Result, VoxwalkError};
use crate::grid::{GridSpec, VoxelGrid};
use crate::structio::{Structure, StructureKind};

/// Density values below this are treated as zero, turning voxelization into
/// a local stencil around each atom. The induced per-voxel error is below
/// atoms * 1e-7.
pub const DENSITY_CUTOFF: f64 = 1e-7;

/// Atom radii used for voxelization: a single fixed radius for all ligand
/// atoms, Van der Waals radii for pocket atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusTable {
    pub ligand_radius: f64,
    pub pocket_radii: [f64; 4],
}

impl Default for RadiusTable {
    fn default() -> RadiusTable {
        RadiusTable {
            ligand_radius: 0.5,
            pocket_radii: [
                Element::C.vdw_radius(),
                Element::O.vdw_radius(),
                Element::N.vdw_radius(),
                Element::S.vdw_radius(),
            ],
        }
    }
}

impl RadiusTable {
    pub fn radius_for(&self, kind: StructureKind, element: Element) -> f64 {
        match kind {
            StructureKind::Ligand => self.ligand_radius,
            StructureKind::Pocket => self.pocket_radii[element
                .pocket_channel()
                .expect("pocket structure invariant guarantees pocket-set elements")],
        }
    }
}

/// Fraction of volume occupied by an atom of radius `r_a` at distance `d`
/// from its center: exp(-d^2 / (0.93 r_a)^2).
pub fn atomic_density(d: f64, r_a: f64) -> f64 {
    let s = 0.93 * r_a;
    (-(d * d) / (s * s)).exp()
}

/// Distance beyond which `atomic_density` drops below `DENSITY_CUTOFF`.
fn support_radius(r_a: f64) -> f64 {
    0.93 * r_a * (-DENSITY_CUTOFF.ln()).sqrt()
}

fn expected_channels(kind: StructureKind) -> usize {
    match kind {
        StructureKind::Ligand => LIGAND_ELEMENTS.len(),
        StructureKind::Pocket => POCKET_ELEMENTS.len(),
    }
}

fn channel_of(kind: StructureKind, e: Element) -> usize {
    match kind {
        StructureKind::Ligand => e.ligand_channel(),
        StructureKind::Pocket => e.pocket_channel().expect("pocket-set element"),
    }
}

struct Stencil {
    channel: usize,
    position: [f64; 3],
    inv_s2: f64,
    // inclusive voxel index ranges per axis
    lo: [usize; 3],
    hi: [usize; 3],
}

/// Voxelize a structure onto `spec`. Returns the grid and the number of
/// atoms whose centers fall outside the physical extent (they still
/// contribute their in-grid density tails).
pub fn voxelize(
    structure: &Structure,
    spec: &GridSpec,
    radii: &RadiusTable,
) -> Result<(VoxelGrid, usize)> {
    if spec.channels != expected_channels(structure.kind) {
        return Err(VoxwalkError::ShapeMismatch(format!(
            "grid has {} channels but {:?} structures need {}",
            spec.channels,
            structure.kind,
            expected_channels(structure.kind)
        )));
    }
    let l = spec.length;
    let res = spec.resolution as f64;
    let half = res / 2.0;
    let lo_bound = [
        spec.origin[0] as f64 - half,
        spec.origin[1] as f64 - half,
        spec.origin[2] as f64 - half,
    ];
    let extent = res * l as f64;

    let mut out_of_grid = 0usize;
    let mut stencils: Vec<Stencil> = Vec::with_capacity(structure.len());
    for atom in &structure.atoms {
        let p = atom.position;
        if (0..3).any(|k| p[k] < lo_bound[k] || p[k] > lo_bound[k] + extent) {
            out_of_grid += 1;
        }
        let r_a = radii.radius_for(structure.kind, atom.element);
        let cut = support_radius(r_a);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for k in 0..3 {
            let o = spec.origin[k] as f64;
            let a = ((p[k] - cut - o) / res).ceil().max(0.0);
            let b = ((p[k] + cut - o) / res).floor().min(l as f64 - 1.0);
            if a > b {
                empty = true;
                break;
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        if empty {
            continue;
        }
        let s = 0.93 * r_a;
        stencils.push(Stencil {
            channel: channel_of(structure.kind, atom.element),
            position: p,
            inv_s2: 1.0 / (s * s),
            lo,
            hi,
        });
    }

    // data holds the running product of (1 - V_a); finalized to 1 - product.
    // Atoms combine in structure order within every voxel, so the result does
    // not depend on how slabs are scheduled.
    let mut data = vec![1.0f32; spec.total_voxels()];
    let slab = l * l; // one (channel, i) plane
    let apply = |(idx, plane): (usize, &mut [f32])| {
        let c = idx / l;
        let i = idx % l;
        let ci = spec.voxel_center(i, 0, 0)[0];
        for st in &stencils {
            if st.channel != c || i < st.lo[0] || i > st.hi[0] {
                continue;
            }
            let dx = ci - st.position[0];
            let dx2 = dx * dx;
            for j in st.lo[1]..=st.hi[1] {
                let dy = spec.origin[1] as f64 + res * j as f64 - st.position[1];
                let dxy2 = dx2 + dy * dy;
                let row = j * l;
                for k in st.lo[2]..=st.hi[2] {
                    let dz = spec.origin[2] as f64 + res * k as f64 - st.position[2];
                    let v = (-(dxy2 + dz * dz) * st.inv_s2).exp();
                    if v >= DENSITY_CUTOFF {
                        plane[row + k] *= 1.0 - v as f32;
                    }
                }
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(slab).enumerate().for_each(apply);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(slab).enumerate().for_each(apply);
    }

    for v in &mut data {
        *v = 1.0 - *v;
    }
    Ok((VoxelGrid::from_data(*spec, data)?, out_of_grid))
}

/// Add i.i.d. Gaussian noise of standard deviation `sigma` to every voxel.
pub fn add_noise<R: Rng>(grid: &VoxelGrid, sigma: f64, rng: &mut R) -> VoxelGrid {
    if sigma == 0.0 {
        return grid.clone();
    }
    let data = grid
        .data
        .iter()
        .map(|&v| {
            let eps: f64 = rng.sample(StandardNormal);
            v + (sigma * eps) as f32
        })
        .collect();
    VoxelGrid {
        spec: grid.spec,
        data,
    }
}
