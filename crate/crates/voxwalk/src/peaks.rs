//! Atom recovery from ligand occupancy grids: per-channel local maxima with
//! sub-voxel centroid refinement and proximity merging.

use crate::elements::Element;
use crate::error::Result;
use crate::grid::VoxelGrid;
use crate::structio::{Atom, Structure, StructureKind};
use crate::voxelizer::{voxelize, RadiusTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// Minimum occupancy for a voxel to be considered.
    pub threshold: f32,
    /// Refine peak positions with a 3x3x3 occupancy-weighted centroid.
    pub refine: bool,
    /// Peaks of one channel closer than this (Å) merge, keeping the higher.
    pub min_separation: f64,
}

impl Default for PeakConfig {
    fn default() -> PeakConfig {
        PeakConfig {
            threshold: 0.1,
            refine: true,
            min_separation: 0.9,
        }
    }
}

struct Peak {
    flat: usize,
    value: f32,
    position: [f64; 3],
}

/// A voxel is a peak if it beats all 26 in-bounds neighbors; on an exact tie
/// the lower flat index wins, so a flat plateau yields exactly one peak.
fn is_peak(grid: &VoxelGrid, c: usize, i: usize, j: usize, k: usize) -> bool {
    let l = grid.spec.length as isize;
    let v = grid.get(c, i, j, k);
    let flat = grid.spec.flat_index(c, i, j, k);
    for di in -1..=1isize {
        for dj in -1..=1isize {
            for dk in -1..=1isize {
                if (di, dj, dk) == (0, 0, 0) {
                    continue;
                }
                let (ni, nj, nk) = (i as isize + di, j as isize + dj, k as isize + dk);
                if ni < 0 || nj < 0 || nk < 0 || ni >= l || nj >= l || nk >= l {
                    continue;
                }
                let (ni, nj, nk) = (ni as usize, nj as usize, nk as usize);
                let nv = grid.get(c, ni, nj, nk);
                let nflat = grid.spec.flat_index(c, ni, nj, nk);
                if nv > v || (nv == v && nflat < flat) {
                    return false;
                }
            }
        }
    }
    true
}

/// Sub-voxel refinement by per-axis log-parabola interpolation. A single
/// atom's occupancy is a Gaussian in the distance, so its log is exactly
/// quadratic and the interpolated apex lands on the atom. Degenerate axes
/// (boundary, non-positive values, flat curvature) keep the voxel center.
fn refine_position(grid: &VoxelGrid, c: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
    let l = grid.spec.length;
    let mut pos = grid.spec.voxel_center(i, j, k);
    let v0 = grid.get(c, i, j, k);
    if v0 <= 0.0 {
        return pos;
    }
    let l0 = (v0 as f64).ln();
    let idx = [i, j, k];
    for axis in 0..3 {
        if idx[axis] == 0 || idx[axis] + 1 >= l {
            continue;
        }
        let mut lo = idx;
        let mut hi = idx;
        lo[axis] -= 1;
        hi[axis] += 1;
        let vm = grid.get(c, lo[0], lo[1], lo[2]);
        let vp = grid.get(c, hi[0], hi[1], hi[2]);
        if vm <= 0.0 || vp <= 0.0 {
            continue;
        }
        let (lm, lp) = ((vm as f64).ln(), (vp as f64).ln());
        let denom = lm - 2.0 * l0 + lp;
        if denom >= 0.0 {
            continue;
        }
        let offset = (0.5 * (lm - lp) / denom).clamp(-0.5, 0.5);
        pos[axis] += offset * grid.spec.resolution as f64;
    }
    pos
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Recover atoms from a ligand grid. Channels map to elements in the fixed
/// ligand channel order; output is sorted by (channel, flat index).
pub fn detect_atoms(grid: &VoxelGrid, cfg: &PeakConfig) -> Result<Vec<Atom>> {
    let l = grid.spec.length;
    let mut atoms = Vec::new();
    for c in 0..grid.spec.channels {
        let element = Element::from_ligand_channel(c)?;
        let mut peaks = Vec::new();
        for i in 0..l {
            for j in 0..l {
                for k in 0..l {
                    let v = grid.get(c, i, j, k);
                    if v < cfg.threshold || !is_peak(grid, c, i, j, k) {
                        continue;
                    }
                    let position = if cfg.refine {
                        refine_position(grid, c, i, j, k)
                    } else {
                        grid.spec.voxel_center(i, j, k)
                    };
                    peaks.push(Peak {
                        flat: grid.spec.flat_index(c, i, j, k),
                        value: v,
                        position,
                    });
                }
            }
        }
        // merge: strongest first, ties to the lower flat index
        peaks.sort_by(|a, b| {
            b.value
                .partial_cmp(&a.value)
                .unwrap()
                .then(a.flat.cmp(&b.flat))
        });
        let mut kept: Vec<Peak> = Vec::new();
        for p in peaks {
            if kept
                .iter()
                .all(|q| dist(&p.position, &q.position) >= cfg.min_separation)
            {
                kept.push(p);
            }
        }
        kept.sort_by_key(|p| p.flat);
        atoms.extend(kept.into_iter().map(|p| Atom::new(element, p.position)));
    }
    Ok(atoms)
}

/// How well voxelize → detect recovers a known structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripReport {
    pub matched: usize,
    /// Detected atoms with no true atom of the same element within 0.5 Å.
    pub spurious: usize,
    /// True atoms never matched.
    pub missed: usize,
    /// RMS position error over matched pairs, Å.
    pub rmsd: f64,
    /// Largest matched-pair distance, Å.
    pub max_dist: f64,
}

const MATCH_RADIUS: f64 = 0.5;

/// Voxelize `structure`, run peak detection, and greedily match detected to
/// true atoms of the same element, closest pairs first, within 0.5 Å.
pub fn roundtrip_report(
    structure: &Structure,
    grid: &VoxelGrid,
    cfg: &PeakConfig,
) -> Result<RoundtripReport> {
    let detected = detect_atoms(grid, cfg)?;
    let mut pairs = Vec::new();
    for (di, d) in detected.iter().enumerate() {
        for (ti, t) in structure.atoms.iter().enumerate() {
            if d.element == t.element {
                let dd = dist(&d.position, &t.position);
                if dd <= MATCH_RADIUS {
                    pairs.push((dd, di, ti));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut det_used = vec![false; detected.len()];
    let mut true_used = vec![false; structure.atoms.len()];
    let mut sq = 0.0f64;
    let mut max_dist = 0.0f64;
    let mut matched = 0usize;
    for (d, di, ti) in pairs {
        if det_used[di] || true_used[ti] {
            continue;
        }
        det_used[di] = true;
        true_used[ti] = true;
        matched += 1;
        sq += d * d;
        max_dist = max_dist.max(d);
    }
    Ok(RoundtripReport {
        matched,
        spurious: det_used.iter().filter(|&&u| !u).count(),
        missed: true_used.iter().filter(|&&u| !u).count(),
        rmsd: if matched > 0 {
            (sq / matched as f64).sqrt()
        } else {
            0.0
        },
        max_dist,
    })
}

/// Convenience: voxelize a ligand and report atom recovery in one call.
pub fn voxelize_roundtrip(
    structure: &Structure,
    spec: &crate::grid::GridSpec,
    radii: &RadiusTable,
    cfg: &PeakConfig,
) -> Result<RoundtripReport> {
    debug_assert_eq!(structure.kind, StructureKind::Ligand);
    let (grid, _) = voxelize(structure, spec, radii)?;
    roundtrip_report(structure, &grid, cfg)
}
