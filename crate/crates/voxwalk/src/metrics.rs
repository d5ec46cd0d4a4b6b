//! Geometric evaluation of generated structures: bond-length distributions
//! and their Jensen-Shannon divergence, steric clash counts against pockets,
//! atom-count and ring statistics.
//!
//! Bond perception is a geometric heuristic (covalent radii plus fixed
//! slack), and the aromaticity signal is a planarity proxy; both are labelled
//! as such in reports.

use std::collections::BTreeMap;

use crate::elements::Element;
use crate::error::{Result, VoxwalkError};
use crate::structio::Structure;

/// Slack added to the covalent radius sum when inferring bonds, Å.
pub const BOND_SLACK: f64 = 0.4;

/// Default clash tolerance, Å: a pair clashes when it sits this far inside
/// the van der Waals radius sum.
pub const CLASH_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    /// Bond inside a flat 5- or 6-ring (geometric aromaticity proxy).
    AromaticFlagged,
    Unknown,
}

/// Inferred bond; invariant i < j.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Geometric bond perception: atoms are bonded iff their distance is at most
/// the sum of covalent radii plus 0.4 Å. Orders are left `Unknown`.
pub fn infer_bonds(structure: &Structure) -> Vec<Bond> {
    let atoms = &structure.atoms;
    let mut bonds = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let cutoff = atoms[i].element.covalent_radius()
                + atoms[j].element.covalent_radius()
                + BOND_SLACK;
            if dist(&atoms[i].position, &atoms[j].position) <= cutoff {
                bonds.push(Bond {
                    i,
                    j,
                    order: BondOrder::Unknown,
                });
            }
        }
    }
    bonds
}

/// Fixed-width histogram with explicit bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, width: f64) -> Result<Histogram> {
        if !(hi > lo) || !(width > 0.0) {
            return Err(VoxwalkError::Invalid(format!(
                "bad histogram spec [{lo}, {hi}] / {width}"
            )));
        }
        let bins = ((hi - lo) / width).round() as usize;
        let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
        Ok(Histogram {
            edges,
            counts: vec![0; bins],
        })
    }

    /// Default bond-length bins: [0.8, 2.0] Å at 0.01 Å.
    pub fn bond_length_bins() -> Histogram {
        Histogram::uniform(0.8, 2.0, 0.01).expect("static bin spec")
    }

    /// Count a value; returns false (and counts nothing) when out of range.
    pub fn add(&mut self, v: f64) -> bool {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if !(v >= lo && v < hi) {
            return false;
        }
        // bins may be uneven in principle; binary search on the edges
        let bin = match self.edges.binary_search_by(|e| e.partial_cmp(&v).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let bin = bin.min(self.counts.len() - 1);
        self.counts[bin] += 1;
        true
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(VoxwalkError::Invalid("empty histogram".into()));
        }
        Ok(self
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect())
    }
}

/// Histogram of inferred bond lengths whose endpoint elements match the
/// unordered `pair`, accumulated over all structures into the default bins.
pub fn bond_length_histogram(structures: &[Structure], pair: (Element, Element)) -> Histogram {
    let mut hist = Histogram::bond_length_bins();
    for s in structures {
        for b in infer_bonds(s) {
            let (ei, ej) = (s.atoms[b.i].element, s.atoms[b.j].element);
            if (ei, ej) == pair || (ej, ei) == pair {
                hist.add(dist(&s.atoms[b.i].position, &s.atoms[b.j].position));
            }
        }
    }
    hist
}

fn jsd_probs(p: &[f64], q: &[f64]) -> f64 {
    let mut kl_p = 0.0f64;
    let mut kl_q = 0.0f64;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / m).log2();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / m).log2();
        }
    }
    0.5 * kl_p + 0.5 * kl_q
}

/// Jensen-Shannon divergence in bits between two histograms with identical
/// edges: ½KL(P‖M) + ½KL(Q‖M) with M = ½(P+Q), log base 2, in [0, 1].
pub fn jsd(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(VoxwalkError::ShapeMismatch(
            "histograms have different bin edges".into(),
        ));
    }
    Ok(jsd_probs(&p.probabilities()?, &q.probabilities()?))
}

/// Count of (ligand atom, pocket atom) pairs with distance strictly below
/// vdW(i) + vdW(j) − tolerance.
pub fn clash_count(ligand: &Structure, pocket: &Structure, tolerance: f64) -> usize {
    let mut n = 0;
    for a in &ligand.atoms {
        for b in &pocket.atoms {
            let cutoff = a.element.vdw_radius() + b.element.vdw_radius() - tolerance;
            if dist(&a.position, &b.position) < cutoff {
                n += 1;
            }
        }
    }
    n
}

/// Rings of one structure as vertex index lists, from a minimum cycle basis
/// of the bond graph (Horton's candidate enumeration + GF(2) elimination).
pub fn rings(structure: &Structure) -> Vec<Vec<usize>> {
    let n = structure.atoms.len();
    let bonds = infer_bonds(structure);
    let m = bonds.len();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let mut adj = vec![Vec::new(); n];
    for (e, b) in bonds.iter().enumerate() {
        adj[b.i].push((b.j, e));
        adj[b.j].push((b.i, e));
    }
    // cycle space dimension = m - n + number of connected components
    let mut comp = vec![usize::MAX; n];
    let mut n_comp = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = n_comp;
        while let Some(v) = stack.pop() {
            for &(w, _) in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = n_comp;
                    stack.push(w);
                }
            }
        }
        n_comp += 1;
    }
    let dim = m + n_comp - n;
    if dim == 0 {
        return Vec::new();
    }

    // Horton candidates: BFS tree from every root; for each non-tree pair of
    // paths root→x, root→y with a bond (x, y), the two paths plus the bond
    // form a candidate cycle when the paths only share the root.
    let words = m.div_ceil(64);
    let mut candidates: Vec<(usize, Vec<u64>, Vec<usize>)> = Vec::new();
    for root in 0..n {
        // BFS parents
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, e));
                    queue.push_back(w);
                }
            }
        }
        let path = |mut v: usize| -> (Vec<usize>, Vec<usize>) {
            let mut verts = vec![v];
            let mut edges = Vec::new();
            while let Some((p, e)) = parent[v] {
                verts.push(p);
                edges.push(e);
                v = p;
            }
            (verts, edges)
        };
        for b in &bonds {
            if !seen[b.i] || !seen[b.j] {
                continue;
            }
            let (vx, ex) = path(b.i);
            let (vy, ey) = path(b.j);
            // paths must be vertex-disjoint except the shared root
            let mut shared = 0;
            for v in &vx {
                if vy.contains(v) {
                    shared += 1;
                }
            }
            if shared != 1 || *vx.last().unwrap() != root || *vy.last().unwrap() != root {
                continue;
            }
            let mut verts: Vec<usize> = vx.iter().chain(vy.iter()).copied().collect();
            verts.sort_unstable();
            verts.dedup();
            let mut bits = vec![0u64; words];
            let edge_idx = bonds.iter().position(|bb| bb == b).unwrap();
            for &e in ex.iter().chain(ey.iter()).chain(std::iter::once(&edge_idx)) {
                bits[e / 64] ^= 1u64 << (e % 64);
            }
            candidates.push((verts.len(), bits, verts));
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
    candidates.dedup_by(|a, b| a.1 == b.1);

    // greedy GF(2) independence over edge-incidence vectors
    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut out = Vec::new();
    for (_, bits, verts) in candidates {
        let mut reduced = bits.clone();
        for b in &basis {
            let pivot = b.iter().rposition(|&w| w != 0).unwrap();
            let bit = 63 - b[pivot].leading_zeros() as usize;
            if reduced[pivot] >> bit & 1 == 1 {
                for (r, &bw) in reduced.iter_mut().zip(b.iter()) {
                    *r ^= bw;
                }
            }
        }
        if reduced.iter().any(|&w| w != 0) {
            basis.push(reduced);
            out.push(verts);
            if out.len() == dim {
                break;
            }
        }
    }
    out
}

/// RMS distance of points to their best-fit plane: the square root of the
/// smallest eigenvalue of the 3x3 position covariance.
pub fn planarity_rms(points: &[[f64; 3]]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 3 {
        return 0.0;
    }
    let mut mean = [0.0f64; 3];
    for p in points {
        for a in 0..3 {
            mean[a] += p[a] / n;
        }
    }
    let mut c = [[0.0f64; 3]; 3];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for a in 0..3 {
            for b in 0..3 {
                c[a][b] += d[a] * d[b] / n;
            }
        }
    }
    smallest_eigenvalue_sym3(&c).max(0.0).sqrt()
}

/// Smallest eigenvalue of a symmetric 3x3 matrix, closed form via the
/// trigonometric solution of the characteristic cubic.
fn smallest_eigenvalue_sym3(a: &[[f64; 3]; 3]) -> f64 {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        return a[0][0].min(a[1][1]).min(a[2][2]);
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    // eig3 = q + 2p cos(phi + 2π/3) is the smallest root
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
}

/// Planarity RMS below which a 5- or 6-ring counts as flat for the
/// geometric aromaticity proxy, Å.
pub const PLANARITY_RMS_CUTOFF: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub molecules: usize,
    pub atoms_mean: f64,
    pub atoms_median: f64,
    pub rings_per_molecule: f64,
    /// ring size -> number of rings of that size over all structures
    pub ring_size_counts: BTreeMap<usize, u64>,
    /// fraction of atoms sitting in a flat 5- or 6-ring (geometric proxy)
    pub aromatic_atom_fraction: f64,
}

fn per_structure(s: &Structure) -> (usize, Vec<usize>, usize) {
    let rs = rings(s);
    let mut flagged = vec![false; s.atoms.len()];
    for r in &rs {
        if (5..=6).contains(&r.len()) {
            let pts: Vec<[f64; 3]> = r.iter().map(|&v| s.atoms[v].position).collect();
            if planarity_rms(&pts) < PLANARITY_RMS_CUTOFF {
                for &v in r {
                    flagged[v] = true;
                }
            }
        }
    }
    (
        s.atoms.len(),
        rs.iter().map(|r| r.len()).collect(),
        flagged.iter().filter(|&&f| f).count(),
    )
}

pub fn summary_stats(structures: &[Structure]) -> Result<SummaryStats> {
    if structures.is_empty() {
        return Err(VoxwalkError::Invalid("no structures to summarize".into()));
    }
    #[cfg(feature = "parallel")]
    let per: Vec<_> = {
        use rayon::prelude::*;
        structures.par_iter().map(per_structure).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per: Vec<_> = structures.iter().map(per_structure).collect();

    let mut counts: Vec<usize> = per.iter().map(|p| p.0).collect();
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    };
    let mut ring_size_counts = BTreeMap::new();
    let mut n_rings = 0u64;
    let mut flagged_atoms = 0usize;
    let mut total_atoms = 0usize;
    for (atoms, sizes, flagged) in &per {
        total_atoms += atoms;
        flagged_atoms += flagged;
        for &s in sizes {
            n_rings += 1;
            *ring_size_counts.entry(s).or_insert(0u64) += 1;
        }
    }
    Ok(SummaryStats {
        molecules: n,
        atoms_mean: total_atoms as f64 / n as f64,
        atoms_median: median,
        rings_per_molecule: n_rings as f64 / n as f64,
        ring_size_counts,
        aromatic_atom_fraction: flagged_atoms as f64 / total_atoms as f64,
    })
}
