//! Molecular structure I/O: SDF (V2000), PDB ATOM/HETATM records and XYZ,
//! plus centering and rigid-body augmentation of ligand-pocket pairs.

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;

use crate::elements::Element;
use crate::error::{Result, VoxwalkError};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub position: Vec3,
}

impl Atom {
    pub fn new(element: Element, position: Vec3) -> Atom {
        Atom { element, position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Ligand,
    Pocket,
}

/// An ordered heavy-atom point cloud. Hydrogens are dropped at parse time.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub atoms: Vec<Atom>,
    pub kind: StructureKind,
}

impl Structure {
    pub fn new(atoms: Vec<Atom>, kind: StructureKind) -> Result<Structure> {
        for a in &atoms {
            if !a.position.iter().all(|c| c.is_finite()) {
                return Err(VoxwalkError::Invalid(
                    "atom position has non-finite component".into(),
                ));
            }
            if kind == StructureKind::Pocket && !a.element.in_pocket_set() {
                return Err(VoxwalkError::Invalid(format!(
                    "element {} not in pocket set",
                    a.element.symbol()
                )));
            }
        }
        Ok(Structure { atoms, kind })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Unweighted centroid of the atom positions.
    pub fn centroid(&self) -> Result<Vec3> {
        if self.atoms.is_empty() {
            return Err(VoxwalkError::EmptyStructure);
        }
        let n = self.atoms.len() as f64;
        let mut c = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                c[k] += a.position[k];
            }
        }
        Ok([c[0] / n, c[1] / n, c[2] / n])
    }

    pub fn translated(&self, t: Vec3) -> Structure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                element: a.element,
                position: [
                    a.position[0] + t[0],
                    a.position[1] + t[1],
                    a.position[2] + t[2],
                ],
            })
            .collect();
        Structure {
            atoms,
            kind: self.kind,
        }
    }
}

/// A centered ligand-pocket pair. `center` is the ligand centroid in the
/// original frame, recorded for inverse mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPair {
    pub ligand: Structure,
    pub pocket: Structure,
    pub center: Vec3,
}

/// Counts of atoms skipped during parsing (hydrogens, out-of-set elements).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipReport {
    pub hydrogens: usize,
    pub other: usize,
}

fn parse_err(line: usize, msg: impl Into<String>) -> VoxwalkError {
    VoxwalkError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parse an MDL SDF/MOL V2000 block into a ligand structure.
///
/// The bond block is ignored; bonds are re-derived geometrically later.
/// Hydrogens are dropped. V3000 input is rejected.
pub fn parse_sdf<R: Read>(reader: R) -> Result<Structure> {
    let lines: Vec<String> = BufReader::new(reader)
        .lines()
        .collect::<std::io::Result<_>>()?;
    if lines.len() < 4 {
        return Err(parse_err(lines.len(), "truncated header"));
    }
    let counts = &lines[3];
    if counts.contains("V3000") {
        return Err(parse_err(4, "V3000 blocks are not supported"));
    }
    let natoms: usize = counts
        .get(0..3)
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(4, "malformed counts line"))?;
    if lines.len() < 4 + natoms {
        return Err(parse_err(lines.len(), "truncated atom block"));
    }
    let mut atoms = Vec::with_capacity(natoms);
    for i in 0..natoms {
        let lineno = 5 + i;
        let line = &lines[4 + i];
        let mut it = line.split_whitespace();
        let mut coord = [0.0f64; 3];
        for c in coord.iter_mut() {
            *c = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(lineno, "malformed coordinate field"))?;
        }
        let sym = it
            .next()
            .ok_or_else(|| parse_err(lineno, "missing element symbol"))?;
        if sym == "H" {
            continue;
        }
        match Element::from_symbol(sym) {
            Some(e) => atoms.push(Atom::new(e, coord)),
            None => {
                return Err(VoxwalkError::UnsupportedElement {
                    line: lineno,
                    symbol: sym.to_string(),
                })
            }
        }
    }
    Structure::new(atoms, StructureKind::Ligand)
}

fn pdb_element(line: &str, lineno: usize) -> Result<String> {
    // Element symbol columns 77-78; fall back to the atom name (13-16).
    let explicit = line.get(76..78).map(str::trim).unwrap_or("");
    if !explicit.is_empty() {
        let mut s = explicit.to_string();
        s.make_ascii_uppercase();
        let mut chars = s.chars();
        let head: String = chars.next().into_iter().collect();
        let tail: String = chars.flat_map(|c| c.to_lowercase()).collect();
        return Ok(format!("{head}{tail}"));
    }
    let name = line
        .get(12..16)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| parse_err(lineno, "missing atom name and element"))?;
    // First alphabetic character of the atom name.
    let c = name
        .chars()
        .find(|c| c.is_ascii_alphabetic())
        .ok_or_else(|| parse_err(lineno, "unreadable atom name"))?;
    Ok(c.to_uppercase().to_string())
}

/// Parse PDB ATOM/HETATM records into a pocket structure.
///
/// Keeps heavy atoms in the pocket element set {C, O, N, S}; hydrogens and
/// other elements are dropped and counted. First altloc wins; multi-model
/// files are rejected.
pub fn parse_pdb<R: Read>(reader: R) -> Result<(Structure, SkipReport)> {
    let mut atoms = Vec::new();
    let mut skip = SkipReport::default();
    let mut models = 0usize;
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.starts_with("MODEL") {
            models += 1;
            if models > 1 {
                return Err(parse_err(lineno, "multi-model PDB files are not supported"));
            }
            continue;
        }
        if !(line.starts_with("ATOM") || line.starts_with("HETATM")) {
            continue;
        }
        // First altloc wins.
        let altloc = line.as_bytes().get(16).copied().unwrap_or(b' ');
        if altloc != b' ' && altloc != b'A' {
            continue;
        }
        let mut coord = [0.0f64; 3];
        for (k, range) in [(0, 30..38), (1, 38..46), (2, 46..54)] {
            coord[k] = line
                .get(range)
                .map(str::trim)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(lineno, "malformed coordinate field"))?;
        }
        let sym = pdb_element(&line, lineno)?;
        if sym == "H" || sym == "D" {
            skip.hydrogens += 1;
            continue;
        }
        match Element::from_symbol(&sym) {
            Some(e) if e.in_pocket_set() => atoms.push(Atom::new(e, coord)),
            _ => skip.other += 1,
        }
    }
    if atoms.is_empty() {
        return Err(VoxwalkError::EmptyStructure);
    }
    Ok((Structure::new(atoms, StructureKind::Pocket)?, skip))
}

/// Translate a ligand-pocket pair so the ligand centroid sits at the origin.
pub fn center_pair(ligand: &Structure, pocket: &Structure) -> Result<ComplexPair> {
    let center = ligand.centroid()?;
    let shift = [-center[0], -center[1], -center[2]];
    Ok(ComplexPair {
        ligand: ligand.translated(shift),
        pocket: pocket.translated(shift),
        center,
    })
}

fn rotation_matrix(angles: [f64; 3]) -> [[f64; 3]; 3] {
    // Intrinsic Z-Y-X: R = Rz(a) * Ry(b) * Rx(c).
    let (sa, ca) = angles[0].sin_cos();
    let (sb, cb) = angles[1].sin_cos();
    let (sc, cc) = angles[2].sin_cos();
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

fn apply_rigid(s: &Structure, rot: &[[f64; 3]; 3], t: Vec3) -> Structure {
    let atoms = s
        .atoms
        .iter()
        .map(|a| {
            let p = a.position;
            let mut q = [0.0; 3];
            for i in 0..3 {
                q[i] = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + t[i];
            }
            Atom::new(a.element, q)
        })
        .collect();
    Structure {
        atoms,
        kind: s.kind,
    }
}

/// Apply one random rigid transform to both structures of a centered pair:
/// rotation from three Euler angles uniform on [0, 2π), then translation
/// uniform on [-1, 1]³ Å.
pub fn augment<R: Rng>(pair: &ComplexPair, rng: &mut R) -> ComplexPair {
    let two_pi = 2.0 * std::f64::consts::PI;
    let angles = [
        rng.gen::<f64>() * two_pi,
        rng.gen::<f64>() * two_pi,
        rng.gen::<f64>() * two_pi,
    ];
    let t = [
        rng.gen::<f64>() * 2.0 - 1.0,
        rng.gen::<f64>() * 2.0 - 1.0,
        rng.gen::<f64>() * 2.0 - 1.0,
    ];
    let rot = rotation_matrix(angles);
    ComplexPair {
        ligand: apply_rigid(&pair.ligand, &rot, t),
        pocket: apply_rigid(&pair.pocket, &rot, t),
        center: pair.center,
    }
}

/// Write a structure as XYZ text (count, blank comment, element x y z).
pub fn write_xyz<W: Write>(structure: &Structure, mut w: W) -> Result<()> {
    if structure.is_empty() {
        return Err(VoxwalkError::EmptyStructure);
    }
    writeln!(w, "{}", structure.len())?;
    writeln!(w)?;
    for a in &structure.atoms {
        writeln!(
            w,
            "{} {:.6} {:.6} {:.6}",
            a.element.symbol(),
            a.position[0],
            a.position[1],
            a.position[2]
        )?;
    }
    Ok(())
}

/// Parse XYZ text written by `write_xyz`.
pub fn parse_xyz<R: Read>(reader: R, kind: StructureKind) -> Result<Structure> {
    let mut lines = BufReader::new(reader).lines();
    let count: usize = lines
        .next()
        .transpose()?
        .as_deref()
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "malformed atom count"))?;
    lines.next().transpose()?; // comment line
    let mut atoms = Vec::with_capacity(count);
    for i in 0..count {
        let lineno = 3 + i;
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| parse_err(lineno, "truncated atom block"))?;
        let mut it = line.split_whitespace();
        let sym = it
            .next()
            .ok_or_else(|| parse_err(lineno, "missing element symbol"))?;
        let e = Element::from_symbol(sym).ok_or_else(|| VoxwalkError::UnsupportedElement {
            line: lineno,
            symbol: sym.to_string(),
        })?;
        let mut coord = [0.0f64; 3];
        for c in coord.iter_mut() {
            *c = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(lineno, "malformed coordinate field"))?;
        }
        atoms.push(Atom::new(e, coord));
    }
    Structure::new(atoms, kind)
}
