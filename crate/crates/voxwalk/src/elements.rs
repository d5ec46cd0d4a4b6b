//! Supported chemical elements and their channel mappings.
//!
//! Hydrogens are modeled implicitly and never stored. Ligands use seven
//! element channels (C, O, N, S, F, Cl, P), pockets four (C, O, N, S).

use crate::error::{Result, VoxwalkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    C,
    O,
    N,
    S,
    F,
    Cl,
    P,
}

/// Fixed ligand channel order.
pub const LIGAND_ELEMENTS: [Element; 7] = [
    Element::C,
    Element::O,
    Element::N,
    Element::S,
    Element::F,
    Element::Cl,
    Element::P,
];

/// Fixed pocket channel order.
pub const POCKET_ELEMENTS: [Element; 4] = [Element::C, Element::O, Element::N, Element::S];

impl Element {
    pub fn from_symbol(s: &str) -> Option<Element> {
        match s {
            "C" => Some(Element::C),
            "O" => Some(Element::O),
            "N" => Some(Element::N),
            "S" => Some(Element::S),
            "F" => Some(Element::F),
            "Cl" | "CL" => Some(Element::Cl),
            "P" => Some(Element::P),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::O => "O",
            Element::N => "N",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::P => "P",
        }
    }

    /// Channel index in the 7-channel ligand grid.
    pub fn ligand_channel(self) -> usize {
        match self {
            Element::C => 0,
            Element::O => 1,
            Element::N => 2,
            Element::S => 3,
            Element::F => 4,
            Element::Cl => 5,
            Element::P => 6,
        }
    }

    /// Channel index in the 4-channel pocket grid, if the element is in the pocket set.
    pub fn pocket_channel(self) -> Option<usize> {
        match self {
            Element::C => Some(0),
            Element::O => Some(1),
            Element::N => Some(2),
            Element::S => Some(3),
            _ => None,
        }
    }

    pub fn from_ligand_channel(c: usize) -> Result<Element> {
        LIGAND_ELEMENTS
            .get(c)
            .copied()
            .ok_or_else(|| VoxwalkError::Invalid(format!("ligand channel {c} out of range")))
    }

    pub fn from_pocket_channel(c: usize) -> Result<Element> {
        POCKET_ELEMENTS
            .get(c)
            .copied()
            .ok_or_else(|| VoxwalkError::Invalid(format!("pocket channel {c} out of range")))
    }

    /// Van der Waals radius in Ångström (Bondi values, pocket voxelization
    /// and clash detection).
    pub fn vdw_radius(self) -> f64 {
        match self {
            Element::C => 1.70,
            Element::N => 1.55,
            Element::O => 1.52,
            Element::S => 1.80,
            Element::F => 1.47,
            Element::Cl => 1.75,
            Element::P => 1.80,
        }
    }

    /// Single-bond covalent radius in Ångström (bond inference heuristic).
    pub fn covalent_radius(self) -> f64 {
        match self {
            Element::C => 0.76,
            Element::N => 0.71,
            Element::O => 0.66,
            Element::S => 1.05,
            Element::F => 0.57,
            Element::Cl => 1.02,
            Element::P => 1.07,
        }
    }

    pub fn in_pocket_set(self) -> bool {
        self.pocket_channel().is_some()
    }
}
