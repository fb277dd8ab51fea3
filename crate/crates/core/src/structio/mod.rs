//! Structure input: minimal PDB and SDF readers, pocket cropping, and
//! dataset manifests.
//!
//! Every structure that leaves this module is heavy-atom only.

mod element;
mod manifest;
mod pdb;
mod pocket;
mod sdf;

pub use element::{atomic_number, symbol as element_symbol, MAX_ATOMIC_NUMBER};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};
pub use pdb::{parse_protein, write_pdb};
pub use pocket::{crop_pocket, DEFAULT_POCKET_RESIDUES};
pub use sdf::{parse_ligand, write_sdf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomSource {
    Protein,
    Ligand,
}

impl AtomSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AtomSource::Protein => "protein",
            AtomSource::Ligand => "ligand",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureKind {
    Protein,
    Ligand,
    Complex,
}

/// Chain identifier plus residue sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResidueId {
    pub chain: char,
    pub seq: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub element: String,
    pub atomic_number: u8,
    /// Cartesian position in Å.
    pub position: [f64; 3],
    pub residue_id: Option<ResidueId>,
    pub source: AtomSource,
    /// Atom name as written in the input (PDB columns 13–16); empty for ligands.
    pub name: String,
    /// Three-letter residue name; empty for ligands.
    pub residue_name: String,
}

impl AtomRecord {
    pub fn new(
        element: &str,
        position: [f64; 3],
        residue_id: Option<ResidueId>,
        source: AtomSource,
    ) -> Result<Self> {
        let atomic_number = atomic_number(element)?;
        let element = element_symbol(atomic_number)?.to_string();
        let rec = AtomRecord {
            element,
            atomic_number,
            position,
            residue_id,
            source,
            name: String::new(),
            residue_name: String::new(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.atomic_number as usize;
        if !(1..=MAX_ATOMIC_NUMBER).contains(&z) {
            return Err(Error::AtomicNumber(z));
        }
        if atomic_number(&self.element)? != self.atomic_number {
            return Err(Error::InvalidInput(format!(
                "element {} inconsistent with atomic number {}",
                self.element, self.atomic_number
            )));
        }
        if self.position.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite position {:?}",
                self.position
            )));
        }
        Ok(())
    }

    pub fn is_hydrogen(&self) -> bool {
        self.atomic_number == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularStructure {
    pub atoms: Vec<AtomRecord>,
    pub kind: StructureKind,
}

impl MolecularStructure {
    /// Builds a structure, dropping hydrogens.
    pub fn new(atoms: Vec<AtomRecord>, kind: StructureKind) -> Self {
        MolecularStructure {
            atoms: atoms.into_iter().filter(|a| !a.is_hydrogen()).collect(),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn atomic_numbers(&self) -> Vec<u8> {
        self.atoms.iter().map(|a| a.atomic_number).collect()
    }

    /// Applies `f` to every position.
    pub fn map_positions(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.position = f(a.position);
        }
        out
    }
}

/// A cropped pocket, its ligand, and the concatenated complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocketComplex {
    pub protein_pocket: MolecularStructure,
    pub ligand: MolecularStructure,
    pub complex: MolecularStructure,
    /// Binding affinity in pK units.
    pub label: Option<f64>,
}

impl PocketComplex {
    /// Assembles a complex from an already-cropped pocket and a ligand.
    pub fn assemble(
        protein_pocket: MolecularStructure,
        ligand: MolecularStructure,
        label: Option<f64>,
    ) -> Self {
        let mut atoms = protein_pocket.atoms.clone();
        atoms.extend(ligand.atoms.iter().cloned());
        PocketComplex {
            complex: MolecularStructure {
                atoms,
                kind: StructureKind::Complex,
            },
            protein_pocket,
            ligand,
            label,
        }
    }

    pub fn map_positions(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        PocketComplex::assemble(
            self.protein_pocket.map_positions(&mut f),
            self.ligand.map_positions(&mut f),
            self.label,
        )
    }
}
