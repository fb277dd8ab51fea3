//! Binding-pocket cropping.

use std::collections::{HashMap, HashSet};

use super::{MolecularStructure, PocketComplex, ResidueId, StructureKind};
use crate::error::{Error, Result};

pub const DEFAULT_POCKET_RESIDUES: usize = 50;

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Keeps the `max_residues` protein residues closest to the ligand, where a
/// residue's distance is the minimum over its heavy atoms and all ligand
/// heavy atoms. Ties are broken by first appearance in the file.
///
/// Protein atoms without a residue id are treated as single-atom residues.
pub fn crop_pocket(
    protein: &MolecularStructure,
    ligand: &MolecularStructure,
    max_residues: usize,
) -> Result<PocketComplex> {
    if protein.is_empty() {
        return Err(Error::InvalidInput("protein has no heavy atoms".into()));
    }
    if ligand.is_empty() {
        return Err(Error::InvalidInput("ligand has no heavy atoms".into()));
    }

    #[derive(Hash, PartialEq, Eq, Clone, Copy)]
    enum Key {
        Residue(ResidueId),
        Loose(usize),
    }

    let ligand_pos = ligand.positions();
    let mut order: Vec<Key> = Vec::new();
    let mut best: HashMap<Key, f64> = HashMap::new();
    let mut keys = Vec::with_capacity(protein.len());
    for (i, atom) in protein.atoms.iter().enumerate() {
        let key = atom.residue_id.map_or(Key::Loose(i), Key::Residue);
        let d = ligand_pos
            .iter()
            .map(|&l| dist2(atom.position, l))
            .fold(f64::INFINITY, f64::min);
        best.entry(key)
            .and_modify(|v| *v = v.min(d))
            .or_insert_with(|| {
                order.push(key);
                d
            });
        keys.push(key);
    }

    // Stable sort keeps file order among equal distances.
    let mut ranked: Vec<(usize, f64)> = order
        .iter()
        .enumerate()
        .map(|(rank, k)| (rank, best[k]))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let kept: HashSet<Key> = ranked
        .iter()
        .take(max_residues)
        .map(|&(rank, _)| order[rank])
        .collect();

    let pocket_atoms = protein
        .atoms
        .iter()
        .zip(&keys)
        .filter(|(_, k)| kept.contains(k))
        .map(|(a, _)| a.clone())
        .collect();
    let pocket = MolecularStructure {
        atoms: pocket_atoms,
        kind: StructureKind::Protein,
    };
    Ok(PocketComplex::assemble(pocket, ligand.clone(), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structio::{AtomRecord, AtomSource};

    fn residue_atoms(seq: i32, positions: &[[f64; 3]]) -> Vec<AtomRecord> {
        positions
            .iter()
            .map(|&p| {
                AtomRecord::new("C", p, Some(ResidueId { chain: 'A', seq }), AtomSource::Protein)
                    .unwrap()
            })
            .collect()
    }

    fn ligand_at_origin() -> MolecularStructure {
        MolecularStructure::new(
            vec![AtomRecord::new("C", [0.0; 3], None, AtomSource::Ligand).unwrap()],
            StructureKind::Ligand,
        )
    }

    fn kept_residues(pc: &PocketComplex) -> Vec<i32> {
        let mut v: Vec<i32> = pc
            .protein_pocket
            .atoms
            .iter()
            .map(|a| a.residue_id.unwrap().seq)
            .collect();
        v.dedup();
        v
    }

    #[test]
    fn fewer_residues_than_cap() {
        let atoms = (1..=30)
            .flat_map(|r| residue_atoms(r, &[[r as f64, 0.0, 0.0], [r as f64, 1.0, 0.0]]))
            .collect();
        let protein = MolecularStructure::new(atoms, StructureKind::Protein);
        let pc = crop_pocket(&protein, &ligand_at_origin(), 50).unwrap();
        assert_eq!(kept_residues(&pc).len(), 30);
        assert_eq!(pc.protein_pocket.atoms, protein.atoms);
    }

    #[test]
    fn nearest_fifty_of_sixty() {
        // Residue r has its nearest atom r Å away; a farther atom is added.
        // Written in a shuffled order so file order differs from rank.
        let mut seqs: Vec<i32> = (1..=60).collect();
        seqs.reverse();
        seqs.swap(3, 40);
        let atoms = seqs
            .iter()
            .flat_map(|&r| {
                let d = r as f64;
                residue_atoms(r, &[[0.0, d + 3.0, 0.0], [0.0, 0.0, d]])
            })
            .collect();
        let protein = MolecularStructure::new(atoms, StructureKind::Protein);
        let pc = crop_pocket(&protein, &ligand_at_origin(), 50).unwrap();
        let mut kept = kept_residues(&pc);
        kept.sort();
        assert_eq!(kept, (1..=50).collect::<Vec<_>>());
        assert_eq!(pc.protein_pocket.len(), 100);
    }

    #[test]
    fn tie_at_boundary_keeps_earlier() {
        let atoms = [
            residue_atoms(7, &[[0.0, 0.0, 2.0]]),
            residue_atoms(3, &[[0.0, 2.0, 0.0]]),
            residue_atoms(5, &[[1.0, 0.0, 0.0]]),
        ]
        .concat();
        let protein = MolecularStructure::new(atoms, StructureKind::Protein);
        let pc = crop_pocket(&protein, &ligand_at_origin(), 2).unwrap();
        assert_eq!(kept_residues(&pc), vec![7, 5]);
    }

    #[test]
    fn complex_is_pocket_then_ligand() {
        let protein = MolecularStructure::new(
            residue_atoms(1, &[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
            StructureKind::Protein,
        );
        let ligand = ligand_at_origin();
        let pc = crop_pocket(&protein, &ligand, 50).unwrap();
        let expected: Vec<_> = pc
            .protein_pocket
            .atoms
            .iter()
            .chain(&ligand.atoms)
            .cloned()
            .collect();
        assert_eq!(pc.complex.atoms, expected);
        assert_eq!(pc.complex.kind, StructureKind::Complex);
    }

    #[test]
    fn empty_inputs_rejected() {
        let empty = MolecularStructure::new(vec![], StructureKind::Protein);
        assert!(crop_pocket(&empty, &ligand_at_origin(), 50).is_err());
        let protein = MolecularStructure::new(residue_atoms(1, &[[1.0; 3]]), StructureKind::Protein);
        let no_lig = MolecularStructure::new(vec![], StructureKind::Ligand);
        assert!(crop_pocket(&protein, &no_lig, 50).is_err());
    }
}
