//! Random structures and rigid motions for tests, demos, and invariance
//! checks. Nothing here models real chemistry.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::structio::{
    AtomRecord, AtomSource, MolecularStructure, PocketComplex, ResidueId, StructureKind,
};

/// Uniform points in the cube `[0, side)^3`.
pub fn random_points(rng: &mut impl Rng, n: usize, side: f64) -> Vec<[f64; 3]> {
    let u = Uniform::new(0.0, side).expect("valid range");
    (0..n)
        .map(|_| [u.sample(rng), u.sample(rng), u.sample(rng)])
        .collect()
}

/// Haar-uniform proper rotation.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let mut q = [0.0f64; 4];
    loop {
        for c in &mut q {
            *c = StandardNormal.sample(rng);
        }
        if q.iter().map(|c| c * c).sum::<f64>() > 1e-12 {
            break;
        }
    }
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

/// Random rotation plus a translation with components in `[-scale, scale]`.
pub fn random_rigid_motion(rng: &mut impl Rng, scale: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let u = Uniform::new_inclusive(-scale, scale).expect("valid range");
    let r = random_rotation(rng);
    (r, Vector3::new(u.sample(rng), u.sample(rng), u.sample(rng)))
}

/// `x -> R x + w` on every atom of the complex.
pub fn transform_complex(pc: &PocketComplex, rotation: &Matrix3<f64>, shift: &Vector3<f64>) -> PocketComplex {
    pc.map_positions(|p| (rotation * Vector3::from(p) + shift).into())
}

fn ball_point(rng: &mut impl Rng, radius: f64) -> Vector3<f64> {
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    loop {
        let v = Vector3::new(u.sample(rng), u.sample(rng), u.sample(rng));
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

const BACKBONE: [(&str, &str); 4] = [("N", "N"), ("CA", "C"), ("C", "C"), ("O", "O")];
const SIDE_ELEMENTS: [&str; 4] = ["C", "N", "O", "S"];
const LIGAND_ELEMENTS: [&str; 6] = ["C", "C", "C", "N", "O", "Cl"];

/// Protein of `residues` residues, each four backbone atoms plus 0–2 side
/// atoms scattered around a residue centre. Centres fill a shell of radius
/// 3–`3 + residues^(1/3) * 3` Å around the origin.
pub fn synthetic_protein(rng: &mut impl Rng, residues: usize) -> MolecularStructure {
    let outer = 3.0 + (residues as f64).cbrt() * 3.0;
    let mut atoms = Vec::new();
    for r in 0..residues {
        let centre = loop {
            let c = ball_point(rng, outer);
            if c.norm() >= 3.0 {
                break c;
            }
        };
        let side = rng.random_range(0..=2usize);
        let rid = ResidueId {
            chain: 'A',
            seq: r as i32 + 1,
        };
        let names = BACKBONE
            .iter()
            .map(|&(n, e)| (n.to_string(), e))
            .chain((0..side).map(|k| {
                let e = SIDE_ELEMENTS[rng.random_range(0..SIDE_ELEMENTS.len())];
                (format!("{e}X{k}"), e)
            }))
            .collect::<Vec<_>>();
        for (name, el) in names {
            let p = centre + ball_point(rng, 1.6);
            let mut a = AtomRecord::new(el, p.into(), Some(rid), AtomSource::Protein)
                .expect("valid synthetic atom");
            a.name = name;
            a.residue_name = "GLY".into();
            atoms.push(a);
        }
    }
    MolecularStructure::new(atoms, StructureKind::Protein)
}

/// Ligand of `n` atoms inside a 2.5 Å ball at the origin.
pub fn synthetic_ligand(rng: &mut impl Rng, n: usize) -> MolecularStructure {
    let atoms = (0..n)
        .map(|_| {
            let el = LIGAND_ELEMENTS[rng.random_range(0..LIGAND_ELEMENTS.len())];
            AtomRecord::new(el, ball_point(rng, 2.5).into(), None, AtomSource::Ligand)
                .expect("valid synthetic atom")
        })
        .collect();
    MolecularStructure::new(atoms, StructureKind::Ligand)
}

/// Uncropped synthetic complex with a label drawn from `[4, 10]` pK.
pub fn synthetic_complex(rng: &mut impl Rng, residues: usize, ligand_atoms: usize) -> PocketComplex {
    let protein = synthetic_protein(rng, residues);
    let ligand = synthetic_ligand(rng, ligand_atoms);
    let label = rng.random_range(4.0..=10.0);
    PocketComplex::assemble(protein, ligand, Some(label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotations_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn complex_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pc = synthetic_complex(&mut rng, 10, 7);
        assert_eq!(pc.ligand.len(), 7);
        assert!(pc.protein_pocket.len() >= 40);
        let l = pc.label.unwrap();
        assert!((4.0..=10.0).contains(&l));
    }
}
