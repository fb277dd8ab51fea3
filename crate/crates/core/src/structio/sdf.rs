//! SDF / MOL V2000 atom block reader.

use super::{AtomRecord, AtomSource, MolecularStructure, StructureKind};
use crate::error::{Error, Result};

fn field(line: &str, start: usize, end: usize) -> Option<&str> {
    line.get(start.min(line.len())..end.min(line.len()))
}

/// Parses one V2000 atom line. Fixed columns are tried first; lines written
/// by tools that ignore the column layout fall back to whitespace splitting.
fn atom_line(line: &str) -> Option<([f64; 3], String)> {
    let fixed = || -> Option<([f64; 3], String)> {
        let x = field(line, 0, 10)?.trim().parse().ok()?;
        let y = field(line, 10, 20)?.trim().parse().ok()?;
        let z = field(line, 20, 30)?.trim().parse().ok()?;
        let sym = field(line, 31, 34)?.trim();
        if sym.is_empty() || !sym.chars().all(|c| c.is_ascii_alphabetic()) {
            return None;
        }
        Some(([x, y, z], sym.to_string()))
    };
    fixed().or_else(|| {
        let mut it = line.split_whitespace();
        let x = it.next()?.parse().ok()?;
        let y = it.next()?.parse().ok()?;
        let z = it.next()?.parse().ok()?;
        let sym = it.next()?;
        if !sym.chars().all(|c| c.is_ascii_alphabetic()) {
            return None;
        }
        Some(([x, y, z], sym.to_string()))
    })
}

/// Parses the first molecule of an SDF/MOL V2000 file into heavy ligand atoms.
/// The bond block is not read.
pub fn parse_ligand(text: &str) -> Result<MolecularStructure> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 4 {
        return Err(Error::parse(lines.len().max(1), "missing header or counts line"));
    }
    let counts = lines[3];
    let natoms: usize = field(counts, 0, 3)
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(4, format!("malformed counts line `{counts}`")))?;
    if counts.contains("V3000") {
        return Err(Error::parse(4, "V3000 molfiles are not supported"));
    }

    let mut atoms = Vec::with_capacity(natoms);
    for k in 0..natoms {
        let lineno = 5 + k;
        let line = lines.get(4 + k).ok_or_else(|| {
            Error::parse(
                lineno,
                format!("atom count mismatch: counts line declares {natoms}, found {k}"),
            )
        })?;
        let (position, sym) = atom_line(line).ok_or_else(|| {
            Error::parse(
                lineno,
                format!("atom count mismatch: counts line declares {natoms}, found {k}"),
            )
        })?;
        if position.iter().any(|c| !c.is_finite()) {
            return Err(Error::parse(lineno, "non-finite coordinate"));
        }
        let rec = AtomRecord::new(&sym, position, None, AtomSource::Ligand)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        atoms.push(rec);
    }
    // A further atom-shaped line means the counts line undercounts.
    if let Some(next) = lines.get(4 + natoms) {
        if atom_line(next).is_some() {
            return Err(Error::parse(
                5 + natoms,
                format!("atom count mismatch: more than {natoms} atom lines"),
            ));
        }
    }
    Ok(MolecularStructure::new(atoms, StructureKind::Ligand))
}

/// Writes atoms as a V2000 molfile with an empty bond block.
pub fn write_sdf(name: &str, atoms: &[AtomRecord]) -> Result<String> {
    if atoms.len() > 999 {
        return Err(Error::InvalidInput(format!("{} atoms do not fit a V2000 counts line", atoms.len())));
    }
    let mut s = format!("{name}\n  ipbind\n\n");
    s.push_str(&format!("{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n", atoms.len(), 0));
    for a in atoms {
        s.push_str(&format!(
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n",
            a.position[0], a.position[1], a.position[2], a.element
        ));
    }
    s.push_str("M  END\n$$$$\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn molfile(atoms: &[([f64; 3], &str)], bonds: &[(usize, usize)], declared: usize) -> String {
        let mut s = String::from("ligand\n  test\n\n");
        s.push_str(&format!(
            "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n",
            declared,
            bonds.len()
        ));
        for (p, el) in atoms {
            s.push_str(&format!(
                "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n",
                p[0], p[1], p[2], el
            ));
        }
        for (a, b) in bonds {
            s.push_str(&format!("{a:>3}{b:>3}  1  0\n"));
        }
        s.push_str("M  END\n$$$$\n");
        s
    }

    #[test]
    fn two_atoms() {
        let text = molfile(&[([0.0; 3], "C"), ([1.2, 0.0, 0.0], "O")], &[(1, 2)], 2);
        let s = parse_ligand(&text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.atoms[0].position, [0.0, 0.0, 0.0]);
        assert_eq!(s.atoms[1].position, [1.2, 0.0, 0.0]);
        assert_eq!(s.atoms[1].atomic_number, 8);
        assert!(s.atoms.iter().all(|a| a.residue_id.is_none()));
    }

    #[test]
    fn hydrogen_dropped() {
        let text = molfile(
            &[([0.0; 3], "C"), ([1.09, 0.0, 0.0], "H"), ([0.0, 1.4, 0.0], "N")],
            &[],
            3,
        );
        let s = parse_ligand(&text).unwrap();
        assert_eq!(s.atomic_numbers(), vec![6, 7]);
    }

    #[test]
    fn benzene_ring() {
        let ring: Vec<([f64; 3], &str)> = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                ([1.39 * t.cos(), 1.39 * t.sin(), 0.0], "C")
            })
            .collect();
        let bonds: Vec<_> = (1..=6).map(|k| (k, k % 6 + 1)).collect();
        let s = parse_ligand(&molfile(&ring, &bonds, 6)).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.atoms.iter().all(|a| a.atomic_number == 6));
        for (a, (p, _)) in s.atoms.iter().zip(&ring) {
            for k in 0..3 {
                assert!((a.position[k] - p[k]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn count_mismatch() {
        let atoms = [([0.0; 3], "C"), ([1.2, 0.0, 0.0], "O")];
        let over = molfile(&atoms, &[(1, 2)], 3);
        assert!(matches!(parse_ligand(&over), Err(Error::Parse { line: 7, .. })));
        let under = molfile(&atoms, &[(1, 2)], 1);
        assert!(matches!(parse_ligand(&under), Err(Error::Parse { line: 6, .. })));
        let truncated = "x\n\n\n  3  0  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 C   0\n";
        assert!(parse_ligand(truncated).is_err());
    }

    #[test]
    fn whitespace_separated_atoms() {
        let text = "m\n\n\n  1  0  0  0  0  0  0  0  0  0999 V2000\n 1.5 -2.25 3 Cl 0 0\nM  END\n";
        let s = parse_ligand(text).unwrap();
        assert_eq!(s.atoms[0].position, [1.5, -2.25, 3.0]);
        assert_eq!(s.atoms[0].atomic_number, 17);
    }

    #[test]
    fn write_then_parse() {
        let atoms = vec![
            AtomRecord::new("C", [1.25, -3.5, 0.0], None, AtomSource::Ligand).unwrap(),
            AtomRecord::new("Cl", [-10.125, 2.0, 7.75], None, AtomSource::Ligand).unwrap(),
        ];
        let back = parse_ligand(&write_sdf("x", &atoms).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.atoms[1].element, "Cl");
        assert_eq!(back.atoms[1].position, [-10.125, 2.0, 7.75]);
    }
}
