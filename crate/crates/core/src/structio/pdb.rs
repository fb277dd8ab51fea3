//! Fixed-column PDB `ATOM` records: a read-only subset plus a debug writer.

use std::fmt::Write;

use super::{atomic_number, AtomRecord, AtomSource, MolecularStructure, ResidueId, StructureKind};
use crate::error::{Error, Result};

/// 1-based inclusive column range, clipped to the line length.
fn columns(line: &str, first: usize, last: usize) -> &str {
    let start = (first - 1).min(line.len());
    let end = last.min(line.len());
    &line[start..end]
}

fn coordinate(line: &str, lineno: usize, first: usize, axis: char) -> Result<f64> {
    let field = columns(line, first, first + 7).trim();
    let value: f64 = field
        .parse()
        .map_err(|_| Error::parse(lineno, format!("malformed {axis} coordinate `{field}`")))?;
    if !value.is_finite() {
        return Err(Error::parse(lineno, format!("non-finite {axis} coordinate")));
    }
    Ok(value)
}

/// Element from columns 77–78, falling back to the leading letters of the
/// atom name when those columns are blank.
fn element_field(line: &str, atom_name: &str) -> String {
    let explicit = columns(line, 77, 78).trim();
    if !explicit.is_empty() {
        return explicit.to_string();
    }
    let letters: String = atom_name
        .trim()
        .chars()
        .skip_while(|c| c.is_ascii_digit())
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    // Two-letter names such as "CA" are carbon-alpha, not calcium.
    letters.chars().take(1).collect()
}

/// Parses `ATOM` records of a PDB file into a heavy-atom protein structure.
///
/// `HETATM` records, waters, alternate locations other than blank/`A`, and
/// residues with insertion codes are skipped.
pub fn parse_protein(text: &str) -> Result<MolecularStructure> {
    let mut atoms = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if !line.starts_with("ATOM") || columns(line, 1, 6).trim_end() != "ATOM" {
            continue;
        }
        if !line.is_ascii() {
            return Err(Error::parse(lineno, "non-ASCII characters in ATOM record"));
        }
        if line.len() < 54 {
            return Err(Error::parse(lineno, "ATOM record shorter than 54 columns"));
        }
        let altloc = columns(line, 17, 17);
        if !(altloc.trim().is_empty() || altloc == "A") {
            continue;
        }
        if !columns(line, 27, 27).trim().is_empty() {
            continue;
        }
        let residue_name = columns(line, 18, 20).trim().to_string();
        if matches!(residue_name.as_str(), "HOH" | "WAT" | "DOD") {
            continue;
        }
        let name = columns(line, 13, 16).trim().to_string();
        let element = element_field(line, &name);
        let z = atomic_number(&element).map_err(|_| {
            Error::parse(lineno, format!("unknown element symbol `{element}`"))
        })?;
        if z == 1 {
            continue;
        }
        let chain = columns(line, 22, 22).chars().next().unwrap_or(' ');
        let seq_field = columns(line, 23, 26).trim();
        let seq: i32 = seq_field
            .parse()
            .map_err(|_| Error::parse(lineno, format!("malformed residue number `{seq_field}`")))?;
        let position = [
            coordinate(line, lineno, 31, 'x')?,
            coordinate(line, lineno, 39, 'y')?,
            coordinate(line, lineno, 47, 'z')?,
        ];
        let mut rec = AtomRecord::new(
            &element,
            position,
            Some(ResidueId { chain, seq }),
            AtomSource::Protein,
        )
        .map_err(|e| Error::parse(lineno, e.to_string()))?;
        rec.name = name;
        rec.residue_name = residue_name;
        atoms.push(rec);
    }
    Ok(MolecularStructure::new(atoms, StructureKind::Protein))
}

/// Writes atoms as PDB records; protein atoms as `ATOM`, ligand atoms as
/// `HETATM` in residue `LIG`. Optional per-atom values go into the B-factor
/// column, clamped to what fits the `%6.2f` field.
pub fn write_pdb(atoms: &[AtomRecord], bfactors: Option<&[f64]>) -> Result<String> {
    if let Some(b) = bfactors {
        if b.len() != atoms.len() {
            return Err(Error::LengthMismatch(atoms.len(), b.len()));
        }
    }
    let mut out = String::new();
    for (i, atom) in atoms.iter().enumerate() {
        let (record, resname, rid) = match atom.source {
            AtomSource::Protein => (
                "ATOM",
                if atom.residue_name.is_empty() { "UNK" } else { atom.residue_name.as_str() },
                atom.residue_id.unwrap_or(ResidueId { chain: 'A', seq: 1 }),
            ),
            AtomSource::Ligand => (
                "HETATM",
                "LIG",
                atom.residue_id.unwrap_or(ResidueId { chain: 'L', seq: 1 }),
            ),
        };
        let name = if atom.name.is_empty() {
            format!("{}{}", atom.element, i + 1)
        } else {
            atom.name.clone()
        };
        let name = if name.len() >= 4 {
            name[..4].to_string()
        } else {
            format!(" {name:<3}")
        };
        let b = bfactors.map_or(0.0, |b| b[i]).clamp(-99.99, 999.99);
        let [x, y, z] = atom.position;
        writeln!(
            out,
            "{:<6}{:>5} {} {:>3} {}{:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
            record,
            (i + 1) % 100_000,
            name,
            resname,
            rid.chain,
            rid.seq,
            x,
            y,
            z,
            1.0,
            b,
            atom.element.to_ascii_uppercase(),
        )
        .expect("writing to a String cannot fail");
    }
    out.push_str("END\n");
    Ok(out)
}
