//! Periodic table lookup.

use crate::error::{Error, Result};

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

pub const MAX_ATOMIC_NUMBER: usize = 118;

/// Atomic number for a case-insensitive element symbol. Deuterium and
/// tritium map to hydrogen.
pub fn atomic_number(symbol: &str) -> Result<u8> {
    let s = symbol.trim();
    if s.eq_ignore_ascii_case("D") || s.eq_ignore_ascii_case("T") {
        return Ok(1);
    }
    SYMBOLS
        .iter()
        .position(|e| e.eq_ignore_ascii_case(s))
        .map(|i| (i + 1) as u8)
        .ok_or_else(|| Error::UnknownElement(s.to_string()))
}

pub fn symbol(atomic_number: u8) -> Result<&'static str> {
    let z = atomic_number as usize;
    if !(1..=MAX_ATOMIC_NUMBER).contains(&z) {
        return Err(Error::AtomicNumber(z));
    }
    Ok(SYMBOLS[z - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_both_ways() {
        assert_eq!(atomic_number("C").unwrap(), 6);
        assert_eq!(atomic_number("CL").unwrap(), 17);
        assert_eq!(atomic_number(" fe").unwrap(), 26);
        assert_eq!(atomic_number("D").unwrap(), 1);
        assert_eq!(symbol(118).unwrap(), "Og");
        assert!(atomic_number("Xx").is_err());
        assert!(symbol(0).is_err());
        for z in 1..=118u8 {
            assert_eq!(atomic_number(symbol(z).unwrap()).unwrap(), z);
        }
    }
}
