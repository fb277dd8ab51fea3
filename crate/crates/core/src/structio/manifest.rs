//! Dataset manifests: `id,protein,ligand,label,split` CSV files.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use super::{crop_pocket, parse_ligand, parse_protein, PocketComplex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Resolved against the manifest's directory.
    pub protein: PathBuf,
    pub ligand: PathBuf,
    pub label: Option<f64>,
    pub split: Split,
}

impl ManifestEntry {
    /// Reads both structure files, crops the pocket, and attaches the label.
    pub fn load(&self, max_residues: usize) -> Result<PocketComplex> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let protein = parse_protein(&read(&self.protein)?).map_err(|e| self.context(&self.protein, e))?;
        let ligand = parse_ligand(&read(&self.ligand)?).map_err(|e| self.context(&self.ligand, e))?;
        let mut pc = crop_pocket(&protein, &ligand, max_residues)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", self.id)))?;
        pc.label = self.label;
        Ok(pc)
    }

    fn context(&self, path: &Path, e: Error) -> Error {
        Error::InvalidInput(format!("{} ({}): {e}", self.id, path.display()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    protein: String,
    ligand: String,
    label: String,
    split: String,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Loads every entry of `split` in parallel; results are in manifest order.
    pub fn load_split(
        &self,
        split: Split,
        max_residues: usize,
    ) -> Vec<(&ManifestEntry, Result<PocketComplex>)> {
        let entries: Vec<&ManifestEntry> = self.split(split).collect();
        entries
            .into_par_iter()
            .map(|e| (e, e.load(max_residues)))
            .collect()
    }
}

/// Reads a manifest CSV. Structure files are not opened here.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub(crate) fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["id", "protein", "ligand", "label", "split"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Manifest(format!(
            "header must be `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::Manifest(format!("duplicate id `{}`", row.id)));
        }
        let label = if row.label.is_empty() {
            None
        } else {
            let v: f64 = row.label.parse().map_err(|_| {
                Error::Manifest(format!("row {}: malformed label `{}`", i + 2, row.label))
            })?;
            if !v.is_finite() {
                return Err(Error::Manifest(format!("row {}: non-finite label", i + 2)));
            }
            Some(v)
        };
        entries.push(ManifestEntry {
            id: row.id,
            protein: base.join(row.protein),
            ligand: base.join(row.ligand),
            label,
            split: row.split.parse()?,
        });
    }
    Ok(DatasetManifest { entries })
}
