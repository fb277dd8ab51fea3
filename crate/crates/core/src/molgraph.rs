//! Atom-level radius graphs.

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structio::{AtomSource, MolecularStructure, PocketComplex};

pub const DEFAULT_CUTOFF: f64 = 5.0;

/// Directed radius graph. Both directions of every pair are stored and
/// edges are sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGraph {
    pub atomic_numbers: Vec<u8>,
    pub coords: Vec<[f64; 3]>,
    /// `(i, j)`: atom `i` receives a message from neighbour `j`.
    pub edges: Vec<(usize, usize)>,
    /// `|x_j - x_i|` in Å.
    pub edge_dist: Vec<f64>,
    /// `(x_j - x_i) / |x_j - x_i|`.
    pub edge_relpos: Vec<[f64; 3]>,
}

impl AtomGraph {
    pub fn num_nodes(&self) -> usize {
        self.atomic_numbers.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unit relative positions expressed in a rotated basis: each `r` becomes
    /// `r R` (row-vector convention, matching [`crate::frames::apply_frame`]).
    pub fn rotated_relpos(&self, rotation: &nalgebra::Matrix3<f64>) -> Vec<[f64; 3]> {
        let rt = rotation.transpose();
        self.edge_relpos
            .iter()
            .map(|r| (rt * nalgebra::Vector3::from(*r)).into())
            .collect()
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> AtomGraph {
        let n = self.num_nodes();
        let mut atomic_numbers = vec![0; n];
        let mut coords = vec![[0.0; 3]; n];
        for i in 0..n {
            atomic_numbers[perm[i]] = self.atomic_numbers[i];
            coords[perm[i]] = self.coords[i];
        }
        let mut edges: Vec<(usize, usize, f64, [f64; 3])> = self
            .edges
            .iter()
            .zip(&self.edge_dist)
            .zip(&self.edge_relpos)
            .map(|((&(i, j), &d), &r)| (perm[i], perm[j], d, r))
            .collect();
        edges.sort_by_key(|e| (e.0, e.1));
        AtomGraph {
            atomic_numbers,
            coords,
            edges: edges.iter().map(|e| (e.0, e.1)).collect(),
            edge_dist: edges.iter().map(|e| e.2).collect(),
            edge_relpos: edges.iter().map(|e| e.3).collect(),
        }
    }
}

type Cell = (i64, i64, i64);

/// Radius graph over `coords` with an inclusive cutoff, via a cell list
/// with cell edge equal to the cutoff.
pub fn radius_graph(atomic_numbers: Vec<u8>, coords: Vec<[f64; 3]>, cutoff: f64) -> Result<AtomGraph> {
    if coords.is_empty() {
        return Err(Error::InvalidInput("radius graph of an empty structure".into()));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidInput(format!("cutoff must be positive, got {cutoff}")));
    }
    if coords.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    let cutoff2 = cutoff * cutoff;
    let cell_of = |p: &[f64; 3]| -> Cell {
        (
            (p[0] / cutoff).floor() as i64,
            (p[1] / cutoff).floor() as i64,
            (p[2] / cutoff).floor() as i64,
        )
    };
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in coords.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }

    let mut edges = Vec::new();
    let mut edge_dist = Vec::new();
    let mut edge_relpos = Vec::new();
    let mut neighbours = Vec::new();
    for (i, pi) in coords.iter().enumerate() {
        let (cx, cy, cz) = cell_of(pi);
        neighbours.clear();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        neighbours.extend_from_slice(members);
                    }
                }
            }
        }
        neighbours.sort_unstable();
        for &j in &neighbours {
            if j == i {
                continue;
            }
            let pj = &coords[j];
            let diff = [pj[0] - pi[0], pj[1] - pi[1], pj[2] - pi[2]];
            let d2 = diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2];
            if d2 > cutoff2 {
                continue;
            }
            if d2 == 0.0 {
                if i < j {
                    warn!("atoms {i} and {j} coincide; no edge created");
                }
                continue;
            }
            let d = d2.sqrt();
            edges.push((i, j));
            edge_dist.push(d);
            edge_relpos.push([diff[0] / d, diff[1] / d, diff[2] / d]);
        }
    }
    Ok(AtomGraph {
        atomic_numbers,
        coords,
        edges,
        edge_dist,
        edge_relpos,
    })
}

pub fn build_radius_graph(structure: &MolecularStructure, cutoff: f64) -> Result<AtomGraph> {
    radius_graph(structure.atomic_numbers(), structure.positions(), cutoff)
}

/// Bound complex plus the two unbound parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTriple {
    pub complex: AtomGraph,
    pub protein: AtomGraph,
    pub ligand: AtomGraph,
    /// Complex node index to (source part, node index within that part).
    pub offsets: Vec<(AtomSource, usize)>,
}

impl GraphTriple {
    pub fn part(&self, source: AtomSource) -> &AtomGraph {
        match source {
            AtomSource::Protein => &self.protein,
            AtomSource::Ligand => &self.ligand,
        }
    }
}

pub fn build_graph_triple(pc: &PocketComplex, cutoff: f64) -> Result<GraphTriple> {
    let complex = build_radius_graph(&pc.complex, cutoff)?;
    let protein = build_radius_graph(&pc.protein_pocket, cutoff)?;
    let ligand = build_radius_graph(&pc.ligand, cutoff)?;
    let np = protein.num_nodes();
    let offsets = (0..complex.num_nodes())
        .map(|i| {
            if i < np {
                (AtomSource::Protein, i)
            } else {
                (AtomSource::Ligand, i - np)
            }
        })
        .collect();
    Ok(GraphTriple {
        complex,
        protein,
        ligand,
        offsets,
    })
}
