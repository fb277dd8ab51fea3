//! Per-atom energies, frame-averaged affinity prediction, and attribution.
//!
//! The three graphs of a complex are each evaluated under their own PCA
//! frames. Per-atom energies are averaged over frames, and the affinity is
//! the sum over complex atoms of `E_unbound - E_bound`.

use std::fmt::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    encode_backward, encode_oriented, encode_traced, EncoderParams, Framework, ModelConfig,
};
use crate::error::{Error, Result};
use crate::frames::{average_frame_outputs, compute_frames};
use crate::molgraph::{build_graph_triple, AtomGraph, GraphTriple};
use crate::nn::{Mlp, Real};
use crate::structio::{write_pdb, AtomSource, PocketComplex};

/// Two-layer output head, `d -> d -> 1`.
pub type HeadParams<F> = Mlp<F>;

/// All learnable tensors, including the log noise variance of the
/// balanced MSE loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ModelParams<F> {
    /// One encoder when shared; complex, pocket, ligand when separate.
    pub encoders: Vec<EncoderParams<F>>,
    pub head: HeadParams<F>,
    pub log_noise_var: ndarray::Array1<F>,
}

/// Which of the three graphs is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphRole {
    Complex,
    Protein,
    Ligand,
}

impl<F: Real> ModelParams<F> {
    pub fn init(seed: u64, cfg: &ModelConfig, noise_sigma2: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoders = (0..cfg.encoder_count())
            .map(|_| EncoderParams::init(&mut rng, cfg))
            .collect();
        let head = Mlp::init(&mut rng, cfg.hidden_dim, cfg.hidden_dim, 1);
        ModelParams {
            encoders,
            head,
            log_noise_var: ndarray::arr1(&[F::of(noise_sigma2.ln())]),
        }
    }

    pub fn encoder(&self, role: GraphRole) -> &EncoderParams<F> {
        match (self.encoders.len(), role) {
            (1, _) | (_, GraphRole::Complex) => &self.encoders[0],
            (_, GraphRole::Protein) => &self.encoders[1],
            (_, GraphRole::Ligand) => &self.encoders[2],
        }
    }

    fn encoder_index(&self, role: GraphRole) -> usize {
        match (self.encoders.len(), role) {
            (1, _) | (_, GraphRole::Complex) => 0,
            (_, GraphRole::Protein) => 1,
            (_, GraphRole::Ligand) => 2,
        }
    }

    pub fn log_noise_var(&self) -> F {
        self.log_noise_var[0]
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            encoders: self.encoders.iter().map(EncoderParams::zeros_like).collect(),
            head: self.head.zeros_like(),
            log_noise_var: ndarray::Array1::zeros(1),
        }
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            encoders: self.encoders.iter().map(EncoderParams::cast).collect(),
            head: self.head.cast(),
            log_noise_var: self.log_noise_var.mapv(|v| G::of(v.to_f64())),
        }
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn slices(&self) -> Vec<&[F]> {
        let mut v: Vec<&[F]> = self.encoders.iter().flat_map(EncoderParams::slices).collect();
        v.extend(self.head.slices());
        v.push(self.log_noise_var.as_slice().expect("contiguous"));
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut v: Vec<&mut [F]> = self.encoders.iter_mut().flat_map(EncoderParams::slices_mut).collect();
        v.extend(self.head.slices_mut());
        v.push(self.log_noise_var.as_slice_mut().expect("contiguous"));
        v
    }

    /// Names matching [`ModelParams::slices`].
    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .encoders
            .iter()
            .enumerate()
            .flat_map(|(k, e)| e.names(&format!("encoder{k}")))
            .collect();
        v.extend(Mlp::<F>::names("head"));
        v.push("log_noise_var".into());
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// `E_i = MLP(h_i)`.
pub fn atomic_energies<F: Real>(h: &Array2<F>, head: &HeadParams<F>) -> Vec<F> {
    head.forward(h).column(0).to_vec()
}

/// One graph with its frame-rotated edge directions.
#[derive(Debug, Clone)]
pub struct FramedGraph {
    pub graph: AtomGraph,
    /// Per frame, `r_ij` expressed in that frame.
    pub relpos: Vec<Vec<[f64; 3]>>,
}

impl FramedGraph {
    pub fn new(graph: AtomGraph, cfg: &ModelConfig) -> Result<Self> {
        let frames = compute_frames(&graph.coords, cfg.frame_mode)?;
        let relpos = frames.rotations.iter().map(|r| graph.rotated_relpos(r)).collect();
        Ok(FramedGraph { graph, relpos })
    }

    pub fn frame_count(&self) -> usize {
        self.relpos.len()
    }
}

/// A complex with graphs and frames precomputed; frames depend only on
/// coordinates and are held fixed during training.
#[derive(Debug, Clone)]
pub struct PreparedComplex {
    pub pc: PocketComplex,
    pub offsets: Vec<(AtomSource, usize)>,
    pub complex: FramedGraph,
    pub protein: FramedGraph,
    pub ligand: FramedGraph,
}

impl PreparedComplex {
    pub fn new(pc: PocketComplex, cfg: &ModelConfig) -> Result<Self> {
        let GraphTriple {
            complex,
            protein,
            ligand,
            offsets,
        } = build_graph_triple(&pc, cfg.graph_cutoff)?;
        Ok(PreparedComplex {
            pc,
            offsets,
            complex: FramedGraph::new(complex, cfg)?,
            protein: FramedGraph::new(protein, cfg)?,
            ligand: FramedGraph::new(ligand, cfg)?,
        })
    }

    pub fn label(&self) -> Option<f64> {
        self.pc.label
    }

    fn graphs(&self, framework: Framework) -> Vec<(GraphRole, &FramedGraph)> {
        match framework {
            Framework::Difference => vec![
                (GraphRole::Complex, &self.complex),
                (GraphRole::Protein, &self.protein),
                (GraphRole::Ligand, &self.ligand),
            ],
            Framework::ComplexOnly => vec![(GraphRole::Complex, &self.complex)],
        }
    }
}

/// Frame-averaged per-atom energies of one graph.
pub fn graph_energies<F: Real>(fg: &FramedGraph, encoder: &EncoderParams<F>, head: &HeadParams<F>, cfg: &ModelConfig) -> Result<Vec<F>> {
    let per_frame = fg
        .relpos
        .iter()
        .map(|relpos| {
            let h = encode_oriented(&fg.graph, relpos, encoder, cfg)?;
            Ok(atomic_energies(&h, head))
        })
        .collect::<Result<Vec<_>>>()?;
    average_frame_outputs(&per_frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    /// Predicted affinity, pK.
    pub affinity: f64,
    /// Per complex atom, bound state.
    pub per_atom_bound: Vec<f64>,
    /// Per complex atom, energy of the same atom in its unbound graph
    /// (zero under the complex-only ablation).
    pub per_atom_unbound: Vec<f64>,
    /// `bound - unbound`; sums to `-affinity`.
    pub per_atom_delta: Vec<f64>,
}

pub fn predict_prepared<F: Real>(prep: &PreparedComplex, params: &ModelParams<F>, cfg: &ModelConfig) -> Result<PredictionReport> {
    let energies = |role: GraphRole, fg: &FramedGraph| -> Result<Vec<f64>> {
        let e = graph_energies(fg, params.encoder(role), &params.head, cfg)?;
        Ok(e.into_iter().map(Real::to_f64).collect())
    };
    let bound = energies(GraphRole::Complex, &prep.complex)?;
    let unbound = match cfg.framework {
        Framework::Difference => {
            let protein = energies(GraphRole::Protein, &prep.protein)?;
            let ligand = energies(GraphRole::Ligand, &prep.ligand)?;
            prep.offsets
                .iter()
                .map(|&(src, k)| match src {
                    AtomSource::Protein => protein[k],
                    AtomSource::Ligand => ligand[k],
                })
                .collect()
        }
        Framework::ComplexOnly => vec![0.0; bound.len()],
    };
    let delta: Vec<f64> = bound.iter().zip(&unbound).map(|(b, u)| b - u).collect();
    let affinity = -delta.iter().sum::<f64>();
    Ok(PredictionReport {
        affinity,
        per_atom_bound: bound,
        per_atom_unbound: unbound,
        per_atom_delta: delta,
    })
}

/// Builds graphs and frames, then predicts.
pub fn predict<F: Real>(pc: &PocketComplex, params: &ModelParams<F>, cfg: &ModelConfig) -> Result<PredictionReport> {
    predict_prepared(&PreparedComplex::new(pc.clone(), cfg)?, params, cfg)
}

/// Accumulates `d_affinity * d affinity / d params` into `grad`.
///
/// Frames and graphs are constants of the input, so only the encoders and
/// head receive gradient.
pub fn predict_backward(
    prep: &PreparedComplex,
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    d_affinity: f64,
    grad: &mut ModelParams<f64>,
) -> Result<()> {
    for (role, fg) in prep.graphs(cfg.framework) {
        // affinity = sum(unbound) - sum(bound)
        let sign = if role == GraphRole::Complex { -1.0 } else { 1.0 };
        let d_energy = sign * d_affinity / fg.frame_count() as f64;
        let enc_idx = params.encoder_index(role);
        let encoder = &params.encoders[enc_idx];
        for relpos in &fg.relpos {
            let (h, trace) = encode_traced(&fg.graph, relpos, encoder, cfg)?;
            let pre = params.head.first.forward(&h);
            let dout = Array2::from_elem((h.nrows(), 1), d_energy);
            let dh = params.head.backward(&h, &pre, &dout, &mut grad.head);
            encode_backward(&trace, encoder, dh, &mut grad.encoders[enc_idx]);
        }
    }
    Ok(())
}

/// One row per complex atom (pocket atoms then ligand atoms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub index: usize,
    pub source: AtomSource,
    pub element: String,
    pub position: [f64; 3],
    pub e_unbound: f64,
    pub e_bound: f64,
    pub delta: f64,
}

pub fn export_attribution(report: &PredictionReport, pc: &PocketComplex) -> Result<Vec<AttributionRow>> {
    let n = pc.complex.len();
    if report.per_atom_delta.len() != n {
        return Err(Error::LengthMismatch(n, report.per_atom_delta.len()));
    }
    Ok(pc
        .complex
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| AttributionRow {
            index: i,
            source: a.source,
            element: a.element.clone(),
            position: a.position,
            e_unbound: report.per_atom_unbound[i],
            e_bound: report.per_atom_bound[i],
            delta: report.per_atom_delta[i],
        })
        .collect())
}

pub const ATTRIBUTION_HEADER: &str = "index,source,element,x,y,z,e_unbound,e_bound,delta";

pub fn attribution_csv(rows: &[AttributionRow]) -> String {
    let mut out = String::from(ATTRIBUTION_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.3},{:.3},{:.3},{},{},{}",
            r.index,
            r.source.as_str(),
            r.element,
            r.position[0],
            r.position[1],
            r.position[2],
            r.e_unbound,
            r.e_bound,
            r.delta
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// PDB of the complex with each atom's delta in the B-factor column.
pub fn attribution_pdb(rows: &[AttributionRow], pc: &PocketComplex) -> Result<String> {
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    write_pdb(&pc.complex.atoms, Some(&deltas))
}
