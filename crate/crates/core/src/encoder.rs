//! Atom and edge embeddings followed by residual message-passing layers.
//!
//! Per layer, a filter `f_ij = swish(MLP([e_ij; h_i; h_j]))` gates the
//! neighbour states and `h_i += MLP(sum_j h_j * f_ij)`. Edge features
//! `e_ij = swish(MLP([rbf(d_ij); r_ij]))` are computed once and reused by
//! every layer.
//!
//! Forward passes are generic over [`Real`]; [`encode_traced`] records what
//! [`encode_backward`] needs to produce parameter gradients.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameMode;
use crate::molgraph::AtomGraph;
use crate::nn::{swish, swish_grad, Mlp, Real};
use crate::structio::MAX_ATOMIC_NUMBER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderSharing {
    /// One encoder for the complex, pocket and ligand graphs.
    Shared,
    /// Independent encoders for complex, pocket and ligand (in that order).
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Framework {
    /// Affinity is unbound energy minus bound energy.
    Difference,
    /// Affinity is the negated bound energy alone.
    ComplexOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub rbf_count: usize,
    /// Å.
    pub rbf_cutoff: f64,
    /// Radius-graph cutoff, Å.
    pub graph_cutoff: f64,
    pub pocket_residues: usize,
    pub frame_mode: FrameMode,
    pub encoder_sharing: EncoderSharing,
    pub framework: Framework,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 128,
            num_layers: 4,
            rbf_count: 32,
            rbf_cutoff: 5.0,
            graph_cutoff: 5.0,
            pocket_residues: 50,
            frame_mode: FrameMode::SE3,
            encoder_sharing: EncoderSharing::Shared,
            framework: Framework::Difference,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive");
        }
        if self.num_layers == 0 {
            return fail("num_layers must be at least 1");
        }
        if self.rbf_count < 2 {
            return fail("rbf_count must be at least 2");
        }
        if self.rbf_cutoff.is_nan() || self.rbf_cutoff <= 0.0 {
            return fail("rbf_cutoff must be positive");
        }
        if self.graph_cutoff.is_nan() || self.graph_cutoff <= 0.0 {
            return fail("graph_cutoff must be positive");
        }
        if self.pocket_residues == 0 {
            return fail("pocket_residues must be positive");
        }
        Ok(())
    }

    pub fn encoder_count(&self) -> usize {
        match self.encoder_sharing {
            EncoderSharing::Shared => 1,
            EncoderSharing::Separate => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct LayerParams<F> {
    /// `3d -> d -> d`; input rows are `[e_ij; h_i; h_j]`.
    pub filter: Mlp<F>,
    /// `d -> d -> d`.
    pub update: Mlp<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct EncoderParams<F> {
    /// Row `z` embeds atomic number `z`; row 0 is unused.
    pub embedding: Array2<F>,
    /// `K + 3 -> d -> d`.
    pub edge: Mlp<F>,
    pub layers: Vec<LayerParams<F>>,
}

impl<F: Real> EncoderParams<F> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_dim;
        EncoderParams {
            embedding: Array2::zeros((MAX_ATOMIC_NUMBER + 1, d)),
            edge: Mlp::zeros(cfg.rbf_count + 3, d, d),
            layers: (0..cfg.num_layers)
                .map(|_| LayerParams {
                    filter: Mlp::zeros(3 * d, d, d),
                    update: Mlp::zeros(d, d, d),
                })
                .collect(),
        }
    }

    pub fn init(rng: &mut impl Rng, cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_dim;
        let embedding = Array2::from_shape_simple_fn((MAX_ATOMIC_NUMBER + 1, d), || {
            let v: f64 = StandardNormal.sample(rng);
            F::of(v)
        });
        EncoderParams {
            embedding,
            edge: Mlp::init(rng, cfg.rbf_count + 3, d, d),
            layers: (0..cfg.num_layers)
                .map(|_| LayerParams {
                    filter: Mlp::init(rng, 3 * d, d, d),
                    update: Mlp::init(rng, d, d, d),
                })
                .collect(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            edge: self.edge.zeros_like(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    filter: l.filter.zeros_like(),
                    update: l.update.zeros_like(),
                })
                .collect(),
        }
    }

    pub fn cast<G: Real>(&self) -> EncoderParams<G> {
        EncoderParams {
            embedding: self.embedding.mapv(|v| G::of(v.to_f64())),
            edge: self.edge.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    filter: l.filter.cast(),
                    update: l.update.cast(),
                })
                .collect(),
        }
    }

    pub(crate) fn slices(&self) -> Vec<&[F]> {
        let mut v = vec![self.embedding.as_slice().expect("standard layout")];
        v.extend(self.edge.slices());
        for l in &self.layers {
            v.extend(l.filter.slices());
            v.extend(l.update.slices());
        }
        v
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [F]> {
        let mut v = vec![self.embedding.as_slice_mut().expect("standard layout")];
        v.extend(self.edge.slices_mut());
        for l in &mut self.layers {
            v.extend(l.filter.slices_mut());
            v.extend(l.update.slices_mut());
        }
        v
    }

    pub(crate) fn names(&self, prefix: &str) -> Vec<String> {
        let mut v = vec![format!("{prefix}.embedding")];
        v.extend(Mlp::<F>::names(&format!("{prefix}.edge")));
        for k in 0..self.layers.len() {
            v.extend(Mlp::<F>::names(&format!("{prefix}.layer{k}.filter")));
            v.extend(Mlp::<F>::names(&format!("{prefix}.layer{k}.update")));
        }
        v
    }
}

/// Initial node states: one embedding row per atom.
pub fn embed_nodes<F: Real>(atomic_numbers: &[u8], params: &EncoderParams<F>) -> Result<Array2<F>> {
    let d = params.hidden_dim();
    let mut h = Array2::zeros((atomic_numbers.len(), d));
    for (i, &z) in atomic_numbers.iter().enumerate() {
        let z = z as usize;
        if !(1..=MAX_ATOMIC_NUMBER).contains(&z) {
            return Err(Error::AtomicNumber(z));
        }
        h.row_mut(i).assign(&params.embedding.row(z));
    }
    Ok(h)
}

/// Gaussians `exp(-(d - mu_k)^2 / (2 gamma^2))` with centres evenly spaced
/// on `[0, cutoff]` and width equal to the centre spacing.
pub fn rbf_expand<F: Real>(distance: F, count: usize, cutoff: f64) -> Array1<F> {
    let mut out = Array1::zeros(count);
    rbf_into(distance, cutoff, out.as_slice_mut().expect("contiguous"));
    out
}

fn rbf_into<F: Real>(distance: F, cutoff: f64, out: &mut [F]) {
    let spacing = cutoff / (out.len() - 1) as f64;
    let denom = F::of(2.0 * spacing * spacing);
    for (k, o) in out.iter_mut().enumerate() {
        let diff = distance - F::of(k as f64 * spacing);
        *o = (-(diff * diff) / denom).exp();
    }
}

fn edge_inputs<F: Real>(graph: &AtomGraph, relpos: &[[f64; 3]], rbf_count: usize, rbf_cutoff: f64) -> Array2<F> {
    let width = rbf_count + 3;
    let mut x = Array2::zeros((graph.num_edges(), width));
    for (k, mut row) in x.rows_mut().into_iter().enumerate() {
        let row = row.as_slice_mut().expect("contiguous row");
        rbf_into(F::of(graph.edge_dist[k]), rbf_cutoff, &mut row[..rbf_count]);
        for c in 0..3 {
            row[rbf_count + c] = F::of(relpos[k][c]);
        }
    }
    x
}

struct EdgeTrace<F> {
    input: Array2<F>,
    pre: Array2<F>,
    /// MLP output before the outer swish.
    out: Array2<F>,
}

fn embed_edges_traced<F: Real>(
    graph: &AtomGraph,
    relpos: &[[f64; 3]],
    params: &EncoderParams<F>,
    cfg: &ModelConfig,
) -> (Array2<F>, EdgeTrace<F>) {
    let input = edge_inputs(graph, relpos, cfg.rbf_count, cfg.rbf_cutoff);
    let pre = params.edge.first.forward(&input);
    let out = params.edge.forward_from_pre(&pre);
    let e = out.mapv(swish);
    (e, EdgeTrace { input, pre, out })
}

/// Edge features from the graph's own unit relative positions.
pub fn embed_edges<F: Real>(graph: &AtomGraph, params: &EncoderParams<F>, cfg: &ModelConfig) -> Array2<F> {
    embed_edges_traced(graph, &graph.edge_relpos, params, cfg).0
}

struct LayerTrace<F> {
    h: Array2<F>,
    filter_pre: Array2<F>,
    filter_out: Array2<F>,
    filter: Array2<F>,
    aggregate: Array2<F>,
    update_pre: Array2<F>,
}

/// First-layer pre-activation of the filter MLP without materialising the
/// `[e; h_i; h_j]` concatenation: the weight is applied block-wise.
fn filter_pre<F: Real>(h: &Array2<F>, e: &Array2<F>, graph: &AtomGraph, filter: &Mlp<F>) -> Array2<F> {
    let d = h.ncols();
    let w = &filter.first.weight;
    let from_edge = e.dot(&w.slice(s![0..d, ..]));
    let from_centre = h.dot(&w.slice(s![d..2 * d, ..]));
    let from_neighbour = h.dot(&w.slice(s![2 * d..3 * d, ..]));
    let bias = filter.first.bias.as_slice().expect("contiguous");
    let mut pre = from_edge;
    for (k, &(i, j)) in graph.edges.iter().enumerate() {
        let row = pre.row_mut(k).into_slice().expect("contiguous row");
        let ci = from_centre.row(i);
        let nj = from_neighbour.row(j);
        for c in 0..row.len() {
            row[c] = row[c] + ci[c] + nj[c] + bias[c];
        }
    }
    pre
}

/// Edge indices grouped by centre, each group ordered by the neighbour's
/// offset vector rather than its index. Summing in this order makes the
/// aggregate bitwise independent of atom numbering.
fn canonical_edge_order(graph: &AtomGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.num_edges()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&graph.edge_relpos[a], &graph.edge_relpos[b]);
        graph.edges[a]
            .0
            .cmp(&graph.edges[b].0)
            .then_with(|| ra[0].total_cmp(&rb[0]))
            .then_with(|| ra[1].total_cmp(&rb[1]))
            .then_with(|| ra[2].total_cmp(&rb[2]))
            .then_with(|| graph.edges[a].1.cmp(&graph.edges[b].1))
    });
    order
}

fn message_pass_traced<F: Real>(
    h: &Array2<F>,
    e: &Array2<F>,
    graph: &AtomGraph,
    layer: &LayerParams<F>,
) -> (Array2<F>, LayerTrace<F>) {
    let pre = filter_pre(h, e, graph, &layer.filter);
    let filter_out = layer.filter.forward_from_pre(&pre);
    let filter = filter_out.mapv(swish);

    let mut aggregate = Array2::zeros(h.raw_dim());
    for k in canonical_edge_order(graph) {
        let (i, j) = graph.edges[k];
        let f = filter.row(k);
        let hj = h.row(j);
        let mut acc = aggregate.row_mut(i);
        for c in 0..f.len() {
            acc[c] += hj[c] * f[c];
        }
    }
    let update_pre = layer.update.first.forward(&aggregate);
    let update = layer.update.forward_from_pre(&update_pre);
    let out = h + &update;
    (
        out,
        LayerTrace {
            h: h.clone(),
            filter_pre: pre,
            filter_out,
            filter,
            aggregate,
            update_pre,
        },
    )
}

/// One residual message-passing layer.
pub fn message_pass<F: Real>(h: &Array2<F>, e: &Array2<F>, graph: &AtomGraph, layer: &LayerParams<F>) -> Array2<F> {
    message_pass_traced(h, e, graph, layer).0
}

/// Everything needed to backpropagate through one [`encode_traced`] call.
pub struct EncoderTrace<F> {
    atomic_numbers: Vec<u8>,
    edges: Vec<(usize, usize)>,
    edge: EdgeTrace<F>,
    e: Array2<F>,
    layers: Vec<LayerTrace<F>>,
}

/// Encodes with the graph's own relative positions.
pub fn encode<F: Real>(graph: &AtomGraph, params: &EncoderParams<F>, cfg: &ModelConfig) -> Result<Array2<F>> {
    encode_oriented(graph, &graph.edge_relpos, params, cfg)
}

/// Encodes with per-edge unit relative positions given in some frame.
pub fn encode_oriented<F: Real>(
    graph: &AtomGraph,
    relpos: &[[f64; 3]],
    params: &EncoderParams<F>,
    cfg: &ModelConfig,
) -> Result<Array2<F>> {
    let mut h = embed_nodes(&graph.atomic_numbers, params)?;
    let (e, _) = embed_edges_traced(graph, relpos, params, cfg);
    for layer in &params.layers {
        h = message_pass(&h, &e, graph, layer);
    }
    Ok(h)
}

pub fn encode_traced<F: Real>(
    graph: &AtomGraph,
    relpos: &[[f64; 3]],
    params: &EncoderParams<F>,
    cfg: &ModelConfig,
) -> Result<(Array2<F>, EncoderTrace<F>)> {
    let mut h = embed_nodes(&graph.atomic_numbers, params)?;
    let (e, edge) = embed_edges_traced(graph, relpos, params, cfg);
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (next, trace) = message_pass_traced(&h, &e, graph, layer);
        layers.push(trace);
        h = next;
    }
    Ok((
        h,
        EncoderTrace {
            atomic_numbers: graph.atomic_numbers.clone(),
            edges: graph.edges.clone(),
            edge,
            e,
            layers,
        },
    ))
}

fn scatter_rows<F: Real>(values: ArrayView2<F>, index: impl Iterator<Item = usize>, rows: usize) -> Array2<F> {
    let mut out = Array2::zeros((rows, values.ncols()));
    for (k, i) in index.enumerate() {
        let src = values.row(k);
        let mut dst = out.row_mut(i);
        for c in 0..src.len() {
            dst[c] += src[c];
        }
    }
    out
}

/// Accumulates into `grad` the gradient of a scalar whose derivative w.r.t.
/// the final node states is `dh`.
pub fn encode_backward<F: Real>(
    trace: &EncoderTrace<F>,
    params: &EncoderParams<F>,
    dh: Array2<F>,
    grad: &mut EncoderParams<F>,
) {
    let n = dh.nrows();
    let d = dh.ncols();
    let mut dh = dh;
    let mut de: Array2<F> = Array2::zeros(trace.e.raw_dim());

    for ((layer, lt), lg) in params
        .layers
        .iter()
        .zip(&trace.layers)
        .zip(grad.layers.iter_mut())
        .rev()
    {
        // Residual path keeps dh; the update path adds to it.
        let dagg = layer.update.backward(&lt.aggregate, &lt.update_pre, &dh, &mut lg.update);
        let mut dfilter = Array2::zeros(lt.filter.raw_dim());
        for (k, &(i, j)) in trace.edges.iter().enumerate() {
            let g = dagg.row(i);
            let f = lt.filter.row(k);
            let hj = lt.h.row(j);
            {
                let mut dhj = dh.row_mut(j);
                for c in 0..d {
                    dhj[c] += g[c] * f[c];
                }
            }
            let mut df = dfilter.row_mut(k);
            for c in 0..d {
                df[c] = g[c] * hj[c];
            }
        }
        dfilter.zip_mut_with(&lt.filter_out, |g, &z| *g *= swish_grad(z));
        let dpre = layer.filter.backward_from_pre(&lt.filter_pre, &dfilter, &mut lg.filter);

        let by_centre = scatter_rows(dpre.view(), trace.edges.iter().map(|e| e.0), n);
        let by_neighbour = scatter_rows(dpre.view(), trace.edges.iter().map(|e| e.1), n);
        let w = &layer.filter.first.weight;
        {
            let mut gw = lg.filter.first.weight.slice_mut(s![0..d, ..]);
            gw += &trace.e.t().dot(&dpre);
        }
        {
            let mut gw = lg.filter.first.weight.slice_mut(s![d..2 * d, ..]);
            gw += &lt.h.t().dot(&by_centre);
        }
        {
            let mut gw = lg.filter.first.weight.slice_mut(s![2 * d..3 * d, ..]);
            gw += &lt.h.t().dot(&by_neighbour);
        }
        de += &dpre.dot(&w.slice(s![0..d, ..]).t());
        dh += &by_centre.dot(&w.slice(s![d..2 * d, ..]).t());
        dh += &by_neighbour.dot(&w.slice(s![2 * d..3 * d, ..]).t());
    }

    let mut dout = de;
    dout.zip_mut_with(&trace.edge.out, |g, &z| *g *= swish_grad(z));
    params
        .edge
        .backward(&trace.edge.input, &trace.edge.pre, &dout, &mut grad.edge);

    for (i, &z) in trace.atomic_numbers.iter().enumerate() {
        let mut row = grad.embedding.row_mut(z as usize);
        row += &dh.row(i);
    }
}
