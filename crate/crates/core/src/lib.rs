//! Protein–ligand binding affinity as an interatomic potential difference.
//!
//! A complex is cropped to its binding pocket, turned into three radius
//! graphs (bound complex, unbound pocket, unbound ligand), and each graph is
//! encoded by a message-passing network into per-atom energies. Energies are
//! averaged over PCA frames so the result is invariant to rigid motions, and
//! the affinity is the summed unbound energy minus the summed bound energy.
//!
//! Module map:
//!
//! - [`structio`]: PDB/SDF readers, pocket cropping, dataset manifests
//! - [`frames`]: PCA frames and frame averaging
//! - [`molgraph`]: radius graphs
//! - [`encoder`]: embeddings and message passing (forward and backward)
//! - [`head`]: per-atom energies, affinity prediction, attribution export
//! - [`losses`]: balanced MSE, approximate NDCG, rank loss
//! - [`trainer`]: AdamW, learning-rate schedule, training loop, checkpoints
//! - [`metrics`]: RMSE and Pearson correlation
//! - [`config`]: flat key-value configuration files

pub mod config;
pub mod encoder;
pub mod error;
pub mod frames;
pub mod head;
pub mod losses;
pub mod metrics;
pub mod molgraph;
pub mod nn;
pub mod structio;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
