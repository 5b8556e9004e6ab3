//! # bcpnn
//!
//! A feedforward Bayesian Confidence Propagation Neural Network (BCPNN) for
//! unsupervised learning of hidden representations, together with the
//! machinery needed to evaluate what it learns:
//!
//! - [`model`] — the modular hypercolumn network: probabilistic activity
//!   inference, incremental Hebbian-Bayesian trace learning, and log-odds
//!   weights derived from the traces
//! - [`plasticity`] — structural plasticity: mutual-information scoring of
//!   input-to-hidden connections and the flip operation that rewires the
//!   sparse connectivity mask
//! - [`train`] — the unsupervised training loop (per-sample incremental
//!   updates, seeded shuffling, flip scheduling)
//! - [`data`] — IDX dataset ingestion (MNIST layout, optionally gzipped),
//!   probability coding of pixels, and synthetic mixture datasets
//! - [`probe`] — a linear softmax classifier trained with Adam on frozen
//!   hidden representations; the evaluation instrument for all models
//! - [`rbm`] — a Bernoulli-Bernoulli RBM trained with CD-1 as a baseline
//! - [`viz`] — receptive-field image export, weight histograms, cluster
//!   purity
//! - [`checkpoint`] — a self-describing binary container for models and
//!   probes (byte layout documented in `docs/checkpoint-format.md`)
//! - [`report`] — per-run JSON/CSV result records
//!
//! Activities, traces, weights, and biases are `f64` throughout the network;
//! datasets and extracted representations are stored as `f32`.

// Strict-positivity guards are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Numeric kernels index into offset slices; the explicit form mirrors the
// documented memory layout.
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod layer;
pub mod mask;
mod math;
pub mod model;
pub mod plasticity;
pub mod probe;
pub mod rbm;
pub mod report;
pub mod train;
pub mod viz;

pub use checkpoint::{Checkpoint, RunBundle, TrainedModel};
pub use data::{
    encode, encode_into, load_idx, synth_mixture, write_idx, EncodedSample, LabeledDataset, Split,
};
pub use error::{Error, Result};
pub use layer::{LayerSpec, ModularLayer};
pub use mask::ConnectivityMask;
pub use model::{BcpnnConfig, BcpnnModel, ModelParts, TRACE_FLOOR};
pub use plasticity::{Flip, ScoreMatrix, StructuralPlasticityConfig};
pub use probe::{FeatureExtractor, LinearProbe, ProbeHyperparams, Representations};
pub use rbm::{RbmConfig, RbmModel};
pub use report::RunReport;
pub use train::{train_unsupervised, FlipSchedule, TrainOptions, TrainStats};
