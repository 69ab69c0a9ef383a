//! Massive-MIMO channel synthesis and uncertainty-aware position regression.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`scene`] evaluates a multipath uniform-planar-array channel model over
//!   a parametric 2-D deployment (blocking screen, single-bounce reflectors)
//!   and emits labeled CSI datasets.
//! - [`dataset`] handles feature/target normalization and deterministic
//!   train/val/test splits, including a spatial holdout region.
//! - [`net`] is a small f64 feedforward engine: dense layers, ReLU, inverted
//!   dropout, reverse-mode gradients, Adam, gradient clipping, early stopping.
//! - [`mdn`] is the Gaussian-mixture output head and its negative
//!   log-likelihood loss.
//! - [`uncertainty`] turns trained models into position estimates with a
//!   data/model variance decomposition, via test-time dropout sampling or
//!   deep ensembles.
//! - [`metrics`] scores accuracy (RMSE) and uncertainty quality
//!   (confidence/oracle sparsification curves, AUCO, spatial heatmaps).
//! - [`io`] holds the plain-text and binary file formats shared with the
//!   command-line tools.
//!
//! All computation is 64-bit and deterministic: every random consumer draws
//! its seed from one master seed through [`seed::derive_seed`].

pub mod dataset;
pub mod io;
pub mod mdn;
pub mod metrics;
pub mod net;
pub mod scene;
pub mod seed;
pub mod uncertainty;

pub use dataset::{NormalizationState, SplitSpec};
pub use mdn::{MdnHead, MdnOutput, MdnPrediction};
pub use net::{MlpConfig, ModelParams, TrainConfig};
pub use scene::{CsiSample, PathSet, SceneSpec};
pub use uncertainty::{EnsembleHandle, Method, Model, PositionEstimate};
