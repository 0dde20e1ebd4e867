//! Salient-object segmentation as the principal eigenvector of a space-time
//! pixel graph, computed without building the graph.
//!
//! Power iteration on the affinity matrix of a video's pixels is rewritten
//! as a handful of separable 3D Gaussian filterings of the feature volumes
//! ([`engine`]). An explicit sparse-matrix implementation ([`oracle`]) is
//! kept alongside to certify the filtered version at small scale.
//!
//! | module | contents |
//! |---|---|
//! | [`volume`] | dense `f32` volumes, the `SFSV` container, PGM sequences |
//! | [`conv`] | separable Gaussian kernels, separable and direct filtering |
//! | [`engine`] | the convolutional iteration, normalization, binarization |
//! | [`oracle`] | sparse affinity matrices, power iteration, certification |
//! | [`synth`] | seeded toy videos with ground truth |
//! | [`metrics`] | angles, Jaccard, convergence tables |
//! | [`bench`] | runtime sweeps |
//! | [`cli`] | the `sfseg` command |

#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod conv;
pub mod engine;
mod error;
pub mod metrics;
pub mod oracle;
pub mod synth;
pub mod volume;

pub use conv::{KernelParams, SeparableKernel3D};
pub use engine::{run, RunInputs, RunOutput, SfsegConfig};
pub use error::{Error, Result};
pub use metrics::BinaryMask;
pub use volume::{FeatureSet, FeatureVolume, Role, VolumeShape};
