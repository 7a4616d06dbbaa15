//! Recurrent soft-attention action classification over convolutional feature
//! cubes.
//!
//! A multi-layer LSTM reads one frame per step. Its input is the expectation
//! of the frame's `K × K` feature slices under a location softmax computed
//! from the previous top hidden state. Gradients are written by hand (BPTT)
//! and checked against central finite differences.
//!
//! Module map:
//!
//! * [`tensor`], [`rng`], [`gradcheck`]: numeric primitives and verification
//! * [`model`]: parameters, forward pass, backward pass, baselines
//! * [`objective`]: cross-entropy, attention penalty, weight decay
//! * [`optim`]: the Adam optimizer
//! * [`data`]: cube files, manifests, block sampling, synthetic data
//! * [`pipeline`]: training, evaluation, glimpse re-optimization
//! * [`checkpoint`], [`viz`]: persisted models and attention heatmaps

mod codec;

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod objective;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod viz;

pub use error::{Error, FormatError, Result};
