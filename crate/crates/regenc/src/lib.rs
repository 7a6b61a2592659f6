//! Regression through learned target encodings.
//!
//! A regression target `y` in `R^m` is mapped by a differentiable target
//! encoder into a distribution over `k` classes, a classifier is trained
//! against that distribution, and a linear decoder maps predicted
//! distributions back into the target space. The crate implements the whole
//! family of training methods this enables — plain least squares, least
//! squares through a softmax layer, hard- and soft-binning classification,
//! unsupervised encoder pretraining, and fully joint end-to-end training —
//! plus the dataset handling, optimizer, and benchmark harness needed to
//! compare them.
//!
//! Layers, bottom to top:
//!
//! - [`tensor`]: dense f64 tensors and the shared numeric kernels.
//! - [`tape`]: define-by-run reverse-mode autodiff with gradient checking.
//! - [`rng`]: seeded, platform-independent randomness.
//! - [`nn`]: multilayer perceptrons (direct regressors or classifier logits).
//! - [`codec`]: target encoder/decoder pairs, binning, and pretraining.
//! - [`losses`]: squared error, KL, cross-entropy, entropy, and the weighted
//!   composite objective.
//! - [`optim`]: Adam with coupled L2 decay, gradient clipping, LR schedules.
//! - [`data`]: CSV ingestion, min-max scaling, splits, batching, synthetic
//!   generators.
//! - [`container`]: binary model serialization (round-trip exact).
//! - [`pipeline`]: the six training methods, evaluation, benchmark and sweep
//!   runners.
//!
//! Everything is deterministic given a seed: reruns of any fit, sweep, or
//! benchmark produce identical numbers regardless of parallelism.

pub mod codec;
pub mod container;
pub mod data;
pub mod error;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
