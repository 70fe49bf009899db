//! Transfer-learning classification over frozen embeddings.
//!
//! A backbone (here a deterministic built-in extractor, or vectors exported
//! from a real network) turns each image into a fixed-length embedding. Only
//! the final classifier is trained: a softmax layer, a one-vs-rest linear SVM,
//! or k-nearest-neighbours. Around that sit a stratified split harness, a
//! confusion-matrix evaluator, and a sweep runner over split x head grids.
//!
//! ```no_run
//! use bottleneck::dataset::standard_splits;
//! use bottleneck::eval::run_sweep;
//! use bottleneck::fixtures::BlobSpec;
//! use bottleneck::heads::{HeadKind, TrainingConfig};
//!
//! let (manifest, embeddings) = BlobSpec::default().generate();
//! let report = run_sweep(
//!     &manifest,
//!     &embeddings,
//!     &standard_splits(42),
//!     &HeadKind::ALL,
//!     &TrainingConfig::default().with_seed(42),
//! )
//! .unwrap();
//! print!("{}", report.render_grid());
//! ```

pub mod cli;
pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod fixtures;
pub mod heads;
mod io;
pub mod rng;
