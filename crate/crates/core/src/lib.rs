//! Dense-prediction convolutional network engine for building extraction.
//!
//! The pipeline: synthetic overhead scenes ([`datapipe`]) are labeled with
//! signed distances to building boundaries ([`labels`]), a staged ConvNet
//! with multi-stage feature fusion ([`netgraph`]) regresses those distances
//! as 128-way per-pixel classifications, trained by momentum SGD
//! ([`trainer`]), and predictions are decoded by probability-weighted
//! expectation and scored pixel- and building-wise ([`evaluation`]).
//!
//! Everything runs on plain dense tensors ([`tensor`]) with hand-composed
//! forward/backward primitives ([`ops`], [`upsample`]); there is no autodiff
//! tape. 64-bit elements are the reference precision; 32-bit is available
//! for faster training.

pub mod check;
pub mod datapipe;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod labels;
pub mod netgraph;
pub mod ops;
pub mod tensor;
pub mod trainer;
pub mod upsample;

pub use error::{Error, Result};
pub use grid::Grid;
pub use tensor::{ConvParams, Element, Padding, Tensor};
