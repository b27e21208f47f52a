//! Smile genuineness assessment from facial action-unit intensity time series.
//!
//! The pipeline ingests per-frame AU intensity signals (OpenFace-compatible
//! CSV), derives sliding-window regression dynamics, segments the smile into
//! onset/apex/offset phases, assembles three handcrafted feature families
//! (frame-wise, AU-wise, cross-AU), and classifies sequences as spontaneous
//! or posed with from-scratch LSTM / dense models plus a late-fusion head.
//! An evaluation harness provides synthetic data generation, subject-disjoint
//! k-fold cross-validation, and timing benchmarks.

pub mod config;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod phase;
pub mod series;
pub mod util;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use series::TimeSeries;
