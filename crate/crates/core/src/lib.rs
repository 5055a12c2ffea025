//! Burst-level fusion of MPI execution traces.
//!
//! Merges N executions of the same MPI application, each instrumented with a
//! different hardware-counter set, into one enriched dataset: Paraver-style
//! trace ingestion, two-stage MPI-aware burst matching, column-merging trace
//! fusion, matching-quality validation, and a seeded synthetic-trace
//! generator for ground-truth testing.

pub mod config;
pub mod emit;
mod error;
pub mod extract;
pub mod fusion;
pub mod matchset;
pub mod model;
pub mod pcf;
pub mod pipeline;
pub mod prv;
pub mod stage1;
pub mod stage2;
pub mod synth;
pub mod table;
pub mod validation;

pub use error::{Error, Result};
