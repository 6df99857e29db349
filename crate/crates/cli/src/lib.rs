//! Pipeline driver for the `qpbec` library: validated JSON configuration,
//! cached stage datasets and the acceptance checks applied to them.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! spectrum/            modes.csv, spectrum.json, modes.bin, manifest.json
//! hopping/g-1/         tensors.csv, tensors.bin, manifest.json
//! dimer/g-1/           families.csv, fixed_points.json, couplings.json,
//!                      portrait-N2.csv, orbits-N2.csv, manifest.json
//! gpe/run-<tag>/       scalars.csv, run.json, snap-00000.{bin,json}, ...,
//!                      current.bin, manifest.json [, TRUNCATED]
//! summary.json
//! ```

// `!(x > 0.0)` is how parameters reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;
pub mod summary;

pub use config::RunConfig;
pub use error::CliError;
pub use stages::{Runner, Stage};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/datasets.md")]
mod guide {}
