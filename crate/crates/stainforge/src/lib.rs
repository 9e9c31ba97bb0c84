//! File formats, batch processing and the command-line front end for
//! [`stainforge_core`].
//!
//! * [`png`]: 8-bit RGB PNG decode/encode.
//! * [`profile_file`]: versioned text format for template profiles.
//! * [`odim`]: binary dump of optical-density images.
//! * [`config`]: `key=value` run configuration.
//! * [`batch`]: parallel normalization with per-image reports.
//! * [`dataset`]: dataset scanning and split manifests.
//! * [`evaluate`]: prediction CSV input and metric reports.
//! * [`cli`]: the `stainforge` command.

pub mod batch;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod kv;
pub mod odim;
pub mod png;
pub mod profile_file;

pub use error::{exit, Error, Result};
