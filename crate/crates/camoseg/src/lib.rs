//! Files, HTTP providers, configuration and the benchmark harness around
//! `camoseg-core`.
//!
//! - [`io`] and [`flo`]: image sequences, masks, dataset layout, `.flo` files
//! - [`wire`], [`client`], [`mock_server`], [`conformance`]: the provider
//!   HTTP protocol from both ends
//! - [`config`] and [`providers`]: layered run configuration and presets
//! - [`bench`] and [`report`]: threshold sweeps over a dataset and their
//!   reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bench;
pub mod client;
pub mod config;
pub mod conformance;
pub mod error;
pub mod flo;
pub mod io;
pub mod mock_server;
pub mod providers;
pub mod report;
pub mod wire;

pub use error::{Error, Result};
