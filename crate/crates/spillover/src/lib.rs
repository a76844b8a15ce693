//! File formats, parallel drivers and pipeline commands around
//! `spillover-core`. The `spillover` binary is a thin layer over
//! [`pipeline`].

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod pipeline;
pub mod render;

pub use config::RunConfig;
pub use error::{Error, Result};
