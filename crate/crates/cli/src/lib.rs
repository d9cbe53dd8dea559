//! Command-line pipeline stages and the live operator service.

pub mod commands;
pub mod config;
pub mod format;
pub mod plots;
#[cfg(feature = "serve")]
pub mod service;
pub mod wire;
