//! Headless runner and HTTP service for featlab sessions.

pub mod api;
pub mod config;
pub mod run;

pub use config::SessionConfig;
