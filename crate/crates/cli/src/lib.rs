//! Command-line and HTTP front ends for `duotouch-core`.

pub mod api;
pub mod server;
