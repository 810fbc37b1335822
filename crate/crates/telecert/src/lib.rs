//! File formats, thread pool and command line around `telecert-core`.

pub mod cli;
pub mod io;
pub mod parallel;
pub mod report;

pub use parallel::Rayon;
