//! Discrete-time quantum walks on graphs and the statistics of their
//! extreme events, with classical random walks as the baseline.

pub mod cdyn;
pub mod error;
pub mod graphs;
pub mod io;
pub mod operators;
pub mod qdyn;
pub mod series;
pub mod spectral;
pub mod xstats;

pub use error::{Error, Result};
