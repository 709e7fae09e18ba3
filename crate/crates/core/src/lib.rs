//! Perfect matchings in Dirac-type k-uniform hypergraphs.
//!
//! The crate computes maximum-entropy fractional perfect matchings, improves
//! them by shifting, runs the weight-guided random greedy matching process,
//! counts perfect matchings exactly at small sizes and evaluates the
//! bipartite-lift entropy lower bound.

pub mod bipartite;
pub mod combin;
pub mod counting;
pub mod entropy;
pub mod error;
pub mod greedy;
pub mod hypergraph;
pub mod io;
pub mod rng;
pub mod shifting;

pub use entropy::EdgeWeights;
pub use error::{Error, Result};
pub use hypergraph::{AlphaTable, DiracParams, Hypergraph};
