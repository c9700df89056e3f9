//! Clique factors in pseudorandom graphs, at desk scale.
//!
//! The crate implements the constructive machinery behind absorption-based
//! K_r-factor arguments: diamond trees and orchards, r-uniform hypergraph
//! fractional matchings, bipartite templates and absorbing structures, and a
//! four-phase end-to-end factor finder, together with spectral and
//! discrepancy audits of the host graph's pseudorandomness.

pub mod absorber;
pub mod cliques;
pub mod diamond;
pub mod fracmatch;
pub mod graph;
pub mod orchard;
pub mod pipeline;
pub mod shrinkable;
