//! Maximum-entropy ensembles of directed integer-weighted graphs that
//! preserve degree, strength and reciprocity sequences.

pub mod analysis;
pub mod coreperiphery;
pub mod ensembles;
pub mod error;
pub mod graph;
pub mod io;
pub mod motifs;
pub mod sampler;

pub use ensembles::{ModelKind, NodeConstraintSet, ParamSet};
pub use error::{Error, Result};
pub use graph::{dyad_decompose, global_stats, node_stats, WeightedDigraph};
