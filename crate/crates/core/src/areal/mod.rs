//! Models on discrete index sets: neighbourhood graphs, Besag and BYM2
//! precisions, temporal components and Kronecker space-time products.

mod besag;
mod graph;
mod temporal;

pub use besag::{besag_precision, besag_structure, bym2_precision, scale_besag, Bym2, EdgeWeights, ScaleReport, BYM2_MAX_WEIGHT};
pub use graph::{parse_graph, AdjacencyGraph, IndexBase};
pub use temporal::{kronecker_precision, temporal_precision, TemporalKind, TemporalModel};
