//! Compacted de Bruijn graph construction for complete genomes.
//!
//! The graph is never built explicitly. Instead every k-mer position of the
//! input starts out as a junction candidate and two filtering passes remove
//! candidates that are provably not junctions: a cheap probabilistic pass over
//! a Bloom filter of (k+1)-mers, then an exact pass over a hash table holding
//! only the (k+1)-mers adjacent to the survivors. The k-mer universe can be
//! split into several rounds to bound the size of that table. The surviving
//! positions are then stitched into the compacted multigraph.
//!
//! [`pipeline::run`] is the end-to-end entry point; the individual stages are
//! public so they can be driven and tested on their own.

pub mod analysis;
pub mod edge_membership;
pub mod error;
pub mod graph_builder;
pub mod junction_filter;
pub mod kmer_model;
pub mod oracle;
pub mod partitioner;
pub mod pipeline;
pub mod sequence_io;

mod scan;

pub use error::{Error, Result};
pub use graph_builder::{CompactedGraph, JunctionIndex};
pub use junction_filter::{JunctionFilter, MarkArray};
pub use kmer_model::{Mer, Strand, StrandMode};
pub use pipeline::{run, RunConfig, RunOutput};
pub use sequence_io::{parse_fasta, SequenceRecord, SequenceSet};
