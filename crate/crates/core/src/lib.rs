//! Event logic graph construction and script event prediction.
//!
//! This crate holds the algorithmic core: event extraction from dependency
//! parses, co-occurrence statistics and pair features, sequential relation
//! classifiers, rule-based causality extraction, embedding-driven event
//! generalization, the graph itself and the narrative cloze scorers.
//!
//! It is `no_std` and only needs `alloc`. Everything that touches the file
//! system, the network or the command line lives in the `elg` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod causality;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod events;
pub mod graph;
pub mod math;
pub mod pairstats;
pub mod predict;
pub mod seqrel;

pub use error::{Error, Result};
pub use events::{EventKey, EventOccurrence, EventTuple};
pub use graph::{ElgGraph, EventNode, NodeId, Relation, TypedEdge};
