//! Resilient dynamic rooted trees in a simulated faulty RAM.

pub mod black_forest;
pub mod faulty_ram;
pub mod harness;
pub mod oracle;
pub mod replication;
pub mod resilient_queries;
pub mod resilient_tree;
pub mod static_la;

/// Index of a tree vertex in insertion order. The root is 0.
pub type VertexId = usize;
