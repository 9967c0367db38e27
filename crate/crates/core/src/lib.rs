//! Junction-tree construction by local transformations of cluster graphs.
//!
//! A [`ClusterGraph`] starts as one cluster per family of a
//! [`BeliefNetwork`]. The [`transforms`] rewrite it while keeping the family
//! and path properties; the [`algorithms`] compose them into complete
//! constructions, and [`incremental`] keeps a tree up to date under edits.

pub mod algorithms;
pub mod bench;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod incremental;
pub mod io;
pub mod network;
pub mod session;
pub mod trace;
pub mod transforms;
pub mod util;
pub mod verify;

pub use algorithms::{run_preset, AlgorithmPreset, PresetName, Report};
pub use error::{Error, Result};
pub use graph::{build_initial_cluster_graph, Cluster, ClusterGraph, ClusterId};
pub use incremental::EditSession;
pub use network::{BeliefNetwork, Cost, VarId, VarSet};
pub use trace::{Operation, TraceEvent};
