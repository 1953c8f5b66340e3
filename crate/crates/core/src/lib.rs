//! Bond percolation on lattice plots.
//!
//! The crate simulates the open cluster at the origin (equivalently the final
//! snapshot of a nearest-neighbour SIR epidemic with constant infectious
//! periods), samples the posterior of the bond probability `p` when only the
//! cluster's sites ([`inference::run_s1`]) or only its size
//! ([`inference::run_s2`]) are observed, and ranks inner-outer plot designs by
//! expected Kullback-Leibler information gain ([`design`]).

pub mod cluster_graph;
pub mod design;
pub mod error;
pub mod inference;
pub mod lattice;
pub mod percolation;
pub mod rng;

pub use cluster_graph::{ClusterGraph, GraphStats};
pub use design::{BetaParams, Design, UtilityEstimate};
pub use error::{Error, Result};
pub use inference::{ChainConfig, ChainState, MixtureTable, PosteriorSample, PriorSpec, Scenario};
pub use lattice::{Edge, Plot, PlotKind, Site};
pub use percolation::{intensity_to_p, simulate_cluster, Simulation};

/// Critical bond probability of the square lattice.
pub const P_C_SQUARE: f64 = 0.5;
