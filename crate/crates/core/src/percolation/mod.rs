//! Forward simulation of bond percolation from the origin.

mod file;

pub use file::{parse_cluster, parse_metadata, write_cluster, write_metadata, ClusterFile};

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rustc_hash::FxHashSet;

use crate::cluster_graph::ClusterGraph;
use crate::error::{domain, Result};
use crate::lattice::{Edge, Plot, Site};

/// Site cap applied on unbounded plots when none is given.
pub const DEFAULT_UNBOUNDED_CAP: usize = 1_000_000;

/// Probability that an infectious site with constant lifetime `tau` infects a
/// given neighbour at rate `lambda`: `1 - exp(-lambda * tau)`.
pub fn intensity_to_p(lambda: f64, tau: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !(tau > 0.0) || !lambda.is_finite() || !tau.is_finite() {
        return domain(format!("need lambda >= 0 and tau > 0, got {lambda}, {tau}"));
    }
    Ok(-(-lambda * tau).exp_m1())
}

/// Outcome of one forward simulation.
#[derive(Clone, Debug)]
pub enum Simulation {
    Cluster(ClusterGraph),
    /// The exploration reached more than `cap` sites and was abandoned.
    Truncated { cap: usize },
}

impl Simulation {
    pub fn cluster(self) -> Option<ClusterGraph> {
        match self {
            Simulation::Cluster(g) => Some(g),
            Simulation::Truncated { .. } => None,
        }
    }
}

/// Simulates the open cluster of the origin on `plot` with bond probability `p`,
/// drawing from `crate::rng::stream(seed, 0)`.
pub fn simulate_cluster(plot: &Arc<Plot>, p: f64, seed: u64, cap: Option<usize>) -> Result<Simulation> {
    simulate_with_rng(plot, p, &mut crate::rng::stream(seed, 0), cap)
}

/// Breadth-first exploration from the origin. Every plot edge incident to a
/// dequeued site is decided exactly once, in the lattice neighbour order, by
/// whichever endpoint is expanded first.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    plot: &Arc<Plot>,
    p: f64,
    rng: &mut R,
    cap: Option<usize>,
) -> Result<Simulation> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p = {p} outside [0, 1]"));
    }
    let origin = Site::origin(plot.dim());
    plot.require_member(&origin)?;
    let cap = cap.or((!plot.is_finite()).then_some(DEFAULT_UNBOUNDED_CAP));

    let mut order = vec![origin];
    let mut seen: FxHashSet<Site> = FxHashSet::default();
    seen.insert(origin);
    let mut expanded: FxHashSet<Site> = FxHashSet::default();
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([origin]);
    while let Some(s) = queue.pop_front() {
        expanded.insert(s);
        for k in 0..2 * plot.dim() {
            let Some(t) = plot.neighbor(&s, k) else { continue };
            if expanded.contains(&t) {
                continue;
            }
            if rng.random::<f64>() < p {
                edges.push(Edge::new(s, t));
                if seen.insert(t) {
                    if cap.is_some_and(|c| order.len() >= c) {
                        return Ok(Simulation::Truncated { cap: cap.unwrap() });
                    }
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
    }
    ClusterGraph::from_edges_unchecked(plot.clone(), &order, &edges).map(Simulation::Cluster)
}
