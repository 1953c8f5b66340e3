//! Monte Carlo estimates of a design's expected KL utility.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::{fit_beta, kl_posterior_vs_prior, Design};
use crate::cluster_graph::ClusterGraph;
use crate::error::{domain, Result};
use crate::inference::{run_s1_graph, ChainConfig, PriorSpec};
use crate::lattice::Plot;
use crate::percolation::simulate_with_rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtilityEstimate {
    /// Nats.
    pub mean: f64,
    /// Sample standard deviation over `sqrt(m)`; `None` for a single replicate.
    pub std_error: Option<f64>,
    pub m: usize,
    pub per_replicate: Vec<f64>,
}

impl UtilityEstimate {
    pub fn from_values(values: Vec<f64>) -> UtilityEstimate {
        let m = values.len();
        let mean = values.iter().sum::<f64>() / m as f64;
        let std_error = (m > 1).then(|| {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        });
        UtilityEstimate {
            mean,
            std_error,
            m,
            per_replicate: values,
        }
    }
}

/// KL utility of an observed cluster: an S1 chain under `prior`, a Beta fit
/// to its draws, and the divergence of the fit from `prior`.
pub fn cluster_utility(g: ClusterGraph, prior: PriorSpec, chain: &ChainConfig) -> Result<f64> {
    let sample = run_s1_graph(g, chain, prior)?;
    kl_posterior_vs_prior(fit_beta(&sample.draws)?, prior)
}

/// `(1/M) Σ u(d, p_i, y_i)` with `p_i` drawn from `sampling` and the utility
/// measured against `experimenter`. Replicate `i` draws from
/// `rng::stream(seed, i)`, so the estimate does not depend on the thread count.
pub fn expected_utility(
    d: Design,
    sampling: PriorSpec,
    experimenter: PriorSpec,
    m: usize,
    chain: &ChainConfig,
    seed: u64,
) -> Result<UtilityEstimate> {
    if m == 0 {
        return domain("at least one replicate is required");
    }
    chain.validate()?;
    experimenter.beta_shape()?;
    let plot = Arc::new(d.plot()?);
    plot.vertices()?;
    let values = (0..m as u64)
        .into_par_iter()
        .map(|i| replicate(&plot, sampling, experimenter, chain, seed, i))
        .collect::<Result<Vec<f64>>>()?;
    Ok(UtilityEstimate::from_values(values))
}

fn replicate(
    plot: &Arc<Plot>,
    sampling: PriorSpec,
    experimenter: PriorSpec,
    chain: &ChainConfig,
    seed: u64,
    i: u64,
) -> Result<f64> {
    let mut rng = crate::rng::stream(seed, i);
    let p = sampling.sample(&mut rng)?;
    let g = simulate_with_rng(plot, p, &mut rng, None)?
        .cluster()
        .expect("finite plots are never truncated");
    let cfg = ChainConfig { seed: rng.random(), ..*chain };
    cluster_utility(g, experimenter, &cfg)
}

/// Utility of `d` for a learner with a uniform prior when clusters are
/// generated at the known value `p_star`.
pub fn instructive_utility(d: Design, p_star: f64, m: usize, chain: &ChainConfig, seed: u64) -> Result<UtilityEstimate> {
    expected_utility(d, PriorSpec::PointMass(p_star), PriorSpec::Uniform, m, chain, seed)
}

/// Plain Monte Carlo estimate of the expected utility for an experimenter
/// whose prior both generates `p` and enters the divergence.
pub fn mc_expected_utility(d: Design, prior: PriorSpec, m: usize, chain: &ChainConfig, seed: u64) -> Result<UtilityEstimate> {
    expected_utility(d, prior, prior, m, chain, seed)
}
