//! Posterior sampling of the bond probability `p`.
//!
//! Two Metropolis-within-Gibbs samplers share the same Gibbs step: given the
//! current graph `G`, `p` is drawn from
//! `Beta(e_open + a, e_sat - e_open + w + b)` for a `Beta(a, b)` prior.
//! They differ in the graph move:
//!
//! * [`run_s1`] keeps the observed vertex set and toggles single edges;
//! * [`run_s2`] keeps only the cluster size `n` and swaps a vertex for a
//!   frontier site.
//!
//! Exact posteriors for small instances come from [`exact_posterior_s1`] and
//! [`exact_posterior_s2`], which enumerate every admissible graph.

mod exact;
mod mode;
mod s1;
mod s2;

pub use exact::{connected_sets, exact_posterior_s1, exact_posterior_s2, Component, MixtureTable, S1_EDGE_GUARD, S2_SIZE_GUARD};
pub use mode::{posterior_mode, ModeEstimate};
pub use s1::{run_s1, run_s1_graph, S1Sampler};
pub use s2::{acceptance_s2, initial_graph_s2, propose_vertex_swap, run_s2, S2Sampler, SwapCandidate, SwapProposal, SwapRejection};

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;

use crate::cluster_graph::{ClusterGraph, GraphStats};
use crate::error::{domain, Result};

pub(crate) const P_FLOOR: f64 = 1e-12;

pub(crate) fn clamp_p(p: f64) -> f64 {
    p.clamp(P_FLOOR, 1.0 - P_FLOOR)
}

/// Prior on `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[derive(Default)]
pub enum PriorSpec {
    #[default]
    Uniform,
    Beta { a: f64, b: f64 },
    /// All mass at one value. Usable as an instructor's belief for drawing
    /// `p`, but not as the experimenter's prior.
    PointMass(f64),
}


impl PriorSpec {
    /// `(a, b)` such that the prior is `Beta(a, b)`.
    pub fn beta_shape(&self) -> Result<(f64, f64)> {
        match *self {
            PriorSpec::Uniform => Ok((1.0, 1.0)),
            PriorSpec::Beta { a, b } if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => Ok((a, b)),
            PriorSpec::Beta { a, b } => domain(format!("invalid beta prior ({a}, {b})")),
            PriorSpec::PointMass(_) => domain("a point-mass prior has no density on (0,1)"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            PriorSpec::PointMass(p) if (0.0..=1.0).contains(&p) => Ok(p),
            PriorSpec::PointMass(p) => domain(format!("point mass at {p} outside [0,1]")),
            _ => {
                let (a, b) = self.beta_shape()?;
                Ok(Beta::new(a, b).expect("validated shape").sample(rng))
            }
        }
    }

    /// Log density on (0,1); `None` for a point mass.
    pub fn ln_pdf(&self, p: f64) -> Option<f64> {
        let (a, b) = self.beta_shape().ok()?;
        let p = clamp_p(p);
        Some((a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p() - crate::design::ln_beta(a, b))
    }
}

/// Observation scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// All sites of the cluster are observed.
    S1,
    /// Only the number of sites is observed.
    S2,
}

/// Starting graph of a chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum InitialGraph {
    /// S1: the fully saturated cluster. S2: a straight line of `n` sites along
    /// the first axis from the origin, or a breadth-first fill if the line
    /// leaves the plot.
    #[default]
    Standard,
    /// An overdispersed alternative. S1: a breadth-first spanning tree of the
    /// cluster. S2: the breadth-first ball of `n` sites around the origin.
    Compact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    /// Number of Gibbs + Metropolis-Hastings pairs.
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub initial: InitialGraph,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 200_000,
            burn_in: 20_000,
            thin: 10,
            seed: 0,
            initial: InitialGraph::Standard,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thin == 0 {
            return domain("iterations and thin must be positive");
        }
        if self.burn_in >= self.iterations {
            return domain(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            ));
        }
        Ok(())
    }

    /// Number of draws a run will keep.
    pub fn kept(&self) -> u64 {
        (self.iterations - self.burn_in) / self.thin
    }

    fn keeps(&self, t: u64) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1).is_multiple_of(self.thin)
    }
}

/// Joint state `(p, G)` of a chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub p: f64,
    pub graph: ClusterGraph,
    pub scenario: Scenario,
    pub step: u64,
}

/// `(e_open + 1, e_sat - e_open + w + 1)`: the Gibbs conditional of `p` under
/// a uniform prior.
pub fn gibbs_beta_params(g: &ClusterGraph) -> (f64, f64) {
    conditional_shape(g.stats(), (1.0, 1.0))
}

pub(crate) fn conditional_shape(st: GraphStats, (a, b): (f64, f64)) -> (f64, f64) {
    (st.e_open as f64 + a, st.closed() as f64 + b)
}

pub(crate) fn gibbs_draw<R: Rng + ?Sized>(st: GraphStats, prior: (f64, f64), rng: &mut R) -> f64 {
    let (a, b) = conditional_shape(st, prior);
    clamp_p(Beta::new(a, b).expect("positive shape").sample(rng))
}

/// Thinned output of a chain.
#[derive(Clone, Debug, Serialize)]
pub struct PosteriorSample {
    pub scenario: Scenario,
    pub config: ChainConfig,
    pub prior: PriorSpec,
    /// Completed iteration count at each kept draw.
    pub steps: Vec<u64>,
    pub draws: Vec<f64>,
    pub trace: Vec<GraphStats>,
    /// Fraction of graph moves accepted over the whole run.
    pub acceptance_rate: f64,
}

/// Posterior summary written next to the sample CSV.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub draws: usize,
    pub mean: f64,
    pub mode: Option<f64>,
    pub mode_at_boundary: Option<bool>,
    pub ci95: (f64, f64),
    pub acceptance_rate: f64,
    pub seed: u64,
    pub config: ChainConfig,
    pub prior: PriorSpec,
}

impl PosteriorSample {
    fn new(scenario: Scenario, config: ChainConfig, prior: PriorSpec) -> PosteriorSample {
        let cap = config.kept() as usize;
        PosteriorSample {
            scenario,
            config,
            prior,
            steps: Vec::with_capacity(cap),
            draws: Vec::with_capacity(cap),
            trace: Vec::with_capacity(cap),
            acceptance_rate: 0.0,
        }
    }

    fn record(&mut self, step: u64, p: f64, st: GraphStats) {
        self.steps.push(step);
        self.draws.push(p);
        self.trace.push(st);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len() as f64
    }

    /// Empirical quantile by linear interpolation of the sorted draws.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut v = self.draws.clone();
        v.sort_by(f64::total_cmp);
        quantile_sorted(&v, q)
    }

    pub fn summary(&self) -> Summary {
        let mode = posterior_mode(&self.draws).ok();
        Summary {
            scenario: self.scenario,
            draws: self.len(),
            mean: self.mean(),
            mode: mode.map(|m| m.mode),
            mode_at_boundary: mode.map(|m| m.at_boundary),
            ci95: (self.quantile(0.025), self.quantile(0.975)),
            acceptance_rate: self.acceptance_rate,
            seed: self.config.seed,
            config: self.config,
            prior: self.prior,
        }
    }

    /// CSV with header `step,p,e_open,e_sat,w`, preceded by `header` as `#` comments.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut out = String::with_capacity(32 * self.len() + 64);
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("step,p,e_open,e_sat,w\n");
        for ((s, p), st) in self.steps.iter().zip(&self.draws).zip(&self.trace) {
            let _ = writeln!(out, "{s},{p:.10},{},{},{}", st.e_open, st.e_sat, st.w);
        }
        out
    }
}

pub(crate) fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let x = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = x.floor() as usize;
    let hi = x.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (x - lo as f64)
}

/// Empirical CDF distance `sup |F_n - F|` of `draws` against `cdf`.
pub fn ks_distance(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Plot, Site};
    use std::sync::Arc;

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    #[test]
    fn gibbs_parameters() {
        let z2 = Arc::new(Plot::full(2).unwrap());
        let g = ClusterGraph::saturated(z2.clone(), &[Site::origin(2)]).unwrap();
        assert_eq!(gibbs_beta_params(&g), (1.0, 5.0));
        let g = ClusterGraph::saturated(z2.clone(), &[s(&[0, 0]), s(&[1, 0])]).unwrap();
        assert_eq!(gibbs_beta_params(&g), (2.0, 7.0));
        let block = [s(&[0, 0]), s(&[1, 0]), s(&[0, 1]), s(&[1, 1])];
        let g = ClusterGraph::saturated(z2, &block).unwrap();
        assert_eq!(gibbs_beta_params(&g), (5.0, 9.0));
        assert_eq!(conditional_shape(g.stats(), (2.0, 3.0)), (6.0, 11.0));
    }

    #[test]
    fn config_validation_and_draw_count() {
        let cfg = ChainConfig { iterations: 1000, burn_in: 100, thin: 7, ..Default::default() };
        cfg.validate().unwrap();
        assert_eq!(cfg.kept(), 128);
        assert_eq!((0..1000).filter(|&t| cfg.keeps(t)).count(), 128);
        assert!(ChainConfig { burn_in: 1000, iterations: 1000, ..cfg }.validate().is_err());
        assert!(ChainConfig { thin: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn prior_shapes() {
        assert_eq!(PriorSpec::Uniform.beta_shape().unwrap(), (1.0, 1.0));
        assert!(PriorSpec::PointMass(0.9).beta_shape().is_err());
        assert!(PriorSpec::Beta { a: -1.0, b: 1.0 }.beta_shape().is_err());
        assert!((PriorSpec::Uniform.ln_pdf(0.3).unwrap()).abs() < 1e-12);
        let mut rng = crate::rng::stream(0, 0);
        assert_eq!(PriorSpec::PointMass(0.9).sample(&mut rng).unwrap(), 0.9);
    }

    #[test]
    fn ks_distance_of_uniform_grid_is_small() {
        let draws: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&draws, |x| x) <= 0.0005 + 1e-12);
        assert!((ks_distance(&draws, |x| x * x) - 0.25).abs() < 1e-2);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&v, 0.5), 1.5);
        assert_eq!(quantile_sorted(&v, 1.0), 3.0);
    }
}
