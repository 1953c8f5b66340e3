//! Sampler for the observed-sites scenario: single-edge insert/delete moves on
//! a fixed vertex set.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use super::{gibbs_draw, ChainConfig, ChainState, InitialGraph, PosteriorSample, PriorSpec, Scenario};
use crate::cluster_graph::{ClusterGraph, Scratch, NONE};
use crate::error::{domain, Result};
use crate::lattice::{Edge, Plot, Site};

pub struct S1Sampler {
    pub state: ChainState,
    prior: (f64, f64),
    /// Saturated edges as `(vertex index, direction)`; the vertex set never
    /// changes so indices stay valid.
    edges: Vec<(u32, usize)>,
    scratch: Scratch,
}

impl S1Sampler {
    pub fn new(graph: ClusterGraph, prior: PriorSpec) -> Result<S1Sampler> {
        let prior = prior.beta_shape()?;
        if !graph.is_connected() {
            return domain("initial graph is disconnected");
        }
        let edges = graph
            .saturated_edges()
            .iter()
            .map(|e| graph.locate(e).expect("saturated edge"))
            .collect();
        Ok(S1Sampler {
            state: ChainState {
                p: 0.5,
                graph,
                scenario: Scenario::S1,
                step: 0,
            },
            prior,
            edges,
            scratch: Scratch::default(),
        })
    }

    pub fn gibbs_step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state.p = gibbs_draw(self.state.graph.stats(), self.prior, rng);
    }

    /// One Metropolis-Hastings edge move at the current `p`. Picks an edge of
    /// the saturation uniformly; an open edge is removed with probability
    /// `min(1, (1-p)/p)` if that keeps the graph connected, a closed edge is
    /// added with probability `min(1, p/(1-p))`. Returns whether it moved.
    pub fn mh_edge_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.edges.is_empty() {
            // single vertex: nothing to propose, keep the random stream aligned
            let _: f64 = rng.random();
            let _: f64 = rng.random();
            return false;
        }
        let (a, k) = self.edges[rng.random_range(0..self.edges.len())];
        let u: f64 = rng.random();
        let p = self.state.p;
        let g = &mut self.state.graph;
        let open = g.open_mask(a) & (1 << k) != 0;
        let accept = if open {
            u <= (1.0 - p) / p && g.survives_removal(a, k, &mut self.scratch)
        } else {
            u <= p / (1.0 - p)
        };
        if accept {
            g.set_open(a, k, !open);
        }
        accept
    }

    /// Runs one Gibbs + Metropolis-Hastings pair.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        self.gibbs_step(rng);
        let moved = self.mh_edge_step(rng);
        self.state.step += 1;
        moved
    }

    pub fn run<R: Rng + ?Sized>(&mut self, cfg: &ChainConfig, prior: PriorSpec, rng: &mut R) -> Result<PosteriorSample> {
        cfg.validate()?;
        let mut out = PosteriorSample::new(Scenario::S1, *cfg, prior);
        let mut accepted = 0u64;
        for t in 0..cfg.iterations {
            accepted += self.step(rng) as u64;
            if cfg.keeps(t) {
                out.record(t + 1, self.state.p, self.state.graph.stats());
            }
        }
        out.acceptance_rate = accepted as f64 / cfg.iterations as f64;
        Ok(out)
    }
}

/// Posterior sample of `p` given the observed cluster sites.
pub fn run_s1(cluster_sites: &[Site], plot: &Arc<Plot>, cfg: &ChainConfig, prior: PriorSpec) -> Result<PosteriorSample> {
    let g = ClusterGraph::saturated(plot.clone(), cluster_sites)?;
    run_s1_graph(g, cfg, prior)
}

/// As [`run_s1`] starting from the vertex set of `g` (its edges are ignored;
/// the start follows `cfg.initial`). Draws from `rng::stream(cfg.seed, 0)`.
pub fn run_s1_graph(g: ClusterGraph, cfg: &ChainConfig, prior: PriorSpec) -> Result<PosteriorSample> {
    let start = match cfg.initial {
        InitialGraph::Standard => ClusterGraph::saturated(g.plot().clone(), g.sites())?,
        InitialGraph::Compact => spanning_tree(&ClusterGraph::saturated(g.plot().clone(), g.sites())?)?,
    };
    let mut rng = crate::rng::stream(cfg.seed, 0);
    S1Sampler::new(start, prior)?.run(cfg, prior, &mut rng)
}

/// Breadth-first spanning tree of a saturated graph.
fn spanning_tree(g: &ClusterGraph) -> Result<ClusterGraph> {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut queue = VecDeque::from([0u32]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for k in 0..2 * g.plot().dim() {
            let y = g.neighbor_index(x, k);
            if y != NONE && !seen[y as usize] {
                seen[y as usize] = true;
                edges.push(Edge::new(g.sites()[x as usize], g.sites()[y as usize]));
                queue.push_back(y);
            }
        }
    }
    ClusterGraph::from_edges(g.plot().clone(), g.sites(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::ks_distance;
    use statrs::function::beta::beta_reg;

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    fn z2() -> Arc<Plot> {
        Arc::new(Plot::full(2).unwrap())
    }

    fn quick(seed: u64) -> ChainConfig {
        ChainConfig { iterations: 60_000, burn_in: 1_000, thin: 5, seed, initial: InitialGraph::Standard }
    }

    #[test]
    fn two_site_posterior_is_beta_2_7() {
        let out = run_s1(&[s(&[0, 0]), s(&[1, 0])], &z2(), &quick(1), PriorSpec::Uniform).unwrap();
        assert_eq!(out.len(), 11_800);
        assert!(out.trace.iter().all(|st| st.e_open == 1));
        assert!((out.mean() - 2.0 / 9.0).abs() < 0.01);
        assert!(ks_distance(&out.draws, |x| beta_reg(2.0, 7.0, x)) < 0.02);
    }

    #[test]
    fn single_site_posterior_is_beta_1_5() {
        let out = run_s1(&[Site::origin(2)], &z2(), &quick(2), PriorSpec::Uniform).unwrap();
        assert!((out.mean() - 1.0 / 6.0).abs() < 0.01);
        assert_eq!(out.acceptance_rate, 0.0);
    }

    #[test]
    fn disconnected_input_is_domain_error() {
        assert!(run_s1(&[s(&[0, 0]), s(&[2, 0])], &z2(), &quick(0), PriorSpec::Uniform).is_err());
    }

    #[test]
    fn bridge_only_cluster_never_moves() {
        let g = ClusterGraph::saturated(z2(), &[s(&[0, 0]), s(&[1, 0])]).unwrap();
        let mut sm = S1Sampler::new(g.clone(), PriorSpec::Uniform).unwrap();
        let mut rng = crate::rng::stream(3, 0);
        for _ in 0..1000 {
            sm.step(&mut rng);
        }
        assert_eq!(sm.state.graph, g);
    }

    fn block_sampler(open_all: bool) -> S1Sampler {
        let b = [s(&[0, 0]), s(&[1, 0]), s(&[0, 1]), s(&[1, 1])];
        let mut g = ClusterGraph::saturated(z2(), &b).unwrap();
        if !open_all {
            g.apply_edge_toggle(&Edge::new(b[2], b[3]), false).unwrap();
        }
        S1Sampler::new(g, PriorSpec::Uniform).unwrap()
    }

    #[test]
    fn moves_at_half_are_always_accepted() {
        // at p = 1/2 both ratios are one
        let mut rng = crate::rng::stream(4, 0);
        for _ in 0..200 {
            // missing edge gets inserted; the three open edges form a path of bridges
            let mut sm = block_sampler(false);
            sm.state.p = 0.5;
            let moved = sm.mh_edge_step(&mut rng);
            assert_eq!(moved, sm.state.graph.stats().e_open == 4);

            // every edge of the 4-cycle is removable
            let mut sm = block_sampler(true);
            sm.state.p = 0.5;
            assert!(sm.mh_edge_step(&mut rng));
            assert_eq!(sm.state.graph.stats().e_open, 3);
        }
    }

    #[test]
    fn compact_start_is_a_tree() {
        let b = [s(&[0, 0]), s(&[1, 0]), s(&[0, 1]), s(&[1, 1])];
        let g = ClusterGraph::saturated(z2(), &b).unwrap();
        let t = spanning_tree(&g).unwrap();
        assert_eq!(t.stats().e_open, 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let b = [s(&[0, 0]), s(&[1, 0]), s(&[0, 1]), s(&[1, 1])];
        let cfg = ChainConfig { iterations: 5_000, burn_in: 0, thin: 1, ..quick(9) };
        let a = run_s1(&b, &z2(), &cfg, PriorSpec::Uniform).unwrap();
        let c = run_s1(&b, &z2(), &cfg, PriorSpec::Uniform).unwrap();
        assert_eq!(a.draws, c.draws);
    }
}
