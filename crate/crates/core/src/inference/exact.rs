//! Exact posteriors of small instances by exhaustive enumeration.
//!
//! Every admissible graph `G` contributes `p^k (1-p)^(s-k+l)` to the
//! likelihood, with `k = e(G)`, `s` the saturated edge count and `l` the
//! boundary edge count. Grouping graphs by `(s, k, l)` turns the posterior
//! under a `Beta(a, b)` prior into a finite mixture of Beta densities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use statrs::function::beta::beta_reg;

use super::PriorSpec;
use crate::error::{Error, Result};
use crate::lattice::{boundary_edge_count, saturate, Edge, Plot, Site};

/// Largest saturated edge count accepted by [`exact_posterior_s1`].
pub const S1_EDGE_GUARD: usize = 20;
/// Largest cluster size accepted by [`exact_posterior_s2`].
pub const S2_SIZE_GUARD: usize = 6;

/// Graph counts keyed by `(s, k, l)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MixtureTable {
    pub entries: BTreeMap<(usize, usize, usize), u64>,
}

/// One Beta component of a posterior mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub a: f64,
    pub b: f64,
}

impl MixtureTable {
    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    fn add(&mut self, key: (usize, usize, usize), count: u64) {
        if count > 0 {
            *self.entries.entry(key).or_insert(0) += count;
        }
    }

    /// `P_p(C)`-style likelihood: `Σ count · p^k (1-p)^(s-k+l)`.
    pub fn likelihood(&self, p: f64) -> f64 {
        self.entries
            .iter()
            .map(|(&(s, k, l), &c)| c as f64 * p.powi(k as i32) * (1.0 - p).powi((s - k + l) as i32))
            .sum()
    }

    /// Posterior components under `prior`, weights summing to one. A table
    /// entry becomes `Beta(k + a, s - k + l + b)` weighted by
    /// `count · B(k + a, s - k + l + b)`.
    pub fn components(&self, prior: PriorSpec) -> Result<Vec<Component>> {
        let (a0, b0) = prior.beta_shape()?;
        let mut out: Vec<(f64, f64, f64)> = self
            .entries
            .iter()
            .map(|(&(s, k, l), &c)| {
                let a = k as f64 + a0;
                let b = (s - k + l) as f64 + b0;
                ((c as f64).ln() + crate::design::ln_beta(a, b), a, b)
            })
            .collect();
        let top = out.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = out.iter().map(|t| (t.0 - top).exp()).sum();
        for t in &mut out {
            t.0 = (t.0 - top).exp() / z;
        }
        Ok(out.into_iter().map(|(weight, a, b)| Component { weight, a, b }).collect())
    }

    pub fn cdf(&self, prior: PriorSpec, x: f64) -> Result<f64> {
        let x = x.clamp(0.0, 1.0);
        Ok(self.components(prior)?.iter().map(|c| c.weight * beta_reg(c.a, c.b, x)).sum())
    }

    pub fn pdf(&self, prior: PriorSpec, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Ok(0.0);
        }
        let x = super::clamp_p(x);
        Ok(self
            .components(prior)?
            .iter()
            .map(|c| {
                c.weight
                    * ((c.a - 1.0) * x.ln() + (c.b - 1.0) * (-x).ln_1p() - crate::design::ln_beta(c.a, c.b)).exp()
            })
            .sum())
    }

    pub fn mean(&self, prior: PriorSpec) -> Result<f64> {
        Ok(self.components(prior)?.iter().map(|c| c.weight * c.a / (c.a + c.b)).sum())
    }

    /// CSV with header `s,k,l,count`, preceded by `header` as `#` comments.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("s,k,l,count\n");
        for (&(s, k, l), c) in &self.entries {
            let _ = writeln!(out, "{s},{k},{l},{c}");
        }
        out
    }
}

/// Counts the connected spanning subgraphs of the saturation of `sites` by
/// number of open edges: `r[k]`.
fn spanning_counts(sites: &[Site], edges: &[Edge]) -> Vec<u64> {
    let index: BTreeMap<Site, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let pairs: Vec<(usize, usize)> = edges
        .iter()
        .map(|e| {
            let (a, b) = e.endpoints();
            (index[&a], index[&b])
        })
        .collect();
    let n = sites.len();
    let m = pairs.len();
    let mut r = vec![0u64; m + 1];
    let mut parent = vec![0usize; n];
    for mask in 0u32..(1u32 << m) {
        let k = mask.count_ones() as usize;
        if k + 1 < n {
            continue;
        }
        for (i, x) in parent.iter_mut().enumerate() {
            *x = i;
        }
        let mut parts = n;
        for (j, &(a, b)) in pairs.iter().enumerate() {
            if mask & (1 << j) != 0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    parts -= 1;
                }
            }
        }
        if parts == 1 {
            r[k] += 1;
        }
    }
    r
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn table_for(sites: &[Site], plot: &Plot, out: &mut MixtureTable) -> Result<()> {
    let edges: Vec<Edge> = saturate(sites, plot)?.into_iter().collect();
    if edges.len() > S1_EDGE_GUARD {
        return Err(Error::Capacity(format!(
            "{} saturated edges exceed the enumeration limit {S1_EDGE_GUARD}",
            edges.len()
        )));
    }
    let l = boundary_edge_count(sites, plot)?;
    for (k, c) in spanning_counts(sites, &edges).into_iter().enumerate() {
        out.add((edges.len(), k, l), c);
    }
    Ok(())
}

/// Exact mixture for an observed cluster: `r(k)` connected spanning
/// subgraphs of the saturation with `k` edges.
pub fn exact_posterior_s1(cluster_sites: &[Site], plot: &Arc<Plot>) -> Result<MixtureTable> {
    let sites: Vec<Site> = cluster_sites.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    // validates membership and connectivity
    crate::ClusterGraph::saturated(plot.clone(), &sites)?;
    let mut out = MixtureTable::default();
    table_for(&sites, plot, &mut out)?;
    Ok(out)
}

/// Every connected set of `n` plot sites containing the origin, each sorted.
pub fn connected_sets(n: usize, plot: &Plot) -> Result<BTreeSet<Vec<Site>>> {
    if n == 0 {
        return crate::error::domain("cluster size must be at least 1");
    }
    let origin = Site::origin(plot.dim());
    plot.require_member(&origin)?;
    let mut level = BTreeSet::from([vec![origin]]);
    for _ in 1..n {
        let mut next = BTreeSet::new();
        for set in &level {
            for s in set {
                for t in plot.neighbors(s)? {
                    if set.binary_search(&t).is_err() {
                        let mut grown = set.clone();
                        grown.insert(grown.binary_search(&t).unwrap_err(), t);
                        next.insert(grown);
                    }
                }
            }
        }
        level = next;
    }
    Ok(level)
}

/// Exact mixture for an observed cluster size: `q(s, k, l)` counts every
/// graph of `n` sites containing the origin, distinguishing translates and
/// rotations.
pub fn exact_posterior_s2(n: usize, plot: &Arc<Plot>) -> Result<MixtureTable> {
    if n > S2_SIZE_GUARD {
        return Err(Error::Capacity(format!(
            "cluster size {n} exceeds the enumeration limit {S2_SIZE_GUARD}"
        )));
    }
    let sets = connected_sets(n, plot)?;
    if sets.is_empty() {
        return crate::error::domain(format!("plot {plot} has no connected set of {n} sites containing the origin"));
    }
    let mut out = MixtureTable::default();
    for set in &sets {
        table_for(set, plot, &mut out)?;
    }
    Ok(out)
}
