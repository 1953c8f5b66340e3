//! Connected subgraphs of a plot with cached edge statistics.
//!
//! A [`ClusterGraph`] is a vertex set `C` together with a subset of the edges
//! of its saturation. Vertices are addressed internally by dense indices; each
//! vertex stores the index of its member neighbour in every lattice direction
//! and a bitmask of which of those edges are open. Outside sites adjacent to
//! the cluster (the frontier) are kept with their number of member neighbours.

use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::error::{domain, Result};
use crate::lattice::{Edge, Plot, Site, MAX_DIM};

pub(crate) const NONE: u32 = u32::MAX;
const DIRS: usize = 2 * MAX_DIM;

/// The three edge counts entering the percolation probability of a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct GraphStats {
    /// open edges `e(G)`
    pub e_open: usize,
    /// edges of the saturation `e(satur C)`
    pub e_sat: usize,
    /// plot edges between the cluster and its frontier
    pub w: usize,
}

impl GraphStats {
    /// Number of edges that must be closed given the graph.
    pub fn closed(&self) -> usize {
        self.e_sat - self.e_open + self.w
    }

    /// `log P_p(G) = e_open log p + (e_sat - e_open + w) log(1-p)`.
    pub fn log_prob(&self, p: f64) -> f64 {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        self.e_open as f64 * p.ln() + self.closed() as f64 * (-p).ln_1p()
    }
}

/// Reusable visit marks for breadth-first searches over a cluster.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    mark: Vec<u32>,
    epoch: u32,
    queue_a: Vec<u32>,
    queue_b: Vec<u32>,
}

impl Scratch {
    /// Returns two fresh mark values valid for marks sized to `n`.
    fn begin(&mut self, n: usize) -> (u32, u32) {
        if self.mark.len() < n {
            self.mark.resize(n, 0);
        }
        if self.epoch >= u32::MAX - 2 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 0;
        }
        self.epoch += 2;
        self.queue_a.clear();
        self.queue_b.clear();
        (self.epoch - 1, self.epoch)
    }
}

#[derive(Clone, Debug)]
pub struct ClusterGraph {
    plot: Arc<Plot>,
    sites: Vec<Site>,
    index: FxHashMap<Site, u32>,
    nbr: Vec<[u32; DIRS]>,
    open: Vec<u8>,
    frontier: IndexMap<Site, u32, FxBuildHasher>,
    stats: GraphStats,
}

impl PartialEq for ClusterGraph {
    /// Same plot, vertex set and open edges, regardless of insertion order.
    fn eq(&self, other: &Self) -> bool {
        *self.plot == *other.plot
            && self.sites.len() == other.sites.len()
            && self.sites.iter().all(|s| other.index.contains_key(s))
            && self.open_edges() == other.open_edges()
    }
}

impl ClusterGraph {
    /// Vertex set without open edges; frontier and counts are filled in.
    fn bare(plot: Arc<Plot>, sites: &[Site]) -> Result<ClusterGraph> {
        if sites.is_empty() {
            return domain("a cluster needs at least one site");
        }
        let mut index = FxHashMap::default();
        for (i, s) in sites.iter().enumerate() {
            plot.require_member(s)?;
            if index.insert(*s, i as u32).is_some() {
                return domain(format!("duplicate site ({s})"));
            }
        }
        let dirs = 2 * plot.dim();
        let mut nbr = vec![[NONE; DIRS]; sites.len()];
        let mut frontier: IndexMap<Site, u32, FxBuildHasher> = IndexMap::default();
        let mut e_sat2 = 0;
        let mut w = 0;
        for (i, s) in sites.iter().enumerate() {
            for k in 0..dirs {
                if let Some(t) = plot.neighbor(s, k) {
                    match index.get(&t) {
                        Some(&j) => {
                            nbr[i][k] = j;
                            e_sat2 += 1;
                        }
                        None => {
                            *frontier.entry(t).or_insert(0) += 1;
                            w += 1;
                        }
                    }
                }
            }
        }
        Ok(ClusterGraph {
            plot,
            sites: sites.to_vec(),
            index,
            nbr,
            open: vec![0; sites.len()],
            frontier,
            stats: GraphStats {
                e_open: 0,
                e_sat: e_sat2 / 2,
                w,
            },
        })
    }

    /// The fully saturated graph on `sites`; fails if it is disconnected.
    pub fn saturated(plot: Arc<Plot>, sites: &[Site]) -> Result<ClusterGraph> {
        let mut g = ClusterGraph::bare(plot, sites)?;
        for i in 0..g.sites.len() {
            for k in 0..2 * g.plot.dim() {
                if g.nbr[i][k] != NONE {
                    g.open[i] |= 1 << k;
                }
            }
        }
        g.stats.e_open = g.stats.e_sat;
        if !g.is_connected() {
            return domain("site set is not connected in its saturation");
        }
        Ok(g)
    }

    /// Graph on `sites` with the given open edges; fails unless every edge
    /// joins two sites of the set and the result is connected.
    pub fn from_edges(plot: Arc<Plot>, sites: &[Site], edges: &[Edge]) -> Result<ClusterGraph> {
        let g = ClusterGraph::from_edges_unchecked(plot, sites, edges)?;
        if !g.is_connected() {
            return domain("open edges do not connect the site set");
        }
        Ok(g)
    }

    /// As [`ClusterGraph::from_edges`] but without the connectivity check.
    pub(crate) fn from_edges_unchecked(
        plot: Arc<Plot>,
        sites: &[Site],
        edges: &[Edge],
    ) -> Result<ClusterGraph> {
        let mut g = ClusterGraph::bare(plot, sites)?;
        for e in edges {
            let (a, k) = g.locate(e)?;
            if g.open[a as usize] & (1 << k) != 0 {
                return domain(format!("duplicate edge {e}"));
            }
            g.set_open(a, k, true);
        }
        Ok(g)
    }

    pub fn plot(&self) -> &Arc<Plot> {
        &self.plot
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Vertices in internal order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn sorted_sites(&self) -> Vec<Site> {
        let mut v = self.sites.clone();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    pub fn open_edges(&self) -> BTreeSet<Edge> {
        self.edges_where(|g, i, k| g.open[i] & (1 << k) != 0)
    }

    /// Edges of the saturation, in canonical order.
    pub fn saturated_edges(&self) -> Vec<Edge> {
        self.edges_where(|_, _, _| true).into_iter().collect()
    }

    fn edges_where(&self, keep: impl Fn(&Self, usize, usize) -> bool) -> BTreeSet<Edge> {
        let mut out = BTreeSet::new();
        for i in 0..self.sites.len() {
            for axis in 0..self.plot.dim() {
                let k = 2 * axis + 1;
                if self.nbr[i][k] != NONE && keep(self, i, k) {
                    out.insert(Edge::new(self.sites[i], self.sites[self.nbr[i][k] as usize]));
                }
            }
        }
        out
    }

    pub fn is_open(&self, e: &Edge) -> bool {
        self.locate(e)
            .map(|(a, k)| self.open[a as usize] & (1 << k) != 0)
            .unwrap_or(false)
    }

    /// Outside plot members adjacent to the cluster.
    pub fn frontier(&self) -> BTreeSet<Site> {
        self.frontier.keys().copied().collect()
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    /// Members with at least one plot neighbour outside the cluster.
    pub fn surface(&self) -> BTreeSet<Site> {
        self.sites
            .iter()
            .filter(|s| {
                (0..2 * self.plot.dim())
                    .filter_map(|k| self.plot.neighbor(s, k))
                    .any(|t| !self.contains(&t))
            })
            .copied()
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut scratch = Scratch::default();
        self.reached_from(0, NONE, &mut scratch) == self.sites.len()
    }

    /// Whether the graph stays connected once the open edge `e` is removed.
    pub fn is_connected_after_removal(&self, e: &Edge) -> Result<bool> {
        let (a, k) = self.locate(e)?;
        if self.open[a as usize] & (1 << k) == 0 {
            return domain(format!("edge {e} is not open"));
        }
        Ok(self.survives_removal(a, k, &mut Scratch::default()))
    }

    /// Opens (`insert`) or closes an edge of the saturation. Closing must keep
    /// the graph connected.
    pub fn apply_edge_toggle(&mut self, e: &Edge, insert: bool) -> Result<()> {
        let (a, k) = self.locate(e)?;
        let is_open = self.open[a as usize] & (1 << k) != 0;
        if insert {
            if is_open {
                return domain(format!("edge {e} is already open"));
            }
        } else {
            if !is_open {
                return domain(format!("edge {e} is not open"));
            }
            if !self.survives_removal(a, k, &mut Scratch::default()) {
                return domain(format!("removing bridge {e} would disconnect the graph"));
            }
        }
        self.set_open(a, k, insert);
        Ok(())
    }

    /// Candidate graph on `(C \ {u}) ∪ {v}`: drops every edge at `u` and opens
    /// `new_edges_for_v`. Connectivity of the result is not checked.
    pub fn replace_vertex(&self, u: &Site, v: &Site, new_edges_for_v: &[Edge]) -> Result<ClusterGraph> {
        let ui = match self.index.get(u) {
            Some(&i) => i,
            None => return domain(format!("({u}) is not a vertex")),
        };
        if !self.frontier.contains_key(v) {
            return domain(format!("({v}) is not on the frontier"));
        }
        if new_edges_for_v.is_empty() {
            return domain("at least one edge must join the new vertex");
        }
        let mut dirs = Vec::with_capacity(new_edges_for_v.len());
        for e in new_edges_for_v {
            let z = e
                .other(v)
                .ok_or_else(|| crate::Error::Domain(format!("edge {e} does not touch ({v})")))?;
            if z == *u || !self.contains(&z) {
                return domain(format!("edge {e} must join ({v}) to the remaining cluster"));
            }
            let k = v.direction_to(&z).expect("edge endpoints are adjacent");
            if dirs.contains(&k) {
                return domain(format!("duplicate edge {e}"));
            }
            dirs.push(k);
        }
        let mut g = self.clone();
        g.swap_vertex(ui, *v, &dirs);
        Ok(g)
    }

    /// Recounts `(e_open, e_sat, w)` from the vertex set and edge set alone.
    pub fn recompute_stats(&self) -> GraphStats {
        let sat = crate::lattice::saturate(&self.sites, &self.plot).expect("members of plot");
        GraphStats {
            e_open: self.open_edges().len(),
            e_sat: sat.len(),
            w: crate::lattice::boundary_edge_count(&self.sites, &self.plot).expect("members of plot"),
        }
    }

    /// Checks every cached structure against a from-scratch rebuild.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let edges: Vec<Edge> = self.open_edges().into_iter().collect();
        let fresh = ClusterGraph::from_edges_unchecked(self.plot.clone(), &self.sites, &edges)
            .map_err(|e| e.to_string())?;
        if fresh.stats != self.stats {
            return Err(format!("cached {:?} != recomputed {:?}", self.stats, fresh.stats));
        }
        if self.recompute_stats() != self.stats {
            return Err("stats disagree with lattice-level counts".into());
        }
        if fresh.nbr != self.nbr || fresh.open != self.open {
            return Err("neighbour table or open masks out of sync".into());
        }
        let mut f1: Vec<_> = self.frontier.iter().map(|(s, c)| (*s, *c)).collect();
        let mut f2: Vec<_> = fresh.frontier.iter().map(|(s, c)| (*s, *c)).collect();
        f1.sort_unstable();
        f2.sort_unstable();
        if f1 != f2 {
            return Err("frontier contact counts out of sync".into());
        }
        if !self.is_connected() {
            return Err("graph is disconnected".into());
        }
        Ok(())
    }

    // ---- crate-internal fast paths used by the samplers ----

    /// `(vertex index, direction)` of the lower-indexed endpoint view of `e`.
    pub(crate) fn locate(&self, e: &Edge) -> Result<(u32, usize)> {
        let (a, b) = e.endpoints();
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&ia), Some(_)) => {
                let k = a
                    .direction_to(&b)
                    .ok_or_else(|| crate::Error::Domain(format!("edge {e} is not a lattice edge")))?;
                if self.nbr[ia as usize][k] == NONE {
                    return domain(format!("edge {e} is not a plot edge"));
                }
                Ok((ia, k))
            }
            _ => domain(format!("edge {e} is not inside the cluster")),
        }
    }

    #[inline]
    pub(crate) fn index_of(&self, s: &Site) -> Option<u32> {
        self.index.get(s).copied()
    }

    #[inline]
    pub(crate) fn neighbor_index(&self, i: u32, k: usize) -> u32 {
        self.nbr[i as usize][k]
    }

    #[inline]
    pub(crate) fn open_mask(&self, i: u32) -> u8 {
        self.open[i as usize]
    }

    #[inline]
    pub(crate) fn frontier_at(&self, i: usize) -> Site {
        *self.frontier.get_index(i).expect("frontier index in range").0
    }

    #[inline]
    pub(crate) fn frontier_contacts(&self, s: &Site) -> u32 {
        self.frontier.get(s).copied().unwrap_or(0)
    }

    #[inline]
    pub(crate) fn set_open(&mut self, a: u32, k: usize, open: bool) {
        let b = self.nbr[a as usize][k];
        debug_assert!(b != NONE);
        let was = self.open[a as usize] & (1 << k) != 0;
        if was == open {
            return;
        }
        if open {
            self.open[a as usize] |= 1 << k;
            self.open[b as usize] |= 1 << (k ^ 1);
            self.stats.e_open += 1;
        } else {
            self.open[a as usize] &= !(1 << k);
            self.open[b as usize] &= !(1 << (k ^ 1));
            self.stats.e_open -= 1;
        }
    }

    /// Number of vertices reachable from `start` over open edges, ignoring vertex `skip`.
    pub(crate) fn reached_from(&self, start: u32, skip: u32, scratch: &mut Scratch) -> usize {
        let (mark, _) = scratch.begin(self.sites.len());
        scratch.mark[start as usize] = mark;
        scratch.queue_a.push(start);
        let mut head = 0;
        while head < scratch.queue_a.len() {
            let x = scratch.queue_a[head] as usize;
            head += 1;
            let mut bits = self.open[x];
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let y = self.nbr[x][k];
                if y != skip && scratch.mark[y as usize] != mark {
                    scratch.mark[y as usize] = mark;
                    scratch.queue_a.push(y);
                }
            }
        }
        scratch.queue_a.len()
    }

    /// Interleaved search from both endpoints of the open edge `(a, k)` with
    /// the edge itself ignored; stops as soon as the searches meet or one
    /// side runs out, so the cost is bounded by the smaller side.
    pub(crate) fn survives_removal(&self, a: u32, k: usize, scratch: &mut Scratch) -> bool {
        let b = self.nbr[a as usize][k];
        let (ma, mb) = scratch.begin(self.sites.len());
        scratch.mark[a as usize] = ma;
        scratch.mark[b as usize] = mb;
        scratch.queue_a.push(a);
        scratch.queue_b.push(b);
        let (mut ha, mut hb) = (0, 0);
        let skip = |x: u32, d: usize| (x == a && d == k) || (x == b && d == (k ^ 1));
        loop {
            for side in 0..2 {
                let (queue, head, mine, theirs) = if side == 0 {
                    (&mut scratch.queue_a, &mut ha, ma, mb)
                } else {
                    (&mut scratch.queue_b, &mut hb, mb, ma)
                };
                if *head == queue.len() {
                    return false;
                }
                let x = queue[*head];
                *head += 1;
                let mut bits = self.open[x as usize];
                while bits != 0 {
                    let d = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    if skip(x, d) {
                        continue;
                    }
                    let y = self.nbr[x as usize][d];
                    let m = scratch.mark[y as usize];
                    if m == theirs {
                        return true;
                    }
                    if m != mine {
                        scratch.mark[y as usize] = mine;
                        queue.push(y);
                    }
                }
            }
        }
    }

    /// Removes vertex `ui` with all its edges and appends `v` joined to the
    /// member neighbours in directions `dirs` (directions taken from `v`).
    pub(crate) fn swap_vertex(&mut self, ui: u32, v: Site, dirs: &[usize]) {
        let nd = 2 * self.plot.dim();
        let u = self.sites[ui as usize];
        // detach u
        for k in 0..nd {
            let j = self.nbr[ui as usize][k];
            if j != NONE {
                self.set_open(ui, k, false);
                self.nbr[j as usize][k ^ 1] = NONE;
                self.nbr[ui as usize][k] = NONE;
                self.stats.e_sat -= 1;
                // the edge u-j is now a boundary edge
                self.stats.w += 1;
            } else if let Some(t) = self.plot.neighbor(&u, k) {
                let c = self.frontier.get_mut(&t).expect("outside neighbour is on the frontier");
                *c -= 1;
                if *c == 0 {
                    self.frontier.swap_remove(&t);
                }
                self.stats.w -= 1;
            }
        }
        let contacts = (0..nd)
            .filter_map(|k| self.plot.neighbor(&u, k))
            .filter(|t| self.index.contains_key(t) && *t != u)
            .count() as u32;
        if contacts > 0 {
            self.frontier.insert(u, contacts);
        }
        self.index.remove(&u);
        let last = (self.sites.len() - 1) as u32;
        self.sites.swap_remove(ui as usize);
        self.nbr.swap_remove(ui as usize);
        self.open.swap_remove(ui as usize);
        if ui != last {
            self.index.insert(self.sites[ui as usize], ui);
            for k in 0..nd {
                let j = self.nbr[ui as usize][k];
                if j != NONE {
                    self.nbr[j as usize][k ^ 1] = ui;
                }
            }
        }
        // attach v
        let vi = self.sites.len() as u32;
        self.sites.push(v);
        self.index.insert(v, vi);
        self.nbr.push([NONE; DIRS]);
        self.open.push(0);
        self.frontier.swap_remove(&v);
        for k in 0..nd {
            if let Some(t) = self.plot.neighbor(&v, k) {
                match self.index.get(&t) {
                    Some(&j) => {
                        self.nbr[vi as usize][k] = j;
                        self.nbr[j as usize][k ^ 1] = vi;
                        self.stats.e_sat += 1;
                        self.stats.w -= 1;
                    }
                    None => {
                        *self.frontier.entry(t).or_insert(0) += 1;
                        self.stats.w += 1;
                    }
                }
            }
        }
        for &k in dirs {
            self.set_open(vi, k, true);
        }
    }
}
