//! Cubic-lattice geometry: sites, plots, saturation, surface and frontier.
//!
//! Sites live in ℤ^d for `1 <= d <= MAX_DIM`. Two sites are neighbours when
//! they are at L1-distance one and both belong to the plot. Neighbour order is
//! fixed: axis by axis, negative direction before positive, so direction `k`
//! moves along axis `k / 2` by `-1` when `k` is even and `+1` when odd.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rustc_hash::FxHashSet;

use crate::error::{domain, Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of ℤ^d.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    /// Builds a site from its coordinates.
    ///
    /// Panics when `coords` is empty or longer than [`MAX_DIM`]; use
    /// [`Site::try_new`] for untrusted input.
    pub fn new(coords: &[i32]) -> Site {
        Site::try_new(coords).expect("site dimension must be in 1..=MAX_DIM")
    }

    pub fn try_new(coords: &[i32]) -> Result<Site> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return domain(format!(
                "site dimension {} outside 1..={MAX_DIM}",
                coords.len()
            ));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    pub fn origin(dim: usize) -> Site {
        assert!((1..=MAX_DIM).contains(&dim));
        Site {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// ‖x‖₁
    pub fn l1(&self) -> u32 {
        self.coords().iter().map(|c| c.unsigned_abs()).sum()
    }

    /// ‖x‖∞
    pub fn linf(&self) -> u32 {
        self.coords()
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// The lattice site one step away in direction `dir` (see module docs).
    /// Ignores plot membership.
    #[inline]
    pub fn step(&self, dir: usize) -> Site {
        debug_assert!(dir < 2 * self.dim());
        let mut s = *self;
        if dir & 1 == 0 {
            s.coords[dir >> 1] -= 1;
        } else {
            s.coords[dir >> 1] += 1;
        }
        s
    }

    /// Direction `k` such that `self.step(k) == other`, if they are lattice neighbours.
    pub fn direction_to(&self, other: &Site) -> Option<usize> {
        if self.dim != other.dim {
            return None;
        }
        let mut found = None;
        for axis in 0..self.dim() {
            match other.coords[axis] - self.coords[axis] {
                0 => {}
                -1 if found.is_none() => found = Some(2 * axis),
                1 if found.is_none() => found = Some(2 * axis + 1),
                _ => return None,
            }
        }
        found
    }

    pub fn is_adjacent(&self, other: &Site) -> bool {
        self.direction_to(other).is_some()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Site> {
        let coords = s
            .split(',')
            .map(|t| t.trim().parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Domain(format!("bad coordinate in {s:?}: {e}")))?;
        Site::try_new(&coords)
    }
}

/// An undirected lattice edge stored as `(min, max)` under lexicographic site order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Edge(Site, Site);

impl Edge {
    pub fn new(a: Site, b: Site) -> Edge {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn endpoints(&self) -> (Site, Site) {
        (self.0, self.1)
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.0 == *s || self.1 == *s
    }

    pub fn other(&self, s: &Site) -> Option<Site> {
        if self.0 == *s {
            Some(self.1)
        } else if self.1 == *s {
            Some(self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", self.0, self.1)
    }
}

impl FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Edge> {
        let (a, b) = s
            .split_once(';')
            .ok_or_else(|| Error::Domain(format!("edge {s:?} lacks ';'")))?;
        let (a, b): (Site, Site) = (a.parse()?, b.parse()?);
        if !a.is_adjacent(&b) {
            return domain(format!("edge {s:?} joins non-adjacent sites"));
        }
        Ok(Edge::new(a, b))
    }
}

/// Shape of a plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// All of ℤ^d.
    Full,
    /// The box `[-(N-1)/2, (N-1)/2]^d` for odd `N`.
    Box { side: u32 },
    /// Inner-outer `(m, r)` plot in a box of side `N = m + 4r`.
    InnerOuter { m: u32, r: u32 },
}

/// A vertex set of ℤ^d with the induced nearest-neighbour adjacency.
///
/// Finite plots cache their sorted vertex list on first request.
#[derive(Debug)]
pub struct Plot {
    dim: usize,
    kind: PlotKind,
    vertices: OnceLock<Vec<Site>>,
}

impl Clone for Plot {
    fn clone(&self) -> Self {
        Plot {
            dim: self.dim,
            kind: self.kind,
            vertices: self.vertices.clone(),
        }
    }
}

impl PartialEq for Plot {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.kind == other.kind
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        domain(format!("dimension {dim} outside 1..={MAX_DIM}"))
    }
}

impl Plot {
    fn with_kind(dim: usize, kind: PlotKind) -> Plot {
        Plot {
            dim,
            kind,
            vertices: OnceLock::new(),
        }
    }

    pub fn full(dim: usize) -> Result<Plot> {
        check_dim(dim)?;
        Ok(Plot::with_kind(dim, PlotKind::Full))
    }

    /// The centred box `B_N^{(d)}`; `side` must be odd.
    pub fn boxed(dim: usize, side: u32) -> Result<Plot> {
        check_dim(dim)?;
        if side.is_multiple_of(2) {
            return domain(format!("box side {side} must be odd and positive"));
        }
        Ok(Plot::with_kind(dim, PlotKind::Box { side }))
    }

    /// Inner-outer `(m, r)` plot centred at the origin.
    ///
    /// The bounding box has side `N = m + 4r`. Around the intact inner
    /// `m x m` core, the outer rings alternate between sparsified and intact:
    /// the `r` rings with `‖x‖∞ = (m+1)/2 + 2j`, `j = 0..r`, lose every site
    /// with even `‖x‖₁`. For `d = 2` this leaves `(m+3r)² + r(3r+2)` sites.
    pub fn inner_outer(dim: usize, m: u32, r: u32) -> Result<Plot> {
        check_dim(dim)?;
        if m.is_multiple_of(2) {
            return domain(format!("inner-outer m = {m} must be odd and positive"));
        }
        if r == 0 {
            return Plot::boxed(dim, m);
        }
        Ok(Plot::with_kind(dim, PlotKind::InnerOuter { m, r }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PlotKind {
        self.kind
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self.kind, PlotKind::Full)
    }

    /// Side length `N` of the bounding box, if finite.
    pub fn side(&self) -> Option<u32> {
        match self.kind {
            PlotKind::Full => None,
            PlotKind::Box { side } => Some(side),
            PlotKind::InnerOuter { m, r } => Some(m + 4 * r),
        }
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        if s.dim() != self.dim {
            return false;
        }
        match self.kind {
            PlotKind::Full => true,
            PlotKind::Box { side } => s.linf() <= (side - 1) / 2,
            PlotKind::InnerOuter { m, r } => {
                let k = s.linf();
                if k > (m + 4 * r - 1) / 2 {
                    return false;
                }
                let first = m.div_ceil(2);
                let sparse_ring = k >= first && (k - first).is_multiple_of(2) && (k - first) / 2 < r;
                !(sparse_ring && s.l1().is_multiple_of(2))
            }
        }
    }

    /// Neighbour of `s` in direction `dir` if it belongs to the plot.
    #[inline]
    pub fn neighbor(&self, s: &Site, dir: usize) -> Option<Site> {
        let t = s.step(dir);
        self.contains(&t).then_some(t)
    }

    /// Plot members at L1-distance one from `s`, in the fixed direction order.
    pub fn neighbors(&self, s: &Site) -> Result<Vec<Site>> {
        self.require_member(s)?;
        Ok((0..2 * self.dim)
            .filter_map(|k| self.neighbor(s, k))
            .collect())
    }

    /// Number of plot neighbours of `s` (no membership check on `s`).
    #[inline]
    pub fn degree(&self, s: &Site) -> usize {
        (0..2 * self.dim)
            .filter(|&k| self.contains(&s.step(k)))
            .count()
    }

    pub(crate) fn require_member(&self, s: &Site) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            domain(format!("site ({s}) is not a member of plot {self}"))
        }
    }

    /// Sorted member list of a finite plot.
    pub fn vertices(&self) -> Result<&[Site]> {
        let half = match self.side() {
            Some(n) => ((n - 1) / 2) as i32,
            None => return domain("the full lattice has no finite vertex list"),
        };
        Ok(self.vertices.get_or_init(|| {
            let mut out = Vec::new();
            let mut cur = vec![-half; self.dim];
            loop {
                let s = Site::new(&cur);
                if self.contains(&s) {
                    out.push(s);
                }
                // odometer, last axis fastest: yields lexicographic order
                let mut axis = self.dim;
                loop {
                    if axis == 0 {
                        return out;
                    }
                    axis -= 1;
                    if cur[axis] < half {
                        cur[axis] += 1;
                        break;
                    }
                    cur[axis] = -half;
                }
            }
        }))
    }

    pub fn node_count(&self) -> Result<usize> {
        self.vertices().map(|v| v.len())
    }
}

impl fmt::Display for Plot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PlotKind::Full => write!(f, "full:{}", self.dim),
            PlotKind::Box { side } => write!(f, "box:{},{side}", self.dim),
            PlotKind::InnerOuter { m, r } => write!(f, "inner-outer:{},{m},{r}", self.dim),
        }
    }
}

impl FromStr for Plot {
    type Err = Error;

    /// Parses `full:d`, `box:d,N` or `inner-outer:d,m,r`.
    fn from_str(s: &str) -> Result<Plot> {
        let bad = || Error::Domain(format!("bad plot spec {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|t| t.parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match (kind, nums.as_slice()) {
            ("full", [d]) => Plot::full(*d as usize),
            ("box", [d, n]) => Plot::boxed(*d as usize, *n),
            ("inner-outer", [d, m, r]) => Plot::inner_outer(*d as usize, *m, *r),
            _ => Err(bad()),
        }
    }
}

/// Closed-form node count `(m+3r)² + r(3r+2)` of a two-dimensional inner-outer plot.
pub fn inner_outer_node_count(m: u64, r: u64) -> u64 {
    (m + 3 * r).pow(2) + r * (3 * r + 2)
}

fn member_set(vertices: &[Site], plot: &Plot) -> Result<FxHashSet<Site>> {
    vertices
        .iter()
        .map(|s| plot.require_member(s).map(|_| *s))
        .collect()
}

/// All plot edges with both endpoints in `vertices`.
pub fn saturate(vertices: &[Site], plot: &Plot) -> Result<BTreeSet<Edge>> {
    let set = member_set(vertices, plot)?;
    let mut out = BTreeSet::new();
    for s in &set {
        // positive directions only, so each edge is seen once
        for axis in 0..plot.dim() {
            let t = s.step(2 * axis + 1);
            if set.contains(&t) {
                out.insert(Edge::new(*s, t));
            }
        }
    }
    Ok(out)
}

/// `(surface, frontier)`: members with an outside plot-neighbour, and outside
/// plot members with a neighbour inside.
pub fn surface_and_frontier(
    vertices: &[Site],
    plot: &Plot,
) -> Result<(BTreeSet<Site>, BTreeSet<Site>)> {
    let set = member_set(vertices, plot)?;
    let mut surface = BTreeSet::new();
    let mut frontier = BTreeSet::new();
    for s in &set {
        for k in 0..2 * plot.dim() {
            if let Some(t) = plot.neighbor(s, k) {
                if !set.contains(&t) {
                    surface.insert(*s);
                    frontier.insert(t);
                }
            }
        }
    }
    Ok((surface, frontier))
}

/// Number of plot edges with exactly one endpoint in `vertices`.
pub fn boundary_edge_count(vertices: &[Site], plot: &Plot) -> Result<usize> {
    let set = member_set(vertices, plot)?;
    Ok(set
        .iter()
        .map(|s| {
            (0..2 * plot.dim())
                .filter_map(|k| plot.neighbor(s, k))
                .filter(|t| !set.contains(t))
                .count()
        })
        .sum())
}
