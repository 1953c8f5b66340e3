//! Plain-text cluster files and their key-value metadata sidecars.
//!
//! ```text
//! # optional comment lines
//! 0,0
//! 1,0
//! EDGES
//! 0,0;1,0
//! ```
//!
//! One site per line as comma-separated integer coordinates, optionally
//! followed by a line `EDGES` and one `a;b` edge per line. Lines starting
//! with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cluster_graph::ClusterGraph;
use crate::error::{Error, Result};
use crate::lattice::{Edge, Site};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterFile {
    pub sites: Vec<Site>,
    /// `None` when the file has no `EDGES` section.
    pub edges: Option<Vec<Edge>>,
}

/// Renders `g` in the cluster file format, sites in lexicographic order.
pub fn write_cluster(g: &ClusterGraph, with_edges: bool, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    for s in g.sorted_sites() {
        let _ = writeln!(out, "{s}");
    }
    if with_edges {
        out.push_str("EDGES\n");
        for e in g.open_edges() {
            let _ = writeln!(out, "{e}");
        }
    }
    out
}

pub fn parse_cluster(text: &str) -> Result<ClusterFile> {
    let mut sites = Vec::new();
    let mut edges: Option<Vec<Edge>> = None;
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        let err = |msg: String| Error::Parse { line: lineno, msg };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "EDGES" {
            if edges.is_some() {
                return Err(err("second EDGES marker".into()));
            }
            edges = Some(Vec::new());
            continue;
        }
        match edges.as_mut() {
            None => {
                let s: Site = line.parse().map_err(|e: Error| err(e.to_string()))?;
                if *dim.get_or_insert(s.dim()) != s.dim() {
                    return Err(err(format!("site ({s}) has the wrong dimension")));
                }
                sites.push(s);
            }
            Some(list) => {
                let e: Edge = line.parse().map_err(|e: Error| err(e.to_string()))?;
                if Some(e.endpoints().0.dim()) != dim {
                    return Err(err(format!("edge {e} has the wrong dimension")));
                }
                list.push(e);
            }
        }
    }
    if sites.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "no sites".into(),
        });
    }
    Ok(ClusterFile { sites, edges })
}

/// `key=value` lines in key order.
pub fn write_metadata(meta: &BTreeMap<String, String>) -> String {
    meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
