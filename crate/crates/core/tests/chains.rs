use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use perc_core::inference::{connected_sets, exact_posterior_s2, initial_graph_s2, InitialGraph, S2Sampler};
use perc_core::lattice::saturate;
use perc_core::rng::stream;
use perc_core::{simulate_cluster, ClusterGraph, Edge, Plot, PriorSpec, Simulation, Site};

type Key = (Vec<Site>, Vec<Edge>);

fn z2() -> Arc<Plot> {
    Arc::new(Plot::full(2).unwrap())
}

fn key(g: &ClusterGraph) -> Key {
    (g.sorted_sites(), g.open_edges().into_iter().collect())
}

/// Every connected graph on `n` sites containing the origin.
fn all_graphs(n: usize, plot: &Arc<Plot>) -> Vec<ClusterGraph> {
    let mut out = Vec::new();
    for set in connected_sets(n, plot).unwrap() {
        let sat: Vec<Edge> = saturate(&set, plot).unwrap().into_iter().collect();
        for mask in 0u32..1 << sat.len() {
            let edges: Vec<Edge> = (0..sat.len()).filter(|i| mask >> i & 1 == 1).map(|i| sat[i]).collect();
            if let Ok(g) = ClusterGraph::from_edges(plot.clone(), &set, &edges) {
                out.push(g);
            }
        }
    }
    out
}

/// All graphs reachable by one vertex swap the chain can propose and accept:
/// a non-origin vertex `u` leaves, a frontier site `v` joins through a
/// non-empty set of edges to the rest, and the result stays connected.
fn moves(g: &ClusterGraph) -> Vec<ClusterGraph> {
    let origin = Site::origin(2);
    let mut out = Vec::new();
    for &u in g.sites().iter().filter(|&&s| s != origin) {
        for v in g.frontier() {
            let targets: Vec<Site> = g
                .plot()
                .neighbors(&v)
                .unwrap()
                .into_iter()
                .filter(|z| *z != u && g.contains(z))
                .collect();
            for mask in 1u32..1 << targets.len() {
                let edges: Vec<Edge> = (0..targets.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| Edge::new(v, targets[i]))
                    .collect();
                let h = g.replace_vertex(&u, &v, &edges).unwrap();
                if h.is_connected() {
                    out.push(h);
                }
            }
        }
    }
    out
}

fn line_skeleton(n: usize, plot: &Arc<Plot>) -> ClusterGraph {
    let sites: Vec<Site> = (0..n as i32).map(|x| Site::new(&[x, 0])).collect();
    let edges: Vec<Edge> = sites.windows(2).map(|w| Edge::new(w[0], w[1])).collect();
    ClusterGraph::from_edges(plot.clone(), &sites, &edges).unwrap()
}

#[test]
fn every_small_graph_reaches_the_line_skeleton() {
    let plot = z2();
    for n in 2..=5 {
        let graphs = all_graphs(n, &plot);
        let succ: BTreeMap<Key, Vec<Key>> =
            graphs.iter().map(|g| (key(g), moves(g).iter().map(key).collect())).collect();
        for targets in succ.values() {
            assert!(targets.iter().all(|t| succ.contains_key(t)), "a move left the state space");
        }

        // Breadth-first distances to the skeleton over reversed moves.
        let mut pred: BTreeMap<&Key, Vec<&Key>> = BTreeMap::new();
        for (from, targets) in &succ {
            for t in targets {
                pred.entry(t).or_default().push(from);
            }
        }
        let line = key(&line_skeleton(n, &plot));
        let mut dist: BTreeMap<&Key, usize> = BTreeMap::from([(&line, 0)]);
        let mut queue = VecDeque::from([&line]);
        while let Some(k) = queue.pop_front() {
            let d = dist[k];
            for &q in pred.get(k).into_iter().flatten() {
                if !dist.contains_key(q) {
                    dist.insert(q, d + 1);
                    queue.push_back(q);
                }
            }
        }
        assert_eq!(dist.len(), succ.len(), "n = {n}: some graphs cannot reach the skeleton");

        // Greedy descent terminates at the skeleton from every graph.
        for start in succ.keys() {
            let mut cur = start;
            let mut steps = 0;
            while *cur != line {
                cur = succ[cur].iter().min_by_key(|t| dist[t]).unwrap();
                steps += 1;
                assert!(steps <= dist[start]);
            }
            assert_eq!(steps, dist[start]);
        }
    }
}

#[test]
fn graph_counts_match_enumeration_table() {
    let plot = z2();
    for n in 1..=4 {
        let table = exact_posterior_s2(n, &plot).unwrap();
        assert_eq!(all_graphs(n, &plot).len() as u64, table.total());
    }
}

#[test]
fn pair_placements_are_visited_equally() {
    let plot = z2();
    let g = initial_graph_s2(2, &plot, InitialGraph::Standard).unwrap();
    let mut sampler = S2Sampler::new(g, PriorSpec::Uniform).unwrap();
    let mut rng = stream(21, 0);
    let origin = Site::origin(2);
    let (batches, per_batch) = (50, 4000);
    let mut freq: BTreeMap<Site, Vec<f64>> = BTreeMap::new();
    for s in plot.neighbors(&origin).unwrap() {
        freq.insert(s, vec![0.0; batches]);
    }
    for b in 0..batches {
        for _ in 0..per_batch {
            sampler.step(&mut rng);
            let other = *sampler.state.graph.sites().iter().find(|&&s| s != origin).unwrap();
            freq.get_mut(&other).unwrap()[b] += 1.0 / per_batch as f64;
        }
    }
    for (site, f) in &freq {
        let mean = f.iter().sum::<f64>() / batches as f64;
        let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        assert!((mean - 0.25).abs() <= 3.0 * se, "({site}): {mean} ± {se}");
    }
}

#[test]
fn small_cluster_sizes_match_enumeration() {
    let plot = z2();
    let p = 0.3;
    let reps = 100_000u64;
    let mut counts = [0u64; 4];
    for i in 0..reps {
        if let Simulation::Cluster(g) = simulate_cluster(&plot, p, 500 + i, Some(3)).unwrap() {
            counts[g.len()] += 1;
        }
    }
    for n in 1..=3 {
        let want = exact_posterior_s2(n, &plot).unwrap().likelihood(p);
        let got = counts[n] as f64 / reps as f64;
        let se = (want * (1.0 - want) / reps as f64).sqrt();
        assert!((got - want).abs() <= 4.0 * se, "n = {n}: {got} vs {want}");
    }
}

#[test]
fn swap_moves_are_reversible() {
    let plot = z2();
    for g in all_graphs(4, &plot) {
        let k = key(&g);
        for h in moves(&g) {
            let back: BTreeSet<Key> = moves(&h).iter().map(key).collect();
            assert!(back.contains(&k));
        }
    }
}
