//! Edge-level splitting, static K-way edge-disjoint partitioning, dynamic
//! per-iteration samplers, drop-edge augmentation, and negative sampling.
//!
//! All operations are deterministic functions of their inputs and the RNG
//! state handed to them; seeds are turned into named substreams in
//! [`crate::rng`].

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, EdgeSet, Graph};
use crate::rng::{stream_rng, Rng, Stream};

/// Train/validation/test positive edges plus fixed sampled negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: EdgeSet,
    pub val_pos: EdgeSet,
    pub val_neg: EdgeSet,
    pub test_pos: EdgeSet,
    pub test_neg: EdgeSet,
    pub num_nodes: usize,
    pub seed: u64,
}

/// One masked view of the training graph: an edge subset materialized as an
/// adjacency that keeps every self-loop, so all N nodes stay present.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    pub index: usize,
    pub num_nodes: usize,
    pub edge_set: EdgeSet,
    adjacency: CsrMatrix,
}

impl Subgraph {
    pub fn new(index: usize, num_nodes: usize, edge_set: EdgeSet) -> Self {
        let adjacency = CsrMatrix::adjacency(num_nodes, &edge_set);
        Subgraph {
            index,
            num_nodes,
            edge_set,
            adjacency,
        }
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn num_edges(&self) -> usize {
        self.edge_set.len()
    }
}

/// K subgraphs. Produced by [`partition_k`] / [`dynamic_res_partition`]
/// (edge-disjoint, covering, balanced) or by the alternative samplers
/// (views may overlap and need not cover the training set).
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub subgraphs: Vec<Subgraph>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.subgraphs.len()
    }
}

/// Random edge-level split of a graph's edges into train/val/test, with
/// fixed uniformly sampled negatives for val and test.
///
/// Counts: test and val take floor(ratio * |E|) edges each; train takes the
/// remainder. Validation negatives avoid every positive edge; test
/// negatives additionally avoid the validation negatives.
pub fn res_split(graph: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (r_train, r_val, r_test) = ratios;
    if r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::InvalidParameter("split ratios must be nonnegative".into()));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_val + r_test
        )));
    }
    let total = graph.num_edges();
    if total < 10 {
        return Err(Error::Infeasible(format!(
            "need at least 10 edges to split, graph has {total}"
        )));
    }
    let n_val = (r_val * total as f64).floor() as usize;
    let n_test = (r_test * total as f64).floor() as usize;
    let n_train = total - n_val - n_test;
    if n_train == 0 {
        return Err(Error::Infeasible(
            "requested ratios leave no training edges".into(),
        ));
    }

    let mut rng = stream_rng(seed, Stream::Split);
    let mut perm: Vec<(u32, u32)> = graph.edges().as_slice().to_vec();
    perm.shuffle(&mut rng);

    let test_pos = EdgeSet::from_pairs(perm[..n_test].iter().copied())?;
    let val_pos = EdgeSet::from_pairs(perm[n_test..n_test + n_val].iter().copied())?;
    let train = EdgeSet::from_pairs(perm[n_test + n_val..].iter().copied())?;

    let n = graph.num_nodes();
    let mut forbidden: HashSet<(u32, u32)> = graph.edges().iter().collect();
    let val_neg = negative_sample(&forbidden, n_val, n, &mut rng)?;
    forbidden.extend(val_neg.iter());
    let test_neg = negative_sample(&forbidden, n_test, n, &mut rng)?;

    Ok(Split {
        train,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
        num_nodes: n,
        seed,
    })
}

fn deal_into_blocks(perm: &[(u32, u32)], k: usize, num_nodes: usize) -> Result<Partition> {
    let total = perm.len();
    let base = total / k;
    let extra = total % k;
    let mut subgraphs = Vec::with_capacity(k);
    let mut start = 0;
    for index in 0..k {
        let size = base + usize::from(index < extra);
        let block = EdgeSet::from_pairs(perm[start..start + size].iter().copied())?;
        subgraphs.push(Subgraph::new(index, num_nodes, block));
        start += size;
    }
    Ok(Partition { subgraphs })
}

/// Static K-way edge-disjoint partition of the training edges: a uniform
/// permutation dealt into K near-equal blocks (sizes differ by at most 1).
pub fn partition_k(train: &EdgeSet, k: usize, num_nodes: usize, seed: u64) -> Result<Partition> {
    let mut rng = stream_rng(seed, Stream::Partition);
    partition_with_rng(train, k, num_nodes, &mut rng)
}

fn partition_with_rng(
    train: &EdgeSet,
    k: usize,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<Partition> {
    if k == 0 {
        return Err(Error::InvalidParameter("partition needs k >= 1".into()));
    }
    if k > train.len() {
        return Err(Error::Infeasible(format!(
            "cannot deal {} edges into {} subgraphs",
            train.len(),
            k
        )));
    }
    let mut perm: Vec<(u32, u32)> = train.as_slice().to_vec();
    perm.shuffle(rng);
    deal_into_blocks(&perm, k, num_nodes)
}

/// Fresh uniformly random subset of ceil(fraction * |train|) edges.
pub fn dynamic_res_sample(
    train: &EdgeSet,
    fraction: f64,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<Subgraph> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let want = ((fraction * train.len() as f64).ceil() as usize).min(train.len());
    let mut perm: Vec<(u32, u32)> = train.as_slice().to_vec();
    let (chosen, _) = perm.partial_shuffle(rng, want);
    let edge_set = EdgeSet::from_pairs(chosen.iter().copied())?;
    Ok(Subgraph::new(0, num_nodes, edge_set))
}

/// Fresh K-way edge-disjoint partition, re-randomized per call.
pub fn dynamic_res_partition(
    train: &EdgeSet,
    k: usize,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<Partition> {
    partition_with_rng(train, k, num_nodes, rng)
}

/// Independently retain each edge with probability 1 - p. Self-loops are
/// never dropped; p = 0 returns the input unchanged without consuming
/// randomness.
pub fn drop_edges(subgraph: &Subgraph, p: f64, rng: &mut Rng) -> Result<Subgraph> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "drop probability must be in [0, 1), got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(subgraph.clone());
    }
    let kept = subgraph
        .edge_set
        .iter()
        .filter(|_| rng.random::<f64>() >= p)
        .collect::<Vec<_>>();
    let edge_set = EdgeSet::from_pairs(kept)?;
    Ok(Subgraph::new(subgraph.index, subgraph.num_nodes, edge_set))
}

/// `count` distinct uniform non-edges (u < v), avoiding `forbidden` and all
/// self-loops. Uses rejection sampling, falling back to exhaustive
/// enumeration of the candidate pool when fewer than 2*count candidates
/// remain (rejection would stall there).
pub fn negative_sample(
    forbidden: &HashSet<(u32, u32)>,
    count: usize,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<EdgeSet> {
    if count == 0 {
        return Ok(EdgeSet::empty());
    }
    let n = num_nodes as u64;
    let total_pairs = n * (n - 1) / 2;
    let forbidden_pairs = forbidden
        .iter()
        .filter(|&&(u, v)| u != v && (u as usize) < num_nodes && (v as usize) < num_nodes)
        .count() as u64;
    let pool = total_pairs.saturating_sub(forbidden_pairs);
    if (count as u64) > pool {
        return Err(Error::Infeasible(format!(
            "requested {count} negatives but only {pool} non-edges exist"
        )));
    }

    if pool < 2 * count as u64 {
        // Small pool: enumerate candidates and draw without replacement.
        let mut candidates = Vec::with_capacity(pool as usize);
        for u in 0..num_nodes as u32 {
            for v in (u + 1)..num_nodes as u32 {
                if !forbidden.contains(&(u, v)) {
                    candidates.push((u, v));
                }
            }
        }
        let (chosen, _) = candidates.partial_shuffle(rng, count);
        return EdgeSet::from_pairs(chosen.iter().copied());
    }

    let mut chosen: HashSet<(u32, u32)> = HashSet::with_capacity(count);
    while chosen.len() < count {
        let a = rng.random_range(0..num_nodes as u32);
        let b = rng.random_range(0..num_nodes as u32);
        if a == b {
            continue;
        }
        let pair = if a < b { (a, b) } else { (b, a) };
        if forbidden.contains(&pair) || chosen.contains(&pair) {
            continue;
        }
        chosen.insert(pair);
    }
    EdgeSet::from_pairs(chosen)
}

/// Uniform random subset of `size` training edges (views from repeated
/// calls may overlap).
pub fn sample_re(
    train: &EdgeSet,
    size: usize,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<Subgraph> {
    if size == 0 || size > train.len() {
        return Err(Error::InvalidParameter(format!(
            "edge sample size {size} out of range 1..={}",
            train.len()
        )));
    }
    let mut perm: Vec<(u32, u32)> = train.as_slice().to_vec();
    let (chosen, _) = perm.partial_shuffle(rng, size);
    Ok(Subgraph::new(0, num_nodes, EdgeSet::from_pairs(chosen.iter().copied())?))
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct WalkStats {
    pub steps: u64,
    pub voluntary_jumps: u64,
    pub forced_jumps: u64,
}

fn rwj_walk(
    neighbors: &[Vec<u32>],
    edge_budget: usize,
    jump_p: f64,
    rng: &mut Rng,
) -> (Vec<(u32, u32)>, WalkStats) {
    let num_nodes = neighbors.len();
    let mut collected: HashSet<(u32, u32)> = HashSet::with_capacity(edge_budget);
    let mut order: Vec<(u32, u32)> = Vec::with_capacity(edge_budget);
    let mut stats = WalkStats::default();
    let mut cur = rng.random_range(0..num_nodes as u32);
    while collected.len() < edge_budget {
        stats.steps += 1;
        if rng.random::<f64>() < jump_p {
            stats.voluntary_jumps += 1;
            cur = rng.random_range(0..num_nodes as u32);
            continue;
        }
        let nbrs = &neighbors[cur as usize];
        if nbrs.is_empty() {
            stats.forced_jumps += 1;
            cur = rng.random_range(0..num_nodes as u32);
            continue;
        }
        let next = nbrs[rng.random_range(0..nbrs.len())];
        let pair = if cur < next { (cur, next) } else { (next, cur) };
        if collected.insert(pair) {
            order.push(pair);
        }
        cur = next;
    }
    (order, stats)
}

/// Random walk with jumps over the training graph: from a uniform start
/// node, each step jumps to a uniform node with probability `jump_p`,
/// otherwise moves to a uniform neighbor and collects the traversed edge,
/// until `edge_budget` distinct edges are gathered. Dead ends force a jump.
pub fn sample_rwj(
    train: &EdgeSet,
    edge_budget: usize,
    num_nodes: usize,
    jump_p: f64,
    rng: &mut Rng,
) -> Result<Subgraph> {
    if edge_budget == 0 || edge_budget > train.len() {
        return Err(Error::InvalidParameter(format!(
            "edge budget {edge_budget} out of range 1..={}",
            train.len()
        )));
    }
    if !(0.0..1.0).contains(&jump_p) {
        return Err(Error::InvalidParameter(format!(
            "jump probability must be in [0, 1), got {jump_p}"
        )));
    }
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
    for (u, v) in train.iter() {
        neighbors[u as usize].push(v);
        neighbors[v as usize].push(u);
    }
    let (edges, _) = rwj_walk(&neighbors, edge_budget, jump_p, rng);
    Ok(Subgraph::new(0, num_nodes, EdgeSet::from_pairs(edges)?))
}

/// Uniform node subset of `node_count` nodes; the view is the subgraph the
/// training edges induce on that subset.
pub fn sample_rn(
    train: &EdgeSet,
    node_count: usize,
    num_nodes: usize,
    rng: &mut Rng,
) -> Result<Subgraph> {
    if node_count == 0 || node_count > num_nodes {
        return Err(Error::InvalidParameter(format!(
            "node sample size {node_count} out of range 1..={num_nodes}"
        )));
    }
    let mut nodes: Vec<u32> = (0..num_nodes as u32).collect();
    let (chosen, _) = nodes.partial_shuffle(rng, node_count);
    let mut keep = vec![false; num_nodes];
    for &u in chosen.iter() {
        keep[u as usize] = true;
    }
    let induced = train
        .iter()
        .filter(|&(u, v)| keep[u as usize] && keep[v as usize])
        .collect::<Vec<_>>();
    Ok(Subgraph::new(0, num_nodes, EdgeSet::from_pairs(induced)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// Cycle graph over n nodes: exactly n edges.
    fn cycle_graph(n: usize) -> Graph {
        let pairs: Vec<(u32, u32)> = (0..n as u32)
            .map(|u| (u, (u + 1) % n as u32))
            .collect();
        build_graph(
            Array2::zeros((n, 2)),
            EdgeSet::from_pairs(pairs).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn res_split_counts_match_ratios() {
        let g = cycle_graph(100);
        let s = res_split(&g, (0.85, 0.05, 0.10), 3).unwrap();
        assert_eq!(s.test_pos.len(), 10);
        assert_eq!(s.val_pos.len(), 5);
        assert_eq!(s.train.len(), 85);
        assert_eq!(s.val_neg.len(), 5);
        assert_eq!(s.test_neg.len(), 10);
    }

    #[test]
    fn res_split_all_train() {
        let g = cycle_graph(20);
        let s = res_split(&g, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(s.train, *g.edges());
        assert!(s.val_pos.is_empty() && s.test_pos.is_empty());
    }

    #[test]
    fn res_split_is_deterministic_in_seed() {
        let g = cycle_graph(60);
        assert_eq!(
            res_split(&g, (0.85, 0.05, 0.10), 9).unwrap(),
            res_split(&g, (0.85, 0.05, 0.10), 9).unwrap()
        );
    }

    #[test]
    fn res_split_reconstructs_source_edges() {
        let g = cycle_graph(57);
        let s = res_split(&g, (0.85, 0.05, 0.10), 5).unwrap();
        let mut all: Vec<(u32, u32)> = s.train.iter().collect();
        all.extend(s.val_pos.iter());
        all.extend(s.test_pos.iter());
        let rebuilt = EdgeSet::from_pairs(all).unwrap();
        assert_eq!(&rebuilt, g.edges());
    }

    #[test]
    fn res_split_negatives_avoid_positives() {
        let g = cycle_graph(40);
        let s = res_split(&g, (0.85, 0.05, 0.10), 7).unwrap();
        for (u, v) in s.val_neg.iter().chain(s.test_neg.iter()) {
            assert!(!g.edges().contains(u, v));
            assert_ne!(u, v);
        }
        for (u, v) in s.test_neg.iter() {
            assert!(!s.val_neg.contains(u, v));
        }
    }

    #[test]
    fn res_split_rejects_tiny_graph() {
        let g = cycle_graph(5);
        assert!(res_split(&g, (0.85, 0.05, 0.10), 0).is_err());
    }

    #[test]
    fn partition_k1_is_identity() {
        let g = cycle_graph(30);
        let p = partition_k(g.edges(), 1, 30, 0).unwrap();
        assert_eq!(p.k(), 1);
        assert_eq!(&p.subgraphs[0].edge_set, g.edges());
    }

    #[test]
    fn partition_block_sizes_use_rounding_rule() {
        let g = cycle_graph(85);
        let p = partition_k(g.edges(), 4, 85, 1).unwrap();
        let sizes: Vec<usize> = p.subgraphs.iter().map(|s| s.num_edges()).collect();
        assert_eq!(sizes, vec![22, 21, 21, 21]);
    }

    #[test]
    fn partition_rejects_k_above_edge_count() {
        let g = cycle_graph(10);
        assert!(partition_k(g.edges(), 11, 10, 0).is_err());
    }

    #[test]
    fn subgraph_adjacency_keeps_all_self_loops() {
        let g = cycle_graph(12);
        let p = partition_k(g.edges(), 3, 12, 2).unwrap();
        for sub in &p.subgraphs {
            for i in 0..12 {
                assert_eq!(sub.adjacency().get(i, i), 1.0);
            }
            assert_eq!(sub.adjacency().nnz(), 12 + 2 * sub.num_edges());
        }
    }

    #[test]
    fn dynamic_sample_full_fraction_is_whole_train() {
        let g = cycle_graph(25);
        let mut rng = stream_rng(0, Stream::Sampler);
        let s = dynamic_res_sample(g.edges(), 1.0, 25, &mut rng).unwrap();
        assert_eq!(&s.edge_set, g.edges());
    }

    #[test]
    fn dynamic_sample_half_of_hundred_is_fifty() {
        let g = cycle_graph(100);
        let mut rng = stream_rng(0, Stream::Sampler);
        let s = dynamic_res_sample(g.edges(), 0.5, 100, &mut rng).unwrap();
        assert_eq!(s.num_edges(), 50);
    }

    #[test]
    fn dynamic_samples_differ_across_calls() {
        let g = cycle_graph(100);
        let mut rng = stream_rng(1, Stream::Sampler);
        let a = dynamic_res_sample(g.edges(), 0.5, 100, &mut rng).unwrap();
        let b = dynamic_res_sample(g.edges(), 0.5, 100, &mut rng).unwrap();
        assert_ne!(a.edge_set, b.edge_set);
    }

    #[test]
    fn dynamic_partition_covers_train_exactly() {
        let g = cycle_graph(41);
        let mut rng = stream_rng(2, Stream::Sampler);
        let p = dynamic_res_partition(g.edges(), 2, 41, &mut rng).unwrap();
        let mut union: Vec<(u32, u32)> = Vec::new();
        for sub in &p.subgraphs {
            union.extend(sub.edge_set.iter());
        }
        assert_eq!(union.len(), g.num_edges());
        assert_eq!(&EdgeSet::from_pairs(union).unwrap(), g.edges());
    }

    #[test]
    fn drop_edges_zero_probability_is_identity() {
        let g = cycle_graph(30);
        let sub = Subgraph::new(0, 30, g.edges().clone());
        let mut rng = stream_rng(3, Stream::DropEdge);
        let dropped = drop_edges(&sub, 0.0, &mut rng).unwrap();
        assert_eq!(dropped, sub);
    }

    #[test]
    fn drop_edges_binomial_bound() {
        let g = cycle_graph(1000);
        let sub = Subgraph::new(0, 1000, g.edges().clone());
        let mut rng = stream_rng(4, Stream::DropEdge);
        let dropped = drop_edges(&sub, 0.2, &mut rng).unwrap();
        // Binomial(1000, 0.8): mean 800, sigma = sqrt(1000*0.8*0.2) = 12.65
        let kept = dropped.num_edges() as f64;
        assert!((kept - 800.0).abs() <= 3.0 * 12.65, "kept {kept}");
    }

    #[test]
    fn drop_edges_preserves_diagonal() {
        let g = cycle_graph(50);
        let sub = Subgraph::new(0, 50, g.edges().clone());
        let mut rng = stream_rng(5, Stream::DropEdge);
        for &p in &[0.1, 0.5, 0.9] {
            let dropped = drop_edges(&sub, p, &mut rng).unwrap();
            for i in 0..50 {
                assert_eq!(dropped.adjacency().get(i, i), 1.0);
            }
            assert_eq!(dropped.num_nodes, 50);
        }
    }

    #[test]
    fn negative_sample_forced_last_pair() {
        // complete graph on 4 nodes minus (1, 3)
        let mut forbidden = HashSet::new();
        for u in 0..4u32 {
            for v in (u + 1)..4 {
                if (u, v) != (1, 3) {
                    forbidden.insert((u, v));
                }
            }
        }
        let mut rng = stream_rng(6, Stream::NegSample);
        let negs = negative_sample(&forbidden, 1, 4, &mut rng).unwrap();
        assert_eq!(negs.as_slice(), &[(1, 3)]);
    }

    #[test]
    fn negative_sample_matches_requested_count() {
        let g = cycle_graph(30);
        let forbidden: HashSet<(u32, u32)> = g.edges().iter().collect();
        let mut rng = stream_rng(7, Stream::NegSample);
        let negs = negative_sample(&forbidden, 30, 30, &mut rng).unwrap();
        assert_eq!(negs.len(), 30);
        for (u, v) in negs.iter() {
            assert!(!forbidden.contains(&(u, v)));
        }
    }

    #[test]
    fn negative_sample_infeasible_count_rejected() {
        let forbidden = HashSet::new();
        let mut rng = stream_rng(8, Stream::NegSample);
        assert!(negative_sample(&forbidden, 7, 4, &mut rng).is_err());
    }

    #[test]
    fn negative_sample_is_uniform_chi_squared() {
        // 6 nodes, forbid a 5-cycle: pool = 15 - 5 = 10 pairs
        let pairs: Vec<(u32, u32)> = (0..5u32).map(|u| (u, (u + 1) % 5)).collect();
        let forbidden: HashSet<(u32, u32)> =
            EdgeSet::from_pairs(pairs).unwrap().iter().collect();
        let mut rng = stream_rng(9, Stream::NegSample);
        let mut counts: std::collections::HashMap<(u32, u32), u64> = Default::default();
        let draws = 100_000;
        for _ in 0..draws {
            let negs = negative_sample(&forbidden, 1, 6, &mut rng).unwrap();
            *counts.entry(negs.as_slice()[0]).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-squared critical value, 9 degrees of freedom at the 0.01 level
        let critical = statrs::distribution::ContinuousCDF::inverse_cdf(
            &statrs::distribution::ChiSquared::new(9.0).unwrap(),
            0.99,
        );
        assert!(chi2 <= critical, "chi2 {chi2} > {critical}");
    }

    #[test]
    fn sample_re_full_size_is_train() {
        let g = cycle_graph(20);
        let mut rng = stream_rng(10, Stream::Sampler);
        let s = sample_re(g.edges(), 20, 20, &mut rng).unwrap();
        assert_eq!(&s.edge_set, g.edges());
    }

    #[test]
    fn sample_rn_with_all_nodes_is_full_graph() {
        let g = cycle_graph(15);
        let mut rng = stream_rng(11, Stream::Sampler);
        let s = sample_rn(g.edges(), 15, 15, &mut rng).unwrap();
        assert_eq!(&s.edge_set, g.edges());
    }

    #[test]
    fn sample_rwj_collects_requested_budget() {
        let g = cycle_graph(40);
        let mut rng = stream_rng(12, Stream::Sampler);
        let s = sample_rwj(g.edges(), 20, 40, 0.1, &mut rng).unwrap();
        assert_eq!(s.num_edges(), 20);
        for (u, v) in s.edge_set.iter() {
            assert!(g.edges().contains(u, v));
        }
    }

    #[test]
    fn rwj_voluntary_jump_rate_near_configured() {
        let g = cycle_graph(200);
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); 200];
        for (u, v) in g.edges().iter() {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        let mut rng = stream_rng(13, Stream::Sampler);
        let mut steps = 0u64;
        let mut jumps = 0u64;
        while steps < 100_000 {
            let (_, stats) = rwj_walk(&neighbors, 150, 0.1, &mut rng);
            steps += stats.steps;
            jumps += stats.voluntary_jumps;
        }
        let rate = jumps as f64 / steps as f64;
        assert!((rate - 0.1).abs() <= 0.01, "jump rate {rate}");
    }

    #[test]
    fn rwj_dead_end_forces_jump() {
        // single edge in a 5-node graph: walk must jump to make progress
        let train = EdgeSet::from_pairs([(0u32, 1u32)]).unwrap();
        let mut rng = stream_rng(14, Stream::Sampler);
        let s = sample_rwj(&train, 1, 5, 0.1, &mut rng).unwrap();
        assert_eq!(s.edge_set.as_slice(), &[(0, 1)]);
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_covering_balanced(
            n in 12usize..120,
            k in 1usize..9,
            seed in 0u64..1000,
        ) {
            prop_assume!(k <= n);
            let g = cycle_graph(n);
            let p = partition_k(g.edges(), k, n, seed).unwrap();
            prop_assert_eq!(p.k(), k);
            let sizes: Vec<usize> = p.subgraphs.iter().map(|s| s.num_edges()).collect();
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            prop_assert!(max - min <= 1);
            let mut seen = HashSet::new();
            for sub in &p.subgraphs {
                for e in sub.edge_set.iter() {
                    prop_assert!(seen.insert(e), "duplicate edge across blocks");
                }
            }
            prop_assert_eq!(seen.len(), g.num_edges());
        }
    }
}
