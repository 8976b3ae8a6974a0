//! Core graph data model and sparse kernels.
//!
//! A [`Graph`] couples a dense node-feature matrix with a sparse symmetric
//! 0/1 adjacency that always carries a unit diagonal, so isolated nodes still
//! propagate their own features. Adjacency storage is compressed sparse row
//! with sorted column indices; all kernels accumulate in ascending column
//! order, which makes results bit-reproducible across runs.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Canonical undirected edge list: pairs (u, v) with u < v, sorted, deduped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSet {
    edges: Vec<(u32, u32)>,
}

impl EdgeSet {
    /// Build from arbitrary pairs. Orientation is normalized to u < v,
    /// duplicates are removed, self-loops are rejected with the offending
    /// input index.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut edges = Vec::new();
        for (index, (u, v)) in pairs.into_iter().enumerate() {
            if u == v {
                return Err(Error::SelfLoop { index, node: u });
            }
            edges.push(if u < v { (u, v) } else { (v, u) });
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(EdgeSet { edges })
    }

    pub fn empty() -> Self {
        EdgeSet { edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn as_slice(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Largest node id referenced, or None when empty.
    pub fn max_node(&self) -> Option<u32> {
        self.edges.iter().map(|&(u, v)| u.max(v)).max()
    }
}

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// 0/1 adjacency from an edge set, with a unit diagonal on every node.
    pub fn adjacency(num_nodes: usize, edges: &EdgeSet) -> Self {
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges.iter() {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        let mut col_idx = Vec::with_capacity(2 * edges.len() + num_nodes);
        row_ptr.push(0);
        for (i, mut row) in neighbors.into_iter().enumerate() {
            row.push(i as u32);
            row.sort_unstable();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let values = vec![1.0; col_idx.len()];
        CsrMatrix {
            nrows: num_nodes,
            ncols: num_nodes,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j as usize)] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.get(j as usize, i) != v {
                    return false;
                }
            }
        }
        true
    }

    /// Sparse-dense product, accumulating columns in ascending index order.
    fn matmul_dense(&self, dense: ArrayView2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "sparse is {}x{}, dense has {} rows",
                self.nrows,
                self.ncols,
                dense.nrows()
            )));
        }
        let c = dense.ncols();
        let mut out = Array2::zeros((self.nrows, c));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &dense.row(j as usize));
            }
        }
        Ok(out)
    }
}

/// Symmetrically normalized adjacency: entry (i,j) = A[i][j] / sqrt(d_i d_j)
/// with degrees counting the self-loop.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows
    }

    /// Propagate a dense matrix: out = A_norm * dense.
    pub fn spmm(&self, dense: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.matrix.matmul_dense(dense)
    }
}

/// Symmetric renormalization D^{-1/2} A D^{-1/2}. The unit diagonal
/// guarantees every degree is at least 1.
pub fn normalize_adjacency(adjacency: &CsrMatrix) -> NormalizedAdjacency {
    debug_assert!(adjacency.is_symmetric());
    let degrees: Vec<f64> = (0..adjacency.nrows).map(|i| adjacency.row_sum(i)).collect();
    let mut norm = adjacency.clone();
    for i in 0..norm.nrows {
        let span = norm.row_ptr[i]..norm.row_ptr[i + 1];
        for idx in span {
            let j = norm.col_idx[idx] as usize;
            // entry = A_ij / sqrt(d_i * d_j); the product commutes, so the
            // result is bitwise symmetric
            norm.values[idx] /= (degrees[i] * degrees[j]).sqrt();
        }
    }
    NormalizedAdjacency { matrix: norm }
}

/// Node-feature matrix plus symmetric 0/1 adjacency with unit diagonal.
#[derive(Clone, Debug)]
pub struct Graph {
    features: Array2<f64>,
    adjacency: CsrMatrix,
    edges: EdgeSet,
    labels: Option<Vec<u32>>,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Off-diagonal edges in canonical order.
    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }
}

/// Assemble a graph, validating edge endpoints and feature finiteness.
/// The adjacency is symmetrized, deduplicated, and given a unit diagonal.
pub fn build_graph(
    features: Array2<f64>,
    edges: EdgeSet,
    labels: Option<Vec<u32>>,
) -> Result<Graph> {
    let num_nodes = features.nrows();
    for (index, (u, v)) in edges.iter().enumerate() {
        let worst = u.max(v);
        if worst as usize >= num_nodes {
            return Err(Error::NodeOutOfRange {
                index,
                node: worst,
                num_nodes,
            });
        }
    }
    for ((row, col), &x) in features.indexed_iter() {
        if !x.is_finite() {
            return Err(Error::NonFiniteFeature { row, col });
        }
    }
    if let Some(ref l) = labels {
        if l.len() != num_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                l.len(),
                num_nodes
            )));
        }
    }
    let adjacency = CsrMatrix::adjacency(num_nodes, &edges);
    Ok(Graph {
        features,
        adjacency,
        edges,
        labels,
    })
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(graph: &Graph) -> Result<f64> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::MissingLabels("edge_homophily requires node labels".into()))?;
    if graph.edges.is_empty() {
        return Err(Error::Infeasible(
            "edge_homophily undefined on an edgeless graph".into(),
        ));
    }
    let same = graph
        .edges
        .iter()
        .filter(|&(u, v)| labels[u as usize] == labels[v as usize])
        .count();
    Ok(same as f64 / graph.edges.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn simple_graph(n: usize, pairs: &[(u32, u32)]) -> Graph {
        let features = Array2::zeros((n, 2));
        build_graph(features, EdgeSet::from_pairs(pairs.iter().copied()).unwrap(), None).unwrap()
    }

    #[test]
    fn two_node_edge_gives_all_ones_adjacency() {
        let g = simple_graph(2, &[(0, 1)]);
        assert_eq!(g.adjacency().to_dense(), array![[1.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn reversed_duplicate_is_deduplicated() {
        let g = simple_graph(3, &[(0, 1), (1, 0)]);
        assert_eq!(g.num_edges(), 1);
        // 3 diagonal + 2 off-diagonal nonzeros
        assert_eq!(g.adjacency().nnz(), 5);
    }

    #[test]
    fn out_of_range_edge_reports_index() {
        let features = Array2::zeros((2, 1));
        let edges = EdgeSet::from_pairs([(0, 1), (1, 5)]).unwrap();
        match build_graph(features, edges, None) {
            Err(Error::NodeOutOfRange { index, node, .. }) => {
                assert_eq!(node, 5);
                assert_eq!(index, 1);
            }
            other => panic!("expected NodeOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_feature_rejected() {
        let mut features = Array2::zeros((2, 2));
        features[(1, 0)] = f64::NAN;
        let err = build_graph(features, EdgeSet::empty(), None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { row: 1, col: 0 }));
    }

    #[test]
    fn self_loop_rejected_with_index() {
        let err = EdgeSet::from_pairs([(0, 1), (2, 2)]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { index: 1, node: 2 }));
    }

    #[test]
    fn normalize_two_node_single_edge() {
        let g = simple_graph(2, &[(0, 1)]);
        let norm = normalize_adjacency(g.adjacency());
        // degrees are (2, 2) so every entry is 0.5
        let dense = norm.matrix().to_dense();
        for &v in dense.iter() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn normalize_isolated_node_row_is_identity() {
        let g = simple_graph(3, &[(0, 1)]);
        let norm = normalize_adjacency(g.adjacency());
        assert_eq!(norm.matrix().get(2, 2), 1.0);
        assert_eq!(norm.matrix().row(2).0, &[2]);
    }

    #[test]
    fn normalize_star_graph() {
        // center 0 with leaves 1..3: center degree 4, leaf degree 2
        let g = simple_graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let norm = normalize_adjacency(g.adjacency());
        let expected = 1.0 / (4.0f64 * 2.0).sqrt();
        for leaf in 1..4 {
            assert!((norm.matrix().get(0, leaf) - expected).abs() < 1e-15);
            assert_eq!(norm.matrix().get(0, leaf), norm.matrix().get(leaf, 0));
        }
    }

    #[test]
    fn normalized_output_is_bitwise_symmetric() {
        let g = simple_graph(6, &[(0, 1), (0, 2), (1, 4), (3, 4), (2, 5)]);
        let norm = normalize_adjacency(g.adjacency());
        let m = norm.matrix();
        for i in 0..6 {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                assert_eq!(m.get(j as usize, i).to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn spmm_identity_adjacency_is_identity_map() {
        let g = simple_graph(3, &[]);
        let norm = normalize_adjacency(g.adjacency());
        let m = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(norm.spmm(m.view()).unwrap(), m);
    }

    #[test]
    fn spmm_two_node_edge() {
        let g = simple_graph(2, &[(0, 1)]);
        let norm = normalize_adjacency(g.adjacency());
        let out = norm.spmm(array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_eq!(out, array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn spmm_rejects_dimension_mismatch() {
        let g = simple_graph(3, &[(0, 1)]);
        let norm = normalize_adjacency(g.adjacency());
        let bad = Array2::<f64>::zeros((2, 4));
        assert!(matches!(
            norm.spmm(bad.view()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn spmm_matches_dense_oracle_on_random_graph() {
        let mut rng = crate::rng::stream_rng(11, crate::rng::Stream::Sampler);
        let mut pairs = Vec::new();
        for u in 0..10u32 {
            for v in (u + 1)..10 {
                if rng.random::<f64>() < 0.3 {
                    pairs.push((u, v));
                }
            }
        }
        let g = simple_graph(10, &pairs);
        let norm = normalize_adjacency(g.adjacency());
        let dense_in = Array2::from_shape_fn((10, 4), |_| rng.random::<f64>() - 0.5);
        let sparse_out = norm.spmm(dense_in.view()).unwrap();
        let dense_out = norm.matrix().to_dense().dot(&dense_in);
        for (a, b) in sparse_out.iter().zip(dense_out.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn homophily_uniform_labels_is_one() {
        let features = Array2::zeros((3, 1));
        let edges = EdgeSet::from_pairs([(0, 1), (1, 2)]).unwrap();
        let g = build_graph(features, edges, Some(vec![4, 4, 4])).unwrap();
        assert_eq!(edge_homophily(&g).unwrap(), 1.0);
    }

    #[test]
    fn homophily_bipartite_different_labels_is_zero() {
        let features = Array2::zeros((4, 1));
        let edges = EdgeSet::from_pairs([(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let g = build_graph(features, edges, Some(vec![0, 0, 1, 1])).unwrap();
        assert_eq!(edge_homophily(&g).unwrap(), 0.0);
    }

    #[test]
    fn homophily_requires_labels() {
        let g = simple_graph(2, &[(0, 1)]);
        assert!(matches!(edge_homophily(&g), Err(Error::MissingLabels(_))));
    }

    #[test]
    fn rebuild_from_exported_edges_is_identity() {
        let g = simple_graph(5, &[(0, 3), (1, 2), (2, 4)]);
        let rebuilt = build_graph(
            g.features().to_owned(),
            EdgeSet::from_pairs(g.edges().iter()).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(g.adjacency(), rebuilt.adjacency());
    }

    proptest! {
        #[test]
        fn spmm_agrees_with_dense_product(
            n in 2usize..50,
            cols in 1usize..6,
            seed in 0u64..500,
        ) {
            let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Sampler);
            let mut pairs = Vec::new();
            for u in 0..n as u32 {
                for v in (u + 1)..n as u32 {
                    if rng.random::<f64>() < 0.2 {
                        pairs.push((u, v));
                    }
                }
            }
            let features = Array2::zeros((n, 1));
            let g = build_graph(features, EdgeSet::from_pairs(pairs).unwrap(), None).unwrap();
            let norm = normalize_adjacency(g.adjacency());
            let dense_in = Array2::from_shape_fn((n, cols), |_| rng.random::<f64>() * 2.0 - 1.0);
            let sparse_out = norm.spmm(dense_in.view()).unwrap();
            let dense_out = norm.matrix().to_dense().dot(&dense_in);
            for (a, b) in sparse_out.iter().zip(dense_out.iter()) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }
}
