//! Minimal reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records the forward computation of one training step as a flat
//! list of nodes (parents always precede children), then walks it backwards
//! to accumulate exact gradients for every leaf marked as a parameter. The
//! op set is exactly what the encoders and losses need: dense matmul,
//! sparse propagation with a constant symmetric matrix, relu, row
//! normalization, edge-logit gathering, the binary cross-entropy head, and
//! the temperature-scaled contrastive head.

use std::rc::Rc;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::loss::{sigmoid, softplus, NORM_EPS};

pub type NodeId = usize;

enum Op {
    Leaf,
    /// C = A . B
    MatMul(NodeId, NodeId),
    /// C = A . B^T
    MatMulNT(NodeId, NodeId),
    /// C = S . B with S a constant symmetric normalized adjacency
    Spmm(Rc<NormalizedAdjacency>, NodeId),
    Relu(NodeId),
    /// Row-wise L2 normalization; rows under the norm guard become zero.
    RowNormalize(NodeId),
    /// Rows of `a` stacked on rows of `b`.
    ConcatRows(NodeId, NodeId),
    /// Broadcast-add a 1 x c bias row to every row.
    AddBias(NodeId, NodeId),
    /// (E, 1) logits: row e = z[u_e] . z[v_e].
    GatherDot(NodeId, Rc<Vec<(u32, u32)>>),
    /// (1, 1) loss: mean of softplus(-pos) and softplus(neg) over 2n terms.
    BceFromLogits { pos: NodeId, neg: NodeId },
    /// (1, 1) contrastive loss from a (2n, 2n) cosine-similarity matrix.
    NtxentFromSim {
        sim: NodeId,
        tau: f64,
        include_intra_view: bool,
    },
    /// Weighted sum of same-shaped nodes.
    LinComb(Vec<(NodeId, f64)>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    /// Constant input (no gradient).
    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable parameter leaf.
    pub fn parameter(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value);
        let grad = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a, b), grad)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a].value.dot(&self.nodes[b].value.t());
        let grad = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMulNT(a, b), grad)
    }

    pub fn spmm(&mut self, adj: &Rc<NormalizedAdjacency>, b: NodeId) -> Result<NodeId> {
        let value = adj.spmm(self.nodes[b].value.view())?;
        let grad = self.needs(b);
        Ok(self.push(value, Op::Spmm(Rc::clone(adj), b), grad))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.mapv(|x| x.max(0.0));
        let grad = self.needs(a);
        self.push(value, Op::Relu(a), grad)
    }

    pub fn row_normalize(&mut self, a: NodeId) -> NodeId {
        let (value, _) = crate::loss::row_l2_normalize(self.nodes[a].value.view(), NORM_EPS);
        let grad = self.needs(a);
        self.push(value, Op::RowNormalize(a), grad)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.ncols(), vb.ncols(), "concat_rows column mismatch");
        let mut value = Array2::zeros((va.nrows() + vb.nrows(), va.ncols()));
        value.slice_mut(s![..va.nrows(), ..]).assign(va);
        value.slice_mut(s![va.nrows().., ..]).assign(vb);
        let grad = self.needs(a) || self.needs(b);
        self.push(value, Op::ConcatRows(a, b), grad)
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let b = &self.nodes[bias].value;
        assert_eq!(b.nrows(), 1, "bias must be a single row");
        let value = &self.nodes[a].value + &b.row(0);
        let grad = self.needs(a) || self.needs(bias);
        self.push(value, Op::AddBias(a, bias), grad)
    }

    pub fn gather_dot(&mut self, z: NodeId, pairs: Rc<Vec<(u32, u32)>>) -> NodeId {
        let zv = &self.nodes[z].value;
        let mut value = Array2::zeros((pairs.len(), 1));
        for (e, &(u, v)) in pairs.iter().enumerate() {
            value[(e, 0)] = zv.row(u as usize).dot(&zv.row(v as usize));
        }
        let grad = self.needs(z);
        self.push(value, Op::GatherDot(z, pairs), grad)
    }

    /// l = (1 / 2n) * sum_i [softplus(-pos_i) + softplus(neg_i)], the
    /// binary cross-entropy of Bernoulli targets 1 / 0 on logits.
    pub fn bce_from_logits(&mut self, pos: NodeId, neg: NodeId) -> NodeId {
        let (p, q) = (&self.nodes[pos].value, &self.nodes[neg].value);
        assert_eq!(p.len(), q.len(), "positive/negative count mismatch");
        let n = p.len();
        let mut acc = 0.0;
        for (&a, &b) in p.iter().zip(q.iter()) {
            acc += softplus(-a) + softplus(b);
        }
        let value = Array2::from_elem((1, 1), acc / (2.0 * n as f64));
        let grad = self.needs(pos) || self.needs(neg);
        self.push(value, Op::BceFromLogits { pos, neg }, grad)
    }

    fn ntxent_mask(i: usize, k: usize, n: usize, include_intra_view: bool) -> bool {
        k != i && (include_intra_view || ((k < n) != (i < n)))
    }

    /// Contrastive loss from a (2n, 2n) similarity matrix where rows 0..n
    /// are one view and rows n..2n the other; anchor i pairs with
    /// (i + n) mod 2n.
    pub fn ntxent_from_sim(&mut self, sim: NodeId, tau: f64, include_intra_view: bool) -> NodeId {
        let s = &self.nodes[sim].value;
        let rows = s.nrows();
        assert_eq!(rows % 2, 0, "similarity matrix must have even dimension");
        assert_eq!(rows, s.ncols());
        let n = rows / 2;
        let mut total = 0.0;
        for i in 0..rows {
            let partner = (i + n) % rows;
            let mut max = f64::NEG_INFINITY;
            for k in 0..rows {
                if Self::ntxent_mask(i, k, n, include_intra_view) {
                    max = max.max(s[(i, k)] / tau);
                }
            }
            let mut denom = 0.0;
            for k in 0..rows {
                if Self::ntxent_mask(i, k, n, include_intra_view) {
                    denom += (s[(i, k)] / tau - max).exp();
                }
            }
            total += max + denom.ln() - s[(i, partner)] / tau;
        }
        let value = Array2::from_elem((1, 1), total / rows as f64);
        let grad = self.needs(sim);
        self.push(
            value,
            Op::NtxentFromSim {
                sim,
                tau,
                include_intra_view,
            },
            grad,
        )
    }

    pub fn lincomb(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        assert!(!terms.is_empty());
        let mut value = &self.nodes[terms[0].0].value * terms[0].1;
        for &(id, w) in &terms[1..] {
            value.scaled_add(w, &self.nodes[id].value);
        }
        let grad = terms.iter().any(|&(id, _)| self.needs(id));
        self.push(value, Op::LinComb(terms.to_vec()), grad)
    }

    /// Scalar value of a (1, 1) node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        assert_eq!(v.dim(), (1, 1));
        v[(0, 0)]
    }

    /// Reverse pass from a scalar loss node. Returns per-node gradients for
    /// every node on a parameter path; rejects non-finite loss values.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = &self.nodes[loss].value;
        if lv.dim() != (1, 1) {
            return Err(Error::DimensionMismatch(
                "backward expects a scalar (1x1) loss node".into(),
            ));
        }
        if !lv[(0, 0)].is_finite() {
            return Err(Error::NonFinite(format!(
                "loss value {} before backward pass",
                lv[(0, 0)]
            )));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Array2::from_elem((1, 1), 1.0));

        for id in (0..=loss).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(&self.nodes[*b].value.t());
                        accumulate(&mut grads[*a], da);
                    }
                    if self.needs(*b) {
                        let db = self.nodes[*a].value.t().dot(&g);
                        accumulate(&mut grads[*b], db);
                    }
                }
                Op::MatMulNT(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(&self.nodes[*b].value);
                        accumulate(&mut grads[*a], da);
                    }
                    if self.needs(*b) {
                        let db = g.t().dot(&self.nodes[*a].value);
                        accumulate(&mut grads[*b], db);
                    }
                }
                Op::Spmm(adj, b) => {
                    if self.needs(*b) {
                        // adjacency is symmetric, so S^T g = S g
                        let db = adj.spmm(g.view())?;
                        accumulate(&mut grads[*b], db);
                    }
                }
                Op::Relu(a) => {
                    if self.needs(*a) {
                        let mut da = g;
                        ndarray::Zip::from(&mut da)
                            .and(&self.nodes[*a].value)
                            .for_each(|d, &x| {
                                if x <= 0.0 {
                                    *d = 0.0;
                                }
                            });
                        accumulate(&mut grads[*a], da);
                    }
                }
                Op::RowNormalize(a) => {
                    if self.needs(*a) {
                        let x = &self.nodes[*a].value;
                        let mut da = Array2::zeros(x.dim());
                        for (r, x_row) in x.rows().into_iter().enumerate() {
                            let norm = x_row.dot(&x_row).sqrt();
                            if norm < NORM_EPS {
                                continue; // guarded rows carry no gradient
                            }
                            let g_row = g.row(r);
                            let proj = x_row.dot(&g_row) / (norm * norm * norm);
                            let mut d_row = da.row_mut(r);
                            for j in 0..x.ncols() {
                                d_row[j] = g_row[j] / norm - x_row[j] * proj;
                            }
                        }
                        accumulate(&mut grads[*a], da);
                    }
                }
                Op::ConcatRows(a, b) => {
                    let na = self.nodes[*a].value.nrows();
                    if self.needs(*a) {
                        accumulate(&mut grads[*a], g.slice(s![..na, ..]).to_owned());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[*b], g.slice(s![na.., ..]).to_owned());
                    }
                }
                Op::AddBias(a, bias) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[*a], g.clone());
                    }
                    if self.needs(*bias) {
                        let col_sums = g.sum_axis(ndarray::Axis(0));
                        let db = col_sums.insert_axis(ndarray::Axis(0));
                        accumulate(&mut grads[*bias], db);
                    }
                }
                Op::GatherDot(z, pairs) => {
                    if self.needs(*z) {
                        let zv = &self.nodes[*z].value;
                        let mut dz = Array2::zeros(zv.dim());
                        for (e, &(u, v)) in pairs.iter().enumerate() {
                            let ge = g[(e, 0)];
                            let (u, v) = (u as usize, v as usize);
                            let zu = zv.row(u).to_owned();
                            dz.row_mut(u).scaled_add(ge, &zv.row(v));
                            dz.row_mut(v).scaled_add(ge, &zu);
                        }
                        accumulate(&mut grads[*z], dz);
                    }
                }
                Op::BceFromLogits { pos, neg } => {
                    let upstream = g[(0, 0)];
                    let n = self.nodes[*pos].value.len() as f64;
                    let scale = upstream / (2.0 * n);
                    if self.needs(*pos) {
                        let dp = self.nodes[*pos].value.mapv(|x| scale * (sigmoid(x) - 1.0));
                        accumulate(&mut grads[*pos], dp);
                    }
                    if self.needs(*neg) {
                        let dq = self.nodes[*neg].value.mapv(|x| scale * sigmoid(x));
                        accumulate(&mut grads[*neg], dq);
                    }
                }
                Op::NtxentFromSim {
                    sim,
                    tau,
                    include_intra_view,
                } => {
                    if self.needs(*sim) {
                        let sv = &self.nodes[*sim].value;
                        let rows = sv.nrows();
                        let n = rows / 2;
                        let upstream = g[(0, 0)] / rows as f64;
                        let mut ds = Array2::zeros(sv.dim());
                        for i in 0..rows {
                            let partner = (i + n) % rows;
                            let mut max = f64::NEG_INFINITY;
                            for k in 0..rows {
                                if Self::ntxent_mask(i, k, n, *include_intra_view) {
                                    max = max.max(sv[(i, k)] / tau);
                                }
                            }
                            let mut denom = 0.0;
                            for k in 0..rows {
                                if Self::ntxent_mask(i, k, n, *include_intra_view) {
                                    denom += (sv[(i, k)] / tau - max).exp();
                                }
                            }
                            for k in 0..rows {
                                if Self::ntxent_mask(i, k, n, *include_intra_view) {
                                    let w = (sv[(i, k)] / tau - max).exp() / denom;
                                    ds[(i, k)] += upstream * w / tau;
                                }
                            }
                            ds[(i, partner)] -= upstream / tau;
                        }
                        accumulate(&mut grads[*sim], ds);
                    }
                }
                Op::LinComb(terms) => {
                    for &(t, w) in terms {
                        if self.needs(t) {
                            accumulate(&mut grads[t], &g * w);
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &delta,
        None => *slot = Some(delta),
    }
}

/// Gradients keyed by node id, as produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of a leaf, zero-shaped if the loss never touched it.
    pub fn take(&mut self, id: NodeId, shape: (usize, usize)) -> Array2<f64> {
        self.grads[id]
            .take()
            .unwrap_or_else(|| Array2::zeros(shape))
    }
}
