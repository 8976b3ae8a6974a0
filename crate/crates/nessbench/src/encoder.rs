//! Encoder forward passes (plain and taped), the contrastive projection
//! head, parameter initialization, gradient extraction, and checkpoint IO.
//!
//! Three parameter-shared encoders over a normalized adjacency A:
//! - gcn:  z = A . relu(A . X . W1) . W2      (hidden 64, output 32)
//! - lin:  z = A . X . W                       (single layer, output 32)
//! - gnae: h = X . W, rows L2-normalized, z = A . h
//!
//! Evaluation order is fixed (feature transform, then propagation, then
//! bias, then activation) so repeated forwards are bit-identical.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::rc::Rc;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::sha256_hex;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::loss::row_l2_normalize;
use crate::rng::Rng;
use crate::tape::{Gradients, NodeId, Tape};

/// Output embedding width of every encoder.
pub const LATENT_DIM: usize = 32;
/// Hidden width of the two-layer convolutional encoder.
pub const GCN_HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Lin,
    Gnae,
}

impl EncoderKind {
    pub fn layer_dims(self, feature_dim: usize) -> Vec<(usize, usize)> {
        match self {
            EncoderKind::Gcn => vec![(feature_dim, GCN_HIDDEN), (GCN_HIDDEN, LATENT_DIM)],
            EncoderKind::Lin | EncoderKind::Gnae => vec![(feature_dim, LATENT_DIM)],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Lin => "lin",
            EncoderKind::Gnae => "gnae",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(EncoderKind::Gcn),
            "lin" => Ok(EncoderKind::Lin),
            "gnae" => Ok(EncoderKind::Gnae),
            other => Err(Error::InvalidConfig(format!("unknown encoder {other:?}"))),
        }
    }
}

/// Glorot-uniform matrix: entries in +-sqrt(6 / (fan_in + fan_out)),
/// drawn row-major.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 * limit - limit)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub kind: EncoderKind,
    pub weights: Vec<Array2<f64>>,
    /// One 1 x out_dim row per layer when biases are enabled.
    pub biases: Option<Vec<Array2<f64>>>,
}

impl EncoderParams {
    pub fn init(kind: EncoderKind, feature_dim: usize, use_bias: bool, rng: &mut Rng) -> Self {
        let dims = kind.layer_dims(feature_dim);
        let weights = dims
            .iter()
            .map(|&(r, c)| glorot_uniform(r, c, rng))
            .collect();
        let biases =
            use_bias.then(|| dims.iter().map(|&(_, c)| Array2::zeros((1, c))).collect());
        EncoderParams {
            kind,
            weights,
            biases,
        }
    }
}

/// Two-layer projection head for the contrastive branch:
/// h = relu(z . W1) . W2.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl ProjectionParams {
    pub fn init(rng: &mut Rng) -> Self {
        ProjectionParams {
            w1: glorot_uniform(LATENT_DIM, LATENT_DIM, rng),
            w2: glorot_uniform(LATENT_DIM, LATENT_DIM, rng),
        }
    }
}

/// Every trainable matrix of a model, in a fixed flattening order
/// (encoder weights, encoder biases, projection weights).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub projection: Option<ProjectionParams>,
}

impl ModelParams {
    pub fn flat(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (i, w) in self.encoder.weights.iter().enumerate() {
            out.push((format!("enc_w{i}"), w));
        }
        if let Some(ref biases) = self.encoder.biases {
            for (i, b) in biases.iter().enumerate() {
                out.push((format!("enc_b{i}"), b));
            }
        }
        if let Some(ref p) = self.projection {
            out.push(("proj_w0".into(), &p.w1));
            out.push(("proj_w1".into(), &p.w2));
        }
        out
    }

    pub fn flat_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = Vec::new();
        for w in self.encoder.weights.iter_mut() {
            out.push(w);
        }
        if let Some(ref mut biases) = self.encoder.biases {
            for b in biases.iter_mut() {
                out.push(b);
            }
        }
        if let Some(ref mut p) = self.projection {
            out.push(&mut p.w1);
            out.push(&mut p.w2);
        }
        out
    }

    pub fn num_matrices(&self) -> usize {
        self.flat().len()
    }
}

fn check_forward_shapes(
    params: &EncoderParams,
    x: ArrayView2<f64>,
    adj: &NormalizedAdjacency,
) -> Result<()> {
    if adj.num_nodes() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency over {} nodes but features have {} rows",
            adj.num_nodes(),
            x.nrows()
        )));
    }
    let expect = params.weights[0].nrows();
    if x.ncols() != expect {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, first layer expects {expect}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Forward evaluation producing the N x 32 embedding.
pub fn encoder_forward(
    params: &EncoderParams,
    x: ArrayView2<f64>,
    adj: &NormalizedAdjacency,
) -> Result<Array2<f64>> {
    check_forward_shapes(params, x, adj)?;
    let bias = |layer: usize, m: Array2<f64>| -> Array2<f64> {
        match &params.biases {
            Some(bs) => m + &bs[layer].row(0),
            None => m,
        }
    };
    match params.kind {
        EncoderKind::Gcn => {
            let h = adj.spmm(x.dot(&params.weights[0]).view())?;
            let h = bias(0, h).mapv(|v| v.max(0.0));
            let z = adj.spmm(h.dot(&params.weights[1]).view())?;
            Ok(bias(1, z))
        }
        EncoderKind::Lin => {
            let z = adj.spmm(x.dot(&params.weights[0]).view())?;
            Ok(bias(0, z))
        }
        EncoderKind::Gnae => {
            let h = bias(0, x.dot(&params.weights[0]));
            let (hn, _) = row_l2_normalize(h.view(), crate::loss::NORM_EPS);
            adj.spmm(hn.view())
        }
    }
}

/// Projection-head forward: h = relu(z . W1) . W2.
pub fn projection_forward(params: &ProjectionParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    if z.ncols() != params.w1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "projection expects width {}, embedding has {}",
            params.w1.nrows(),
            z.ncols()
        )));
    }
    Ok(z.dot(&params.w1).mapv(|v| v.max(0.0)).dot(&params.w2))
}

/// Tape leaves for one model, registered once per step so every subgraph
/// forward shares the same parameter nodes.
pub struct TapedParams {
    pub enc_weights: Vec<NodeId>,
    pub enc_biases: Option<Vec<NodeId>>,
    pub proj: Option<(NodeId, NodeId)>,
    kind: EncoderKind,
}

impl TapedParams {
    pub fn register(tape: &mut Tape, params: &ModelParams) -> TapedParams {
        let enc_weights = params
            .encoder
            .weights
            .iter()
            .map(|w| tape.parameter(w.clone()))
            .collect();
        let enc_biases = params
            .encoder
            .biases
            .as_ref()
            .map(|bs| bs.iter().map(|b| tape.parameter(b.clone())).collect());
        let proj = params
            .projection
            .as_ref()
            .map(|p| (tape.parameter(p.w1.clone()), tape.parameter(p.w2.clone())));
        TapedParams {
            enc_weights,
            enc_biases,
            proj,
            kind: params.encoder.kind,
        }
    }

    /// Leaf ids in the model's flattening order.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        let mut ids = self.enc_weights.clone();
        if let Some(ref bs) = self.enc_biases {
            ids.extend_from_slice(bs);
        }
        if let Some((a, b)) = self.proj {
            ids.push(a);
            ids.push(b);
        }
        ids
    }
}

/// Taped encoder forward mirroring [`encoder_forward`] op for op.
pub fn encoder_forward_taped(
    tape: &mut Tape,
    taped: &TapedParams,
    x: NodeId,
    adj: &Rc<NormalizedAdjacency>,
) -> Result<NodeId> {
    let bias = |tape: &mut Tape, layer: usize, m: NodeId| -> NodeId {
        match &taped.enc_biases {
            Some(bs) => tape.add_bias(m, bs[layer]),
            None => m,
        }
    };
    match taped.kind {
        EncoderKind::Gcn => {
            let m1 = tape.matmul(x, taped.enc_weights[0]);
            let p1 = tape.spmm(adj, m1)?;
            let b1 = bias(tape, 0, p1);
            let h = tape.relu(b1);
            let m2 = tape.matmul(h, taped.enc_weights[1]);
            let p2 = tape.spmm(adj, m2)?;
            Ok(bias(tape, 1, p2))
        }
        EncoderKind::Lin => {
            let m = tape.matmul(x, taped.enc_weights[0]);
            let p = tape.spmm(adj, m)?;
            Ok(bias(tape, 0, p))
        }
        EncoderKind::Gnae => {
            let m = tape.matmul(x, taped.enc_weights[0]);
            let b = bias(tape, 0, m);
            let hn = tape.row_normalize(b);
            tape.spmm(adj, hn)
        }
    }
}

/// Taped projection-head forward.
pub fn projection_forward_taped(tape: &mut Tape, taped: &TapedParams, z: NodeId) -> Result<NodeId> {
    let (w1, w2) = taped
        .proj
        .ok_or_else(|| Error::InvalidConfig("projection head not initialized".into()))?;
    let a = tape.matmul(z, w1);
    let r = tape.relu(a);
    Ok(tape.matmul(r, w2))
}

/// Run the reverse pass and collect gradients for every parameter leaf, in
/// the model's flattening order. Parameter sharing across subgraphs means
/// the per-subgraph contributions arrive already summed.
pub fn compute_gradients(
    tape: &Tape,
    loss: NodeId,
    taped: &TapedParams,
    params: &ModelParams,
) -> Result<Vec<Array2<f64>>> {
    let mut grads: Gradients = tape.backward(loss)?;
    let shapes: Vec<(usize, usize)> = params.flat().iter().map(|(_, m)| m.dim()).collect();
    Ok(taped
        .leaf_ids()
        .into_iter()
        .zip(shapes)
        .map(|(id, shape)| grads.take(id, shape))
        .collect())
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"NESSCKPT";

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub kind: String,
    pub names: Vec<String>,
    pub shapes: Vec<(usize, usize)>,
    pub seed: u64,
    pub epoch: usize,
    pub payload_sha256: String,
    /// Run context (training mode, dataset identity, ...) set by the CLI.
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// Write a checkpoint: JSON header, then each matrix as row-major
/// little-endian f64, in the flattening order declared by the header.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    seed: u64,
    epoch: usize,
    extra: serde_json::Value,
) -> Result<()> {
    let flat = params.flat();
    let mut payload: Vec<u8> = Vec::new();
    for (_, m) in &flat {
        for &x in m.iter() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let header = CheckpointHeader {
        format_version: 1,
        kind: params.encoder.kind.as_str().into(),
        names: flat.iter().map(|(n, _)| n.clone()).collect(),
        shapes: flat.iter().map(|(_, m)| m.dim()).collect(),
        seed,
        epoch,
        payload_sha256: sha256_hex(&payload),
        extra,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    file.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    file.write_all(&header_bytes).map_err(io_err)?;
    file.write_all(&payload).map_err(io_err)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointHeader)> {
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut file = fs::File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "not a checkpoint file (bad magic)".into(),
        });
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(io_err)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(io_err)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.format_version != 1 {
        return Err(Error::VersionMismatch {
            found: header.format_version,
            expected: 1,
        });
    }
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(io_err)?;
    if sha256_hex(&payload) != header.payload_sha256 {
        return Err(Error::ChecksumMismatch {
            path: path.display().to_string(),
        });
    }

    let expected: usize = header.shapes.iter().map(|&(r, c)| r * c * 8).sum();
    if payload.len() != expected {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("payload is {} bytes, header declares {expected}", payload.len()),
        });
    }
    let mut offset = 0;
    let mut matrices = Vec::with_capacity(header.shapes.len());
    for &(r, c) in &header.shapes {
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r * c {
            let mut bytes = [0u8; 8];
            bytes.copy_from_slice(&payload[offset..offset + 8]);
            data.push(f64::from_le_bytes(bytes));
            offset += 8;
        }
        matrices.push(Array2::from_shape_vec((r, c), data).expect("shape matches data"));
    }

    let kind: EncoderKind = header.kind.parse()?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut proj = Vec::new();
    for (name, m) in header.names.iter().zip(matrices) {
        if name.starts_with("enc_w") {
            weights.push(m);
        } else if name.starts_with("enc_b") {
            biases.push(m);
        } else if name.starts_with("proj_w") {
            proj.push(m);
        } else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("unknown parameter slot {name:?}"),
            });
        }
    }
    let projection = match proj.len() {
        0 => None,
        2 => {
            let mut it = proj.into_iter();
            Some(ProjectionParams {
                w1: it.next().unwrap(),
                w2: it.next().unwrap(),
            })
        }
        n => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: format!("expected 0 or 2 projection matrices, found {n}"),
            })
        }
    };
    let params = ModelParams {
        encoder: EncoderParams {
            kind,
            weights,
            biases: (!biases.is_empty()).then_some(biases),
        },
        projection,
    };
    Ok((params, header))
}
