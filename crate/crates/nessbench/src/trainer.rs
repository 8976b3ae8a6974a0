//! Full-batch training loop covering every regime, with AdamW optimization,
//! drop-edge augmentation, fresh per-epoch negatives, and early stopping on
//! the validation loss of the mode's test-time embedding.
//!
//! Regimes:
//! - ness: K static edge-disjoint subgraphs, drop-edge on the encoder
//!   input, per-subgraph reconstruction; test-time embedding is the mean of
//!   the per-subgraph embeddings.
//! - sgae: the full training graph as a single "subgraph" with drop-edge.
//! - ds:   a fresh uniformly sampled edge subset per epoch, encoded and
//!   reconstructed.
//! - fgae: encode the full training graph, reconstruct a fresh sampled
//!   edge subset.
//! - dres: a fresh K-way partition per epoch; test-time embedding is the
//!   direct full-graph encoding.

use std::collections::HashSet;
use std::rc::Rc;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    encoder_forward, encoder_forward_taped, projection_forward_taped, EncoderKind, EncoderParams,
    ModelParams, ProjectionParams, TapedParams,
};
use crate::error::{Error, Result};
use crate::eval::{aggregate, auc, Aggregation};
use crate::graph::{normalize_adjacency, EdgeSet, Graph, NormalizedAdjacency};
use crate::loss::LossBreakdown;
use crate::rng::{stream_rng, Rng, Stream};
use crate::split::{
    drop_edges, dynamic_res_partition, dynamic_res_sample, negative_sample, Partition, Split,
    Subgraph,
};
use crate::tape::{NodeId, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Ness,
    Sgae,
    Fgae,
    Ds,
    Dres,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Ness => "ness",
            TrainMode::Sgae => "sgae",
            TrainMode::Fgae => "fgae",
            TrainMode::Ds => "ds",
            TrainMode::Dres => "dres",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ness" => Ok(TrainMode::Ness),
            "sgae" => Ok(TrainMode::Sgae),
            "fgae" => Ok(TrainMode::Fgae),
            "ds" => Ok(TrainMode::Ds),
            "dres" => Ok(TrainMode::Dres),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconTarget {
    Subgraph,
    Full,
}

impl std::str::FromStr for ReconTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgraph" => Ok(ReconTarget::Subgraph),
            "full" => Ok(ReconTarget::Full),
            other => Err(Error::InvalidConfig(format!(
                "unknown recon_target {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    ValLoss,
    ValAuc,
}

impl std::str::FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val_loss" => Ok(Selection::ValLoss),
            "val_auc" => Ok(Selection::ValAuc),
            other => Err(Error::InvalidConfig(format!("unknown selection {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Subgraph count: must match the partition for ness, and is the
    /// per-epoch partition width for dres.
    pub k: usize,
    /// Edge fraction for ds encoding and fgae decoding.
    pub ds_fraction: f64,
    pub encoder: EncoderKind,
    pub alpha: u8,
    pub tau: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub drop_p: f64,
    pub recon_target: ReconTarget,
    pub selection: Selection,
    pub use_bias: bool,
    pub include_intra_view: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Ness,
            k: 2,
            ds_fraction: 0.5,
            encoder: EncoderKind::Gnae,
            alpha: 0,
            tau: 0.5,
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            weight_decay: 0.0,
            max_epochs: 500,
            patience: 10,
            drop_p: 0.2,
            recon_target: ReconTarget::Subgraph,
            selection: Selection::ValLoss,
            use_bias: false,
            include_intra_view: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 1 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be 0 or 1, got {}",
                self.alpha
            )));
        }
        if !(3..=15).contains(&self.patience) {
            return Err(Error::InvalidConfig(format!(
                "patience must lie in [3, 15], got {}",
                self.patience
            )));
        }
        if self.alpha == 1 {
            let multi_view = matches!(self.mode, TrainMode::Ness | TrainMode::Dres) && self.k >= 2;
            if !multi_view {
                return Err(Error::InvalidConfig(
                    "alpha=1 needs k >= 2 subgraph views (ness or dres)".into(),
                ));
            }
        }
        if self.mode == TrainMode::Dres && self.k < 2 {
            return Err(Error::InvalidConfig("dres needs k >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.drop_p) {
            return Err(Error::InvalidConfig(format!(
                "drop_p must be in [0, 1), got {}",
                self.drop_p
            )));
        }
        if !(self.ds_fraction > 0.0 && self.ds_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ds_fraction must be in (0, 1], got {}",
                self.ds_fraction
            )));
        }
        if self.lr <= 0.0 || self.tau <= 0.0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "lr, tau must be positive and max_epochs >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// First/second moment estimates for AdamW, one slot per parameter matrix.
#[derive(Clone, Debug)]
pub struct AdamWState {
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamWState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        AdamWState {
            step: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One decoupled-weight-decay Adam update with bias-corrected moments:
/// p <- p * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps).
pub fn adamw_step(
    params: &mut [&mut Array2<f64>],
    grads: &[Array2<f64>],
    state: &mut AdamWState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for g in grads {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
    }
    state.step += 1;
    let (b1, b2) = betas;
    let corr1 = 1.0 - b1.powi(state.step as i32);
    let corr2 = 1.0 - b2.powi(state.step as i32);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if weight_decay != 0.0 {
            p.mapv_inplace(|x| x * (1.0 - lr * weight_decay));
        }
        ndarray::Zip::from(&mut **m).and(g).for_each(|m, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
        });
        ndarray::Zip::from(&mut **v).and(g).for_each(|v, &g| {
            *v = b2 * *v + (1.0 - b2) * g * g;
        });
        ndarray::Zip::from(&mut **p)
            .and(&**m)
            .and(&**v)
            .for_each(|p, &m, &v| {
                let m_hat = m / corr1;
                let v_hat = v / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
    Ok(())
}

/// One forward item of an epoch: the adjacency fed to the encoder plus the
/// fixed positive/negative edge lists its reconstruction is scored on.
pub struct EpochItem {
    pub adj: Rc<NormalizedAdjacency>,
    pub pos: Rc<Vec<(u32, u32)>>,
    pub neg: Rc<Vec<(u32, u32)>>,
}

pub struct EpochInputs {
    pub items: Vec<EpochItem>,
    pub alpha: u8,
    pub tau: f64,
    pub include_intra_view: bool,
}

pub struct EpochNodes {
    pub total: NodeId,
    pub recon: NodeId,
    pub contrastive: Option<NodeId>,
    pub per_subgraph: Vec<NodeId>,
    pub embeddings: Vec<NodeId>,
}

/// Build the taped loss for one epoch. All subgraph forwards share the
/// parameter leaves in `taped`; gradient accumulation across subgraphs is
/// the reverse pass summing into those shared leaves.
pub fn epoch_loss(
    tape: &mut Tape,
    taped: &TapedParams,
    x_node: NodeId,
    inputs: &EpochInputs,
) -> Result<EpochNodes> {
    let k = inputs.items.len();
    let mut per_subgraph = Vec::with_capacity(k);
    let mut embeddings = Vec::with_capacity(k);
    for item in &inputs.items {
        let z = encoder_forward_taped(tape, taped, x_node, &item.adj)?;
        let pos = tape.gather_dot(z, Rc::clone(&item.pos));
        let neg = tape.gather_dot(z, Rc::clone(&item.neg));
        per_subgraph.push(tape.bce_from_logits(pos, neg));
        embeddings.push(z);
    }
    let weight = 1.0 / k as f64;
    let recon_terms: Vec<(NodeId, f64)> = per_subgraph.iter().map(|&id| (id, weight)).collect();
    let recon = tape.lincomb(&recon_terms);

    if inputs.alpha == 0 {
        return Ok(EpochNodes {
            total: recon,
            recon,
            contrastive: None,
            per_subgraph,
            embeddings,
        });
    }

    let mut projections = Vec::with_capacity(k);
    for &z in &embeddings {
        projections.push(projection_forward_taped(tape, taped, z)?);
    }
    let mut pair_losses = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let cat = tape.concat_rows(projections[a], projections[b]);
            let normed = tape.row_normalize(cat);
            let sim = tape.matmul_nt(normed, normed);
            pair_losses.push(tape.ntxent_from_sim(sim, inputs.tau, inputs.include_intra_view));
        }
    }
    let pair_weight = 1.0 / pair_losses.len() as f64;
    let contrast_terms: Vec<(NodeId, f64)> =
        pair_losses.iter().map(|&id| (id, pair_weight)).collect();
    let contrastive = tape.lincomb(&contrast_terms);
    let total = tape.lincomb(&[(recon, 1.0), (contrastive, 1.0)]);
    Ok(EpochNodes {
        total,
        recon,
        contrastive: Some(contrastive),
        per_subgraph,
        embeddings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub loss: f64,
    pub auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub best_params: ModelParams,
    /// 1-based epoch with the best selection metric.
    pub best_epoch: usize,
    pub loss_history: Vec<LossBreakdown>,
    pub validation_history: Vec<ValRecord>,
    /// Test-time embeddings at the best epoch: one per static subgraph for
    /// ness, a single full-graph embedding otherwise.
    pub subgraph_embeddings: Vec<Array2<f64>>,
    /// Mean-aggregated test-time embedding at the best epoch.
    pub aggregated: Array2<f64>,
    /// Wall-clock per epoch; reported in the manifest only.
    pub epoch_wall_ms: Vec<u64>,
}

impl TrainResult {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }
}

/// Plain (no-grad) embeddings of a set of subgraphs under shared params.
pub fn subgraph_embeddings_for(
    params: &EncoderParams,
    graph: &Graph,
    subgraphs: &[Subgraph],
) -> Result<Vec<Array2<f64>>> {
    subgraphs
        .iter()
        .map(|s| {
            let adj = normalize_adjacency(s.adjacency());
            encoder_forward(params, graph.features(), &adj)
        })
        .collect()
}

fn validation_scores(
    z: &Array2<f64>,
    split: &Split,
) -> Result<(f64, f64)> {
    let pos = crate::loss::decode_edges(z.view(), &split.val_pos);
    let neg = crate::loss::decode_edges(z.view(), &split.val_neg);
    let scores = crate::loss::EdgeScores { pos, neg };
    let loss = crate::loss::recon_loss_single(&scores)?;
    let auc = auc(&scores.pos.logits, &scores.neg.logits)?;
    Ok((loss, auc))
}

/// Train one model. `partition` is required (and static) for ness,
/// forbidden otherwise; dres regenerates its own partition every epoch.
pub fn train(
    config: &TrainConfig,
    graph: &Graph,
    split: &Split,
    partition: Option<&Partition>,
) -> Result<TrainResult> {
    config.validate()?;
    match (config.mode, partition) {
        (TrainMode::Ness, None) => {
            return Err(Error::InvalidConfig(
                "ness training requires a static partition".into(),
            ))
        }
        (TrainMode::Ness, Some(p)) => {
            if p.k() != config.k {
                return Err(Error::InvalidConfig(format!(
                    "config k={} but partition has {} subgraphs",
                    config.k,
                    p.k()
                )));
            }
        }
        (_, Some(_)) => {
            return Err(Error::InvalidConfig(format!(
                "mode {} does not take a static partition",
                config.mode.as_str()
            )))
        }
        (_, None) => {}
    }
    if split.val_pos.is_empty() {
        return Err(Error::InvalidConfig(
            "training requires a non-empty validation set".into(),
        ));
    }
    let n = graph.num_nodes();
    if split.num_nodes != n {
        return Err(Error::DimensionMismatch(format!(
            "split is over {} nodes, graph has {n}",
            split.num_nodes
        )));
    }

    let mut init_rng = stream_rng(config.seed, Stream::Init);
    let mut drop_rng = stream_rng(config.seed, Stream::DropEdge);
    let mut neg_rng = stream_rng(config.seed, Stream::NegSample);
    let mut sampler_rng = stream_rng(config.seed, Stream::Sampler);

    let mut params = ModelParams {
        encoder: EncoderParams::init(
            config.encoder,
            graph.feature_dim(),
            config.use_bias,
            &mut init_rng,
        ),
        projection: (config.alpha == 1).then(|| ProjectionParams::init(&mut init_rng)),
    };
    let shapes: Vec<(usize, usize)> = params.flat().iter().map(|(_, m)| m.dim()).collect();
    let mut opt_state = AdamWState::new(&shapes);

    let train_forbidden: HashSet<(u32, u32)> = split.train.iter().collect();
    let full_train_sub = Subgraph::new(0, n, split.train.clone());
    let full_train_adj = Rc::new(normalize_adjacency(full_train_sub.adjacency()));

    // static test-time adjacencies for ness validation/aggregation
    let static_adjs: Vec<Rc<NormalizedAdjacency>> = match (config.mode, partition) {
        (TrainMode::Ness, Some(p)) => p
            .subgraphs
            .iter()
            .map(|s| Rc::new(normalize_adjacency(s.adjacency())))
            .collect(),
        _ => vec![Rc::clone(&full_train_adj)],
    };

    let mut loss_history: Vec<LossBreakdown> = Vec::new();
    let mut validation_history: Vec<ValRecord> = Vec::new();
    let mut epoch_wall_ms: Vec<u64> = Vec::new();
    let mut best_metric = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = params.clone();
    let mut best_embeddings: Vec<Array2<f64>> = Vec::new();
    let mut bad_epochs = 0usize;

    let sample_negatives = |pos: &EdgeSet, rng: &mut Rng| -> Result<Rc<Vec<(u32, u32)>>> {
        let negs = negative_sample(&train_forbidden, pos.len(), n, rng)?;
        Ok(Rc::new(negs.as_slice().to_vec()))
    };

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();

        // assemble this epoch's encoder inputs and reconstruction targets
        let mut items: Vec<EpochItem> = Vec::new();
        let decode_edges_of = |sub: &Subgraph| -> Rc<Vec<(u32, u32)>> {
            match config.recon_target {
                ReconTarget::Subgraph => Rc::new(sub.edge_set.as_slice().to_vec()),
                ReconTarget::Full => Rc::new(split.train.as_slice().to_vec()),
            }
        };
        match config.mode {
            TrainMode::Ness => {
                for sub in &partition.expect("checked above").subgraphs {
                    let dropped = drop_edges(sub, config.drop_p, &mut drop_rng)?;
                    let adj = Rc::new(normalize_adjacency(dropped.adjacency()));
                    let pos = decode_edges_of(sub);
                    let neg = sample_negatives(&sub.edge_set, &mut neg_rng)?;
                    let neg = match config.recon_target {
                        ReconTarget::Subgraph => neg,
                        ReconTarget::Full => sample_negatives(&split.train, &mut neg_rng)?,
                    };
                    items.push(EpochItem { adj, pos, neg });
                }
            }
            TrainMode::Sgae => {
                let dropped = drop_edges(&full_train_sub, config.drop_p, &mut drop_rng)?;
                let adj = Rc::new(normalize_adjacency(dropped.adjacency()));
                let pos = Rc::new(split.train.as_slice().to_vec());
                let neg = sample_negatives(&split.train, &mut neg_rng)?;
                items.push(EpochItem { adj, pos, neg });
            }
            TrainMode::Ds => {
                let sub = dynamic_res_sample(&split.train, config.ds_fraction, n, &mut sampler_rng)?;
                let adj = Rc::new(normalize_adjacency(sub.adjacency()));
                let pos = Rc::new(sub.edge_set.as_slice().to_vec());
                let neg = sample_negatives(&sub.edge_set, &mut neg_rng)?;
                items.push(EpochItem { adj, pos, neg });
            }
            TrainMode::Fgae => {
                let decode =
                    dynamic_res_sample(&split.train, config.ds_fraction, n, &mut sampler_rng)?;
                let pos = Rc::new(decode.edge_set.as_slice().to_vec());
                let neg = sample_negatives(&decode.edge_set, &mut neg_rng)?;
                items.push(EpochItem {
                    adj: Rc::clone(&full_train_adj),
                    pos,
                    neg,
                });
            }
            TrainMode::Dres => {
                let parts = dynamic_res_partition(&split.train, config.k, n, &mut sampler_rng)?;
                for sub in &parts.subgraphs {
                    let adj = Rc::new(normalize_adjacency(sub.adjacency()));
                    let pos = Rc::new(sub.edge_set.as_slice().to_vec());
                    let neg = sample_negatives(&sub.edge_set, &mut neg_rng)?;
                    items.push(EpochItem { adj, pos, neg });
                }
            }
        }

        let inputs = EpochInputs {
            items,
            alpha: config.alpha,
            tau: config.tau,
            include_intra_view: config.include_intra_view,
        };

        let mut tape = Tape::new();
        let taped = TapedParams::register(&mut tape, &params);
        let x_node = tape.constant(graph.features().to_owned());
        let nodes = epoch_loss(&mut tape, &taped, x_node, &inputs)?;

        let total = tape.scalar(nodes.total);
        let recon = tape.scalar(nodes.recon);
        let contrastive = nodes.contrastive.map(|id| tape.scalar(id)).unwrap_or(0.0);
        let per_subgraph: Vec<f64> = nodes.per_subgraph.iter().map(|&id| tape.scalar(id)).collect();
        let breakdown = LossBreakdown {
            total,
            recon,
            contrastive,
            per_subgraph,
            alpha: config.alpha,
            tau: config.tau,
        };
        loss_history.push(breakdown);
        if !total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss became {total}"),
                history: loss_history,
            });
        }

        let grads = crate::encoder::compute_gradients(&tape, nodes.total, &taped, &params)?;
        let mut slots = params.flat_mut();
        adamw_step(
            &mut slots,
            &grads,
            &mut opt_state,
            config.lr,
            (config.beta1, config.beta2),
            config.eps,
            config.weight_decay,
        )?;

        // test-time embedding of the current params drives selection
        let embeddings: Vec<Array2<f64>> = static_adjs
            .iter()
            .map(|adj| encoder_forward(&params.encoder, graph.features(), adj))
            .collect::<Result<_>>()?;
        let joint = aggregate(&embeddings, Aggregation::Mean)?;
        let (val_loss, val_auc) = validation_scores(&joint, split)?;
        validation_history.push(ValRecord {
            loss: val_loss,
            auc: val_auc,
        });

        let metric = match config.selection {
            Selection::ValLoss => val_loss,
            Selection::ValAuc => -val_auc,
        };
        if metric < best_metric {
            best_metric = metric;
            best_epoch = epoch;
            best_params = params.clone();
            best_embeddings = embeddings;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
        }
        epoch_wall_ms.push(started.elapsed().as_millis() as u64);
        if bad_epochs >= config.patience {
            break;
        }
    }

    let aggregated = aggregate(&best_embeddings, Aggregation::Mean)?;
    Ok(TrainResult {
        best_params,
        best_epoch,
        loss_history,
        validation_history,
        subgraph_embeddings: best_embeddings,
        aggregated,
        epoch_wall_ms,
    })
}

/// Per-epoch metrics in CSV form. The wall_ms column is pinned to 0 so the
/// file is byte-identical across reruns; measured times live in the run
/// manifest.
pub fn metrics_csv(result: &TrainResult) -> String {
    let mut out = String::from("epoch,L_t,L_r,L_c,val_loss,val_auc,wall_ms\n");
    for (i, (lb, val)) in result
        .loss_history
        .iter()
        .zip(&result.validation_history)
        .enumerate()
    {
        out.push_str(&format!(
            "{},{},{},{},{},{},0\n",
            i + 1,
            lb.total,
            lb.recon,
            lb.contrastive,
            val.loss,
            val.auc
        ));
    }
    out
}
