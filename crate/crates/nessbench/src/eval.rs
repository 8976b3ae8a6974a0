//! Test-time aggregation, rank-based link-prediction metrics, and the
//! subgraph analysis suite (correlation, consensus, gradual aggregation,
//! score-averaging ensemble, aggregation-vs-direct comparison).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::encoder::{encoder_forward, EncoderParams};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, EdgeSet, Graph};
use crate::loss::decode_edges;
use crate::split::Subgraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Sum,
    Min,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "min" => Ok(Aggregation::Min),
            "max" => Ok(Aggregation::Max),
            other => Err(Error::InvalidConfig(format!(
                "unknown aggregation {other:?}"
            ))),
        }
    }
}

/// Permutation-invariant elementwise reduction of per-subgraph embeddings
/// into one joint embedding.
pub fn aggregate(embeddings: &[Array2<f64>], method: Aggregation) -> Result<Array2<f64>> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::Infeasible("cannot aggregate an empty embedding list".into()))?;
    for e in embeddings {
        if e.dim() != first.dim() {
            return Err(Error::DimensionMismatch(format!(
                "embedding shapes {:?} vs {:?}",
                e.dim(),
                first.dim()
            )));
        }
    }
    let mut out = first.clone();
    match method {
        Aggregation::Mean | Aggregation::Sum => {
            for e in &embeddings[1..] {
                out += e;
            }
            if method == Aggregation::Mean {
                out /= embeddings.len() as f64;
            }
        }
        Aggregation::Min => {
            for e in &embeddings[1..] {
                ndarray::Zip::from(&mut out).and(e).for_each(|o, &x| *o = o.min(x));
            }
        }
        Aggregation::Max => {
            for e in &embeddings[1..] {
                ndarray::Zip::from(&mut out).and(e).for_each(|o, &x| *o = o.max(x));
            }
        }
    }
    Ok(out)
}

/// Rank-based AUC: P(score_pos > score_neg) with ties credited 0.5,
/// computed as the Mann-Whitney statistic over midranks in O(n log n).
pub fn auc(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::Infeasible(
            "AUC needs at least one positive and one negative score".into(),
        ));
    }
    let n_pos = pos_scores.len();
    let n_neg = neg_scores.len();
    let mut all: Vec<(f64, bool)> = pos_scores
        .iter()
        .map(|&s| (s, true))
        .chain(neg_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must be comparable"));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // midrank of the tie group covering 1-based ranks i+1 ..= j
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision over descending unique score thresholds, ties grouped
/// within one threshold step: AP = sum_n (R_n - R_{n-1}) * P_n.
pub fn average_precision(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::Infeasible(
            "AP needs at least one positive and one negative score".into(),
        ));
    }
    let mut all: Vec<(f64, bool)> = pos_scores
        .iter()
        .map(|&s| (s, true))
        .chain(neg_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must be comparable"));

    let n_pos = pos_scores.len() as f64;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut recall_prev = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        for item in &all[i..j] {
            if item.1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        let recall = tp / n_pos;
        let precision = tp / (tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    Ok(ap)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_accuracy: Option<f64>,
}

/// AUC and AP of an embedding on a positive/negative test edge pair.
pub fn metric_report(z: &Array2<f64>, pos: &EdgeSet, neg: &EdgeSet) -> Result<MetricReport> {
    let p = decode_edges(z.view(), pos);
    let n = decode_edges(z.view(), neg);
    Ok(MetricReport {
        auc: auc(&p.logits, &n.logits)?,
        ap: average_precision(&p.logits, &n.logits)?,
        n_pos: pos.len(),
        n_neg: neg.len(),
        threshold_accuracy: None,
    })
}

/// Mean embedding over the nodes incident to at least one subgraph edge
/// (self-loops do not make a node connected).
pub fn subgraph_mean_representation(z: &Array2<f64>, subgraph: &Subgraph) -> Result<Array1<f64>> {
    let mut connected = vec![false; z.nrows()];
    for (u, v) in subgraph.edge_set.iter() {
        connected[u as usize] = true;
        connected[v as usize] = true;
    }
    let count = connected.iter().filter(|&&c| c).count();
    if count == 0 {
        return Err(Error::Infeasible(
            "subgraph has no connected nodes".into(),
        ));
    }
    let mut mean = Array1::zeros(z.ncols());
    for (i, &is_connected) in connected.iter().enumerate() {
        if is_connected {
            mean += &z.row(i);
        }
    }
    Ok(mean / count as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PearsonSummary {
    /// K x K correlation matrix; undefined entries (zero variance) are NaN.
    pub matrix: Vec<Vec<f64>>,
    /// Mean over defined off-diagonal unordered pairs.
    pub mean: f64,
    /// Unordered pairs excluded because a vector had zero variance.
    pub excluded_pairs: usize,
}

fn pearson(a: &Array1<f64>, b: &Array1<f64>) -> Option<f64> {
    let d = a.len() as f64;
    let ma = a.sum() / d;
    let mb = b.sum() / d;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        None
    } else {
        Some(cov / (va.sqrt() * vb.sqrt()))
    }
}

/// Pairwise Pearson correlation across the coordinates of the K subgraph
/// representation vectors, plus the mean over unordered pairs.
pub fn pairwise_pearson(vectors: &[Array1<f64>]) -> Result<PearsonSummary> {
    let k = vectors.len();
    if k < 2 {
        return Err(Error::Infeasible(
            "pairwise correlation needs at least two vectors".into(),
        ));
    }
    if vectors[0].len() < 2 {
        return Err(Error::Infeasible(
            "correlation across coordinates needs width >= 2".into(),
        ));
    }
    let mut matrix = vec![vec![1.0; k]; k];
    let mut sum = 0.0;
    let mut defined = 0usize;
    let mut excluded = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            match pearson(&vectors[a], &vectors[b]) {
                Some(r) => {
                    matrix[a][b] = r;
                    matrix[b][a] = r;
                    sum += r;
                    defined += 1;
                }
                None => {
                    matrix[a][b] = f64::NAN;
                    matrix[b][a] = f64::NAN;
                    excluded += 1;
                }
            }
        }
    }
    if defined == 0 {
        return Err(Error::Infeasible(
            "all vector pairs had zero variance".into(),
        ));
    }
    Ok(PearsonSummary {
        matrix,
        mean: sum / defined as f64,
        excluded_pairs: excluded,
    })
}

/// Fraction of test items (positives and negatives) classified correctly by
/// every subgraph embedding. A positive is correct when its score exceeds
/// the threshold; a negative when its score does not.
pub fn consensus(
    embeddings: &[Array2<f64>],
    test_pos: &EdgeSet,
    test_neg: &EdgeSet,
    threshold: f64,
) -> Result<f64> {
    if embeddings.len() < 2 {
        return Err(Error::Infeasible(
            "consensus needs at least two subgraph embeddings".into(),
        ));
    }
    let total = test_pos.len() + test_neg.len();
    if total == 0 {
        return Err(Error::Infeasible("empty test set".into()));
    }
    let mut all_correct = vec![true; total];
    for z in embeddings {
        let p = decode_edges(z.view(), test_pos);
        let n = decode_edges(z.view(), test_neg);
        for (i, &s) in p.scores.iter().enumerate() {
            if s <= threshold {
                all_correct[i] = false;
            }
        }
        for (i, &s) in n.scores.iter().enumerate() {
            if s > threshold {
                all_correct[test_pos.len() + i] = false;
            }
        }
    }
    Ok(all_correct.iter().filter(|&&c| c).count() as f64 / total as f64)
}

/// Accuracy of one embedding at a score threshold (used by the consensus
/// upper-bound invariant).
pub fn threshold_accuracy(
    z: &Array2<f64>,
    test_pos: &EdgeSet,
    test_neg: &EdgeSet,
    threshold: f64,
) -> f64 {
    let p = decode_edges(z.view(), test_pos);
    let n = decode_edges(z.view(), test_neg);
    let correct = p.scores.iter().filter(|&&s| s > threshold).count()
        + n.scores.iter().filter(|&&s| s <= threshold).count();
    correct as f64 / (test_pos.len() + test_neg.len()) as f64
}

/// AUC values of the running mean aggregate: entry m is the AUC of
/// mean(z_1 .. z_{m+1}).
pub fn gradual_aggregation_curve(
    embeddings: &[Array2<f64>],
    test_pos: &EdgeSet,
    test_neg: &EdgeSet,
) -> Result<Vec<f64>> {
    if embeddings.is_empty() {
        return Err(Error::Infeasible("no embeddings given".into()));
    }
    (1..=embeddings.len())
        .map(|m| {
            let joint = aggregate(&embeddings[..m], Aggregation::Mean)?;
            let p = decode_edges(joint.view(), test_pos);
            let n = decode_edges(joint.view(), test_neg);
            auc(&p.logits, &n.logits)
        })
        .collect()
}

/// Traditional ensemble baseline: per-edge score is the mean of the
/// per-subgraph sigmoid scores (average predictions, not latents).
pub fn ensemble_baseline(
    embeddings: &[Array2<f64>],
    test_pos: &EdgeSet,
    test_neg: &EdgeSet,
) -> Result<MetricReport> {
    if embeddings.is_empty() {
        return Err(Error::Infeasible("no embeddings given".into()));
    }
    let mean_scores = |edges: &EdgeSet| -> Vec<f64> {
        let mut acc = vec![0.0; edges.len()];
        for z in embeddings {
            let d = decode_edges(z.view(), edges);
            for (a, s) in acc.iter_mut().zip(d.scores) {
                *a += s;
            }
        }
        acc.into_iter().map(|s| s / embeddings.len() as f64).collect()
    };
    let pos = mean_scores(test_pos);
    let neg = mean_scores(test_neg);
    Ok(MetricReport {
        auc: auc(&pos, &neg)?,
        ap: average_precision(&pos, &neg)?,
        n_pos: test_pos.len(),
        n_neg: test_neg.len(),
        threshold_accuracy: None,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AggVsDirect {
    pub auc_agg: f64,
    pub auc_direct: f64,
    pub delta: f64,
}

/// Compare the mean-aggregated subgraph embeddings against encoding the
/// full training graph directly, under the same trained parameters.
pub fn aggregation_vs_direct(
    params: &EncoderParams,
    graph: &Graph,
    train: &EdgeSet,
    subgraph_embeddings: &[Array2<f64>],
    test_pos: &EdgeSet,
    test_neg: &EdgeSet,
) -> Result<AggVsDirect> {
    let joint = aggregate(subgraph_embeddings, Aggregation::Mean)?;
    let auc_agg = metric_report(&joint, test_pos, test_neg)?.auc;
    let train_sub = Subgraph::new(0, graph.num_nodes(), train.clone());
    let adj = normalize_adjacency(train_sub.adjacency());
    let direct = encoder_forward(params, graph.features(), &adj)?;
    let auc_direct = metric_report(&direct, test_pos, test_neg)?.auc;
    Ok(AggVsDirect {
        auc_agg,
        auc_direct,
        delta: auc_agg - auc_direct,
    })
}
