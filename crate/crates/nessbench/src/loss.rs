//! Inner-product decoder, reconstruction loss, and the temperature-scaled
//! contrastive loss over projected subgraph embeddings.
//!
//! Loss arithmetic runs on logits through the stable softplus form; sigmoid
//! scores are materialized only for evaluation and inspection.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeSet;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Decoded link scores for one edge list: logit(u,v) = z_u . z_v and the
/// sigmoid score alongside.
#[derive(Clone, Debug)]
pub struct DecodedEdges {
    pub logits: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Positive and sampled-negative scores for one subgraph.
#[derive(Clone, Debug)]
pub struct EdgeScores {
    pub pos: DecodedEdges,
    pub neg: DecodedEdges,
}

/// Score node pairs under the inner-product decoder. Symmetric by
/// construction: score(u,v) = sigmoid(z_u . z_v).
pub fn decode_edges(z: ArrayView2<f64>, edges: &EdgeSet) -> DecodedEdges {
    decode_pairs(z, edges.as_slice())
}

pub fn decode_pairs(z: ArrayView2<f64>, pairs: &[(u32, u32)]) -> DecodedEdges {
    let logits: Vec<f64> = pairs
        .iter()
        .map(|&(u, v)| z.row(u as usize).dot(&z.row(v as usize)))
        .collect();
    let scores = logits.iter().map(|&x| sigmoid(x)).collect();
    DecodedEdges { logits, scores }
}

/// Per-subgraph binary cross-entropy on logits:
/// l_k = (1 / 2 n_kp) * sum_i [softplus(-pos_i) + softplus(neg_i)].
pub fn recon_loss_single(scores: &EdgeScores) -> Result<f64> {
    let n = scores.pos.logits.len();
    if n == 0 {
        return Err(Error::Infeasible(
            "reconstruction loss needs at least one positive edge".into(),
        ));
    }
    if scores.neg.logits.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} positive vs {} negative scores",
            n,
            scores.neg.logits.len()
        )));
    }
    let mut acc = 0.0;
    for (&p, &q) in scores.pos.logits.iter().zip(&scores.neg.logits) {
        acc += softplus(-p) + softplus(q);
    }
    Ok(acc / (2.0 * n as f64))
}

/// Mean reconstruction loss over subgraphs plus the per-subgraph terms.
pub fn recon_loss(per_subgraph: &[EdgeScores]) -> Result<(f64, Vec<f64>)> {
    if per_subgraph.is_empty() {
        return Err(Error::Infeasible("no subgraph scores given".into()));
    }
    let terms: Vec<f64> = per_subgraph
        .iter()
        .map(recon_loss_single)
        .collect::<Result<_>>()?;
    let mean = terms.iter().sum::<f64>() / terms.len() as f64;
    Ok((mean, terms))
}

/// Row-wise L2 normalization; rows with norm below `eps` become zero rows,
/// which makes the cosine of such a row with anything 0.
pub(crate) fn row_l2_normalize(x: ArrayView2<f64>, eps: f64) -> (Array2<f64>, usize) {
    let mut out = x.to_owned();
    let mut zero_rows = 0;
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm < eps {
            row.fill(0.0);
            zero_rows += 1;
        } else {
            row.mapv_inplace(|v| v / norm);
        }
    }
    (out, zero_rows)
}

pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct NtxentValue {
    pub value: f64,
    /// Rows whose norm fell below the guard; their cosines were taken as 0.
    pub zero_norm_rows: usize,
}

/// Contrastive loss for one pair of projections.
///
/// Anchors are the 2N rows of [h_a; h_b]; for anchor i the positive partner
/// is the row at the same node index in the other view, and the denominator
/// sums exp(cos/tau) over every other row (when `include_intra_view` is
/// false, only rows of the opposite view enter the denominator).
pub fn ntxent_pair_opts(
    h_a: ArrayView2<f64>,
    h_b: ArrayView2<f64>,
    tau: f64,
    include_intra_view: bool,
) -> Result<NtxentValue> {
    if h_a.dim() != h_b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "projection shapes {:?} vs {:?}",
            h_a.dim(),
            h_b.dim()
        )));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let n = h_a.nrows();
    if n == 0 {
        return Err(Error::Infeasible("empty projections".into()));
    }
    let mut stacked = Array2::zeros((2 * n, h_a.ncols()));
    stacked.slice_mut(ndarray::s![..n, ..]).assign(&h_a);
    stacked.slice_mut(ndarray::s![n.., ..]).assign(&h_b);
    let (normed, zero_norm_rows) = row_l2_normalize(stacked.view(), NORM_EPS);
    let sim = normed.dot(&normed.t());

    let mut total = 0.0;
    for i in 0..2 * n {
        let partner = (i + n) % (2 * n);
        let mut denom = 0.0;
        for k in 0..2 * n {
            if k == i {
                continue;
            }
            if !include_intra_view && (k < n) == (i < n) {
                continue;
            }
            denom += (sim[(i, k)] / tau).exp();
        }
        total += denom.ln() - sim[(i, partner)] / tau;
    }
    Ok(NtxentValue {
        value: total / (2.0 * n as f64),
        zero_norm_rows,
    })
}

/// NT-Xent loss for a pair of projections with the default denominator
/// (in-view negatives included).
pub fn ntxent_pair(h_a: ArrayView2<f64>, h_b: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(ntxent_pair_opts(h_a, h_b, tau, true)?.value)
}

/// Mean NT-Xent loss over all unordered pairs of subgraph projections.
pub fn contrastive_loss(projections: &[Array2<f64>], tau: f64) -> Result<f64> {
    contrastive_loss_opts(projections, tau, true)
}

pub fn contrastive_loss_opts(
    projections: &[Array2<f64>],
    tau: f64,
    include_intra_view: bool,
) -> Result<f64> {
    let k = projections.len();
    if k < 2 {
        return Err(Error::Infeasible(
            "contrastive loss requires at least two subgraph views".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..k {
        for b in (a + 1)..k {
            total += ntxent_pair_opts(
                projections[a].view(),
                projections[b].view(),
                tau,
                include_intra_view,
            )?
            .value;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Total objective. With alpha = 0 the contrastive term is ignored
/// entirely, not multiplied away.
pub fn total_loss(recon: f64, contrastive: f64, alpha: u8) -> f64 {
    if alpha == 0 {
        recon
    } else {
        recon + contrastive
    }
}

/// Scalar losses recorded for one training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub contrastive: f64,
    pub per_subgraph: Vec<f64>,
    pub alpha: u8,
    pub tau: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use ndarray::array;
    use rand::Rng as _;

    #[test]
    fn zero_embeddings_score_half() {
        let z = Array2::zeros((2, 4));
        let d = decode_edges(z.view(), &EdgeSet::from_pairs([(0, 1)]).unwrap());
        assert_eq!(d.scores, vec![0.5]);
        assert_eq!(d.logits, vec![0.0]);
    }

    #[test]
    fn score_increases_monotonically_with_dot_product() {
        let mut prev = 0.0;
        for scale in 1..6 {
            let z = array![[scale as f64, 0.0], [scale as f64, 0.0]];
            let d = decode_edges(z.view(), &EdgeSet::from_pairs([(0, 1)]).unwrap());
            assert!(d.scores[0] > prev);
            prev = d.scores[0];
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn decode_matches_dense_sigmoid_gram_oracle() {
        let mut rng = stream_rng(3, Stream::Sampler);
        let z = Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let mut pairs = Vec::new();
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                pairs.push((u, v));
            }
        }
        let d = decode_pairs(z.view(), &pairs);
        let gram = z.dot(&z.t());
        for (idx, &(u, v)) in pairs.iter().enumerate() {
            let expected = sigmoid(gram[(u as usize, v as usize)]);
            assert!((d.scores[idx] - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn decode_is_bitwise_symmetric() {
        let mut rng = stream_rng(4, Stream::Sampler);
        let z = Array2::from_shape_fn((6, 8), |_| rng.random::<f64>() * 4.0 - 2.0);
        for u in 0..6u32 {
            for v in (u + 1)..6 {
                let fwd = decode_pairs(z.view(), &[(u, v)]);
                let rev = decode_pairs(z.view(), &[(v, u)]);
                assert_eq!(fwd.logits[0].to_bits(), rev.logits[0].to_bits());
            }
        }
    }

    #[test]
    fn perfect_reconstruction_loss_tends_to_zero() {
        let scores = EdgeScores {
            pos: DecodedEdges {
                logits: vec![40.0, 40.0],
                scores: vec![1.0, 1.0],
            },
            neg: DecodedEdges {
                logits: vec![-40.0, -40.0],
                scores: vec![0.0, 0.0],
            },
        };
        assert!(recon_loss_single(&scores).unwrap() < 1e-15);
    }

    #[test]
    fn all_zero_logits_give_log_two() {
        let scores = EdgeScores {
            pos: DecodedEdges {
                logits: vec![0.0; 7],
                scores: vec![0.5; 7],
            },
            neg: DecodedEdges {
                logits: vec![0.0; 7],
                scores: vec![0.5; 7],
            },
        };
        let l = recon_loss_single(&scores).unwrap();
        assert!((l - 2f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn recon_loss_is_mean_of_subgraph_terms() {
        let make = |logit: f64| EdgeScores {
            pos: DecodedEdges {
                logits: vec![logit],
                scores: vec![sigmoid(logit)],
            },
            neg: DecodedEdges {
                logits: vec![-logit],
                scores: vec![sigmoid(-logit)],
            },
        };
        let a = recon_loss_single(&make(1.0)).unwrap();
        let b = recon_loss_single(&make(2.0)).unwrap();
        let (mean, per) = recon_loss(&[make(1.0), make(2.0)]).unwrap();
        assert_eq!(per, vec![a, b]);
        assert!((mean - (a + b) / 2.0).abs() <= 1e-15);
    }

    #[test]
    fn empty_positive_set_rejected() {
        let scores = EdgeScores {
            pos: DecodedEdges {
                logits: vec![],
                scores: vec![],
            },
            neg: DecodedEdges {
                logits: vec![],
                scores: vec![],
            },
        };
        assert!(recon_loss_single(&scores).is_err());
    }

    #[test]
    fn stable_form_matches_naive_for_moderate_scores() {
        let mut rng = stream_rng(5, Stream::Sampler);
        for _ in 0..50 {
            // scores in [1e-7, 1 - 1e-7] correspond to |logit| <= ~16.1
            let n = rng.random_range(1..20);
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n).map(|_| rng.random::<f64>() * 32.0 - 16.0).collect()
            };
            let pos_logits = draw(n);
            let neg_logits = draw(n);
            let scores = EdgeScores {
                pos: DecodedEdges {
                    scores: pos_logits.iter().map(|&x| sigmoid(x)).collect(),
                    logits: pos_logits.clone(),
                },
                neg: DecodedEdges {
                    scores: neg_logits.iter().map(|&x| sigmoid(x)).collect(),
                    logits: neg_logits.clone(),
                },
            };
            let stable = recon_loss_single(&scores).unwrap();
            let naive = -(scores
                .pos
                .scores
                .iter()
                .map(|s| s.ln())
                .chain(scores.neg.scores.iter().map(|s| (1.0 - s).ln()))
                .sum::<f64>())
                / (2.0 * n as f64);
            assert!(
                (stable - naive).abs() <= 1e-9 * naive.abs().max(1.0),
                "stable {stable} naive {naive}"
            );
        }
    }

    #[test]
    fn ntxent_single_node_pair_is_zero() {
        let h_a = array![[1.0, 2.0, 3.0]];
        let h_b = array![[0.5, -1.0, 2.0]];
        let v = ntxent_pair(h_a.view(), h_b.view(), 0.5).unwrap();
        assert!(v.abs() <= 1e-12);
    }

    /// Direct double-loop evaluation over the concatenated views.
    fn ntxent_bruteforce(h_a: &Array2<f64>, h_b: &Array2<f64>, tau: f64) -> f64 {
        let n = h_a.nrows();
        let d = h_a.ncols();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for r in h_a.rows() {
            rows.push(r.to_vec());
        }
        for r in h_b.rows() {
            rows.push(r.to_vec());
        }
        let cos = |x: &[f64], y: &[f64]| -> f64 {
            let dot: f64 = (0..d).map(|i| x[i] * y[i]).sum();
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx < NORM_EPS || ny < NORM_EPS {
                0.0
            } else {
                dot / (nx * ny)
            }
        };
        let mut total = 0.0;
        for i in 0..2 * n {
            let partner = (i + n) % (2 * n);
            let pos = (cos(&rows[i], &rows[partner]) / tau).exp();
            let mut denom = 0.0;
            for k in 0..2 * n {
                if k != i {
                    denom += (cos(&rows[i], &rows[k]) / tau).exp();
                }
            }
            total += -(pos / denom).ln();
        }
        total / (2.0 * n as f64)
    }

    #[test]
    fn ntxent_matches_bruteforce_oracle() {
        let mut rng = stream_rng(6, Stream::Sampler);
        for &tau in &[0.1, 0.5, 1.0] {
            for _ in 0..10 {
                let n = rng.random_range(2..=16);
                let d = rng.random_range(2..=8);
                let h_a = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
                let h_b = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0);
                let fast = ntxent_pair(h_a.view(), h_b.view(), tau).unwrap();
                let slow = ntxent_bruteforce(&h_a, &h_b, tau);
                assert!(
                    (fast - slow).abs() <= 1e-10,
                    "tau={tau} fast={fast} slow={slow}"
                );
            }
        }
    }

    #[test]
    fn ntxent_is_scale_invariant() {
        let mut rng = stream_rng(7, Stream::Sampler);
        let h_a = Array2::from_shape_fn((4, 5), |_| rng.random::<f64>() - 0.5);
        let h_b = Array2::from_shape_fn((4, 5), |_| rng.random::<f64>() - 0.5);
        let base = ntxent_pair(h_a.view(), h_b.view(), 0.5).unwrap();
        let scaled = ntxent_pair((&h_a * 3.7).view(), (&h_b * 3.7).view(), 0.5).unwrap();
        assert!((base - scaled).abs() <= 1e-10);
    }

    #[test]
    fn ntxent_is_nonnegative() {
        let mut rng = stream_rng(8, Stream::Sampler);
        for _ in 0..20 {
            let n = rng.random_range(1..=6);
            let h_a = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
            let h_b = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
            assert!(ntxent_pair(h_a.view(), h_b.view(), 0.5).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn zero_norm_rows_are_flagged() {
        let h_a = array![[0.0, 0.0], [1.0, 0.0]];
        let h_b = array![[0.0, 1.0], [1.0, 1.0]];
        let v = ntxent_pair_opts(h_a.view(), h_b.view(), 0.5, true).unwrap();
        assert_eq!(v.zero_norm_rows, 1);
        assert!(v.value.is_finite());
    }

    #[test]
    fn contrastive_uses_all_unordered_pairs() {
        let mut rng = stream_rng(9, Stream::Sampler);
        let hs: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_fn((3, 4), |_| rng.random::<f64>() - 0.5))
            .collect();
        let p01 = ntxent_pair(hs[0].view(), hs[1].view(), 0.5).unwrap();
        let p02 = ntxent_pair(hs[0].view(), hs[2].view(), 0.5).unwrap();
        let p12 = ntxent_pair(hs[1].view(), hs[2].view(), 0.5).unwrap();
        let total = contrastive_loss(&hs, 0.5).unwrap();
        // three unordered pairs from three views
        assert!((total - (p01 + p02 + p12) / 3.0).abs() <= 1e-14);
    }

    #[test]
    fn contrastive_two_views_is_single_pair() {
        let mut rng = stream_rng(10, Stream::Sampler);
        let hs: Vec<Array2<f64>> = (0..2)
            .map(|_| Array2::from_shape_fn((3, 4), |_| rng.random::<f64>() - 0.5))
            .collect();
        let total = contrastive_loss(&hs, 0.5).unwrap();
        let pair = ntxent_pair(hs[0].view(), hs[1].view(), 0.5).unwrap();
        assert_eq!(total, pair);
    }

    #[test]
    fn contrastive_is_permutation_invariant() {
        let mut rng = stream_rng(11, Stream::Sampler);
        let hs: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_fn((3, 4), |_| rng.random::<f64>() - 0.5))
            .collect();
        let fwd = contrastive_loss(&hs, 0.5).unwrap();
        let mut rev = hs.clone();
        rev.reverse();
        let bwd = contrastive_loss(&rev, 0.5).unwrap();
        assert!((fwd - bwd).abs() <= 1e-12);
    }

    #[test]
    fn contrastive_single_view_rejected() {
        let hs = vec![Array2::zeros((3, 4))];
        assert!(contrastive_loss(&hs, 0.5).is_err());
    }

    #[test]
    fn total_loss_branches() {
        assert_eq!(total_loss(0.3, 0.7, 1), 1.0);
        assert_eq!(total_loss(0.3, 0.7, 0), 0.3);
        // contrastive side ignored entirely when alpha = 0
        assert_eq!(total_loss(0.3, f64::NAN, 0), 0.3);
    }

    #[test]
    fn dot_product_decomposition_identity() {
        let mut rng = stream_rng(12, Stream::Sampler);
        for _ in 0..100 {
            let d = 16;
            let draw = |rng: &mut crate::rng::Rng| -> Vec<f64> {
                (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
            };
            let z11 = draw(&mut rng);
            let z12 = draw(&mut rng);
            let z21 = draw(&mut rng);
            let z22 = draw(&mut rng);
            let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
            let z1: Vec<f64> = z11.iter().zip(&z12).map(|(a, b)| (a + b) / 2.0).collect();
            let z2: Vec<f64> = z21.iter().zip(&z22).map(|(a, b)| (a + b) / 2.0).collect();
            let lhs = dot(&z1, &z2);
            let rhs =
                (dot(&z11, &z21) + dot(&z11, &z22) + dot(&z12, &z21) + dot(&z12, &z22)) / 4.0;
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
