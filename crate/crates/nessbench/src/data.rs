//! Dataset loading from plain text files, synthetic graph generation, and
//! split/partition persistence.
//!
//! On-disk dataset format:
//! - features file: one node per line, whitespace-separated decimal reals.
//! - edges file: one edge per line, two 0-based integers; undirected,
//!   duplicates tolerated and deduplicated.
//! - labels file (optional): one integer per line.
//!
//! Splits persist as a single JSON object (schema v1, see [`save_split`]).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{build_graph, edge_homophily, EdgeSet, Graph};
use crate::rng::{stream_rng, Stream};
use crate::split::{Partition, Split, Subgraph};

/// A loaded or generated benchmark graph plus its provenance.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub graph: Graph,
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Clone, Debug)]
pub enum DatasetSource {
    Files {
        features: PathBuf,
        edges: PathBuf,
        labels: Option<PathBuf>,
    },
    Synthetic(SbmParams),
}

/// Stochastic-block-model parameters for synthetic benchmark graphs.
/// Features are a one-hot block indicator plus uniform noise in
/// [0, feature_noise); labels are block ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub intra_p: f64,
    pub inter_p: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn num_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.iter().any(|&b| b == 0) {
            return Err(Error::InvalidParameter(
                "block sizes must be positive".into(),
            ));
        }
        for (name, p) in [("intra_p", self.intra_p), ("inter_p", self.inter_p)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        if self.feature_dim < self.block_sizes.len() {
            return Err(Error::InvalidParameter(format!(
                "feature_dim {} too small for {} blocks",
                self.feature_dim,
                self.block_sizes.len()
            )));
        }
        if self.feature_noise < 0.0 {
            return Err(Error::InvalidParameter(
                "feature_noise must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a stochastic-block-model graph. Bit-identical for a fixed seed.
pub fn generate_sbm(params: &SbmParams) -> Result<DatasetBundle> {
    params.validate()?;
    let n = params.num_nodes();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in params.block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b as u32).take(size));
    }

    let mut edge_rng = stream_rng(params.seed, Stream::SbmEdges);
    let mut pairs = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            let p = if block_of[u as usize] == block_of[v as usize] {
                params.intra_p
            } else {
                params.inter_p
            };
            if edge_rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }

    let mut feat_rng = stream_rng(params.seed, Stream::SbmFeatures);
    let mut features = Array2::zeros((n, params.feature_dim));
    for i in 0..n {
        features[(i, block_of[i] as usize)] = 1.0;
    }
    if params.feature_noise > 0.0 {
        for i in 0..n {
            for j in 0..params.feature_dim {
                features[(i, j)] += feat_rng.random::<f64>() * params.feature_noise;
            }
        }
    }

    let graph = build_graph(features, EdgeSet::from_pairs(pairs)?, Some(block_of))?;
    Ok(DatasetBundle {
        graph,
        name: format!("sbm-{}x{}", params.block_sizes.len(), params.block_sizes[0]),
        source: DatasetSource::Synthetic(params.clone()),
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load a graph from the text formats above. Row i of the features file is
/// node i; malformed lines are reported with their 1-based line number.
pub fn load_dataset(
    features_path: &Path,
    edges_path: &Path,
    labels_path: Option<&Path>,
) -> Result<DatasetBundle> {
    let feat_text = read_to_string(features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in feat_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    path: features_path.display().to_string(),
                    line: lineno + 1,
                    message: format!("invalid real number {tok:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: features_path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: features_path.display().to_string(),
            line: 0,
            message: "empty features file".into(),
        });
    }
    let n = rows.len();
    let f = rows[0].len();
    let features = Array2::from_shape_vec((n, f), rows.into_iter().flatten().collect())
        .expect("row lengths validated above");

    let edge_text = read_to_string(edges_path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in edge_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u32> {
            tok.ok_or(())
                .and_then(|t| t.parse::<u32>().map_err(|_| ()))
                .map_err(|_| Error::Parse {
                    path: edges_path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected two node ids, got {line:?}"),
                })
        };
        let u = parse(toks.next())?;
        let v = parse(toks.next())?;
        if toks.next().is_some() {
            return Err(Error::Parse {
                path: edges_path.display().to_string(),
                line: lineno + 1,
                message: "trailing tokens after edge".into(),
            });
        }
        if u == v {
            return Err(Error::Parse {
                path: edges_path.display().to_string(),
                line: lineno + 1,
                message: format!("self-loop ({u}, {v}) not allowed"),
            });
        }
        pairs.push((u, v));
    }

    let labels = match labels_path {
        Some(path) => {
            let text = read_to_string(path)?;
            let mut labels = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                labels.push(line.trim().parse::<u32>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("invalid label {line:?}"),
                })?);
            }
            if labels.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} feature rows",
                    labels.len(),
                    n
                )));
            }
            Some(labels)
        }
        None => None,
    };

    let graph = build_graph(features, EdgeSet::from_pairs(pairs)?, labels)?;
    let name = features_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(DatasetBundle {
        graph,
        name,
        source: DatasetSource::Files {
            features: features_path.to_path_buf(),
            edges: edges_path.to_path_buf(),
            labels: labels_path.map(Path::to_path_buf),
        },
    })
}

fn format_real(x: f64) -> String {
    // shortest round-trip representation keeps files diffable and exact
    let mut s = String::new();
    write!(s, "{x}").unwrap();
    s
}

/// Write a graph back out in the loadable text formats.
pub fn export_dataset(
    graph: &Graph,
    features_path: &Path,
    edges_path: &Path,
    labels_path: Option<&Path>,
) -> Result<()> {
    let mut feat = String::new();
    for row in graph.features().rows() {
        let line: Vec<String> = row.iter().map(|&x| format_real(x)).collect();
        feat.push_str(&line.join(" "));
        feat.push('\n');
    }
    fs::write(features_path, feat).map_err(|e| Error::io(features_path.display().to_string(), e))?;

    let mut edges = String::new();
    for (u, v) in graph.edges().iter() {
        writeln!(edges, "{u} {v}").unwrap();
    }
    fs::write(edges_path, edges).map_err(|e| Error::io(edges_path.display().to_string(), e))?;

    if let Some(path) = labels_path {
        let labels = graph.labels().ok_or_else(|| {
            Error::MissingLabels("cannot export labels of an unlabeled graph".into())
        })?;
        let mut text = String::new();
        for l in labels {
            writeln!(text, "{l}").unwrap();
        }
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

pub const SPLIT_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SplitFileBody {
    version: u32,
    num_nodes: usize,
    seed: u64,
    train: Vec<(u32, u32)>,
    val_pos: Vec<(u32, u32)>,
    val_neg: Vec<(u32, u32)>,
    test_pos: Vec<(u32, u32)>,
    test_neg: Vec<(u32, u32)>,
    partition: Vec<Vec<(u32, u32)>>,
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    #[serde(flatten)]
    body: SplitFileBody,
    checksum: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn split_body(split: &Split, partition: &Partition) -> SplitFileBody {
    SplitFileBody {
        version: SPLIT_SCHEMA_VERSION,
        num_nodes: split.num_nodes,
        seed: split.seed,
        train: split.train.as_slice().to_vec(),
        val_pos: split.val_pos.as_slice().to_vec(),
        val_neg: split.val_neg.as_slice().to_vec(),
        test_pos: split.test_pos.as_slice().to_vec(),
        test_neg: split.test_neg.as_slice().to_vec(),
        partition: partition
            .subgraphs
            .iter()
            .map(|s| s.edge_set.as_slice().to_vec())
            .collect(),
    }
}

/// Serialize a split + partition to the v1 JSON schema. The checksum field
/// is the sha256 of the canonical serialization of the other fields.
pub fn split_to_json(split: &Split, partition: &Partition) -> Result<String> {
    let body = split_body(split, partition);
    let canonical = serde_json::to_string(&body)?;
    let file = SplitFile {
        body,
        checksum: sha256_hex(canonical.as_bytes()),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn save_split(split: &Split, partition: &Partition, path: &Path) -> Result<()> {
    let json = split_to_json(split, partition)?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn split_from_json(json: &str, path_for_errors: &str) -> Result<(Split, Partition)> {
    let file: SplitFile = serde_json::from_str(json)?;
    if file.body.version != SPLIT_SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: file.body.version,
            expected: SPLIT_SCHEMA_VERSION,
        });
    }
    let canonical = serde_json::to_string(&file.body)?;
    if sha256_hex(canonical.as_bytes()) != file.checksum {
        return Err(Error::ChecksumMismatch {
            path: path_for_errors.into(),
        });
    }
    let b = file.body;
    let split = Split {
        train: EdgeSet::from_pairs(b.train)?,
        val_pos: EdgeSet::from_pairs(b.val_pos)?,
        val_neg: EdgeSet::from_pairs(b.val_neg)?,
        test_pos: EdgeSet::from_pairs(b.test_pos)?,
        test_neg: EdgeSet::from_pairs(b.test_neg)?,
        num_nodes: b.num_nodes,
        seed: b.seed,
    };
    let subgraphs = b
        .partition
        .into_iter()
        .enumerate()
        .map(|(index, pairs)| Ok(Subgraph::new(index, b.num_nodes, EdgeSet::from_pairs(pairs)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((split, Partition { subgraphs }))
}

pub fn load_split(path: &Path) -> Result<(Split, Partition)> {
    let json = read_to_string(path)?;
    split_from_json(&json, &path.display().to_string())
}

/// Dataset characterization: node/edge/class counts and edge homophily.
pub fn dataset_stats(bundle: &DatasetBundle) -> serde_json::Value {
    let g = &bundle.graph;
    let classes = g.labels().map(|l| {
        let mut distinct: Vec<u32> = l.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.len()
    });
    serde_json::json!({
        "name": bundle.name,
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "feature_dim": g.feature_dim(),
        "classes": classes,
        "edge_homophily": edge_homophily(g).ok(),
    })
}
