//! Command implementations behind the `nessbench` binary: dataset
//! synthesis, splitting, training, evaluation, analysis, and multi-seed
//! comparison sweeps.
//!
//! Config files are flat `key=value` text with `#` comments. Every command
//! is deterministic given its inputs and seed; wall-clock timing and host
//! details are confined to the run manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    dataset_stats, export_dataset, generate_sbm, load_dataset, load_split, save_split, sha256_hex,
    DatasetBundle, SbmParams,
};
use crate::encoder::{load_checkpoint, save_checkpoint, EncoderParams, ModelParams};
use crate::error::{Error, Result};
use crate::eval::{
    aggregation_vs_direct, consensus, ensemble_baseline, gradual_aggregation_curve, metric_report,
    pairwise_pearson, subgraph_mean_representation, Aggregation, MetricReport,
};
use crate::graph::Graph;
use crate::rng::{stream_rng, Stream};
use crate::split::{partition_k, res_split, sample_re, sample_rn, sample_rwj, Partition, Split};
use crate::trainer::{
    metrics_csv, subgraph_embeddings_for, train, ReconTarget, Selection, TrainConfig, TrainMode,
    TrainResult,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dataset file paths named by a train config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub edges: PathBuf,
    pub labels: Option<PathBuf>,
}

impl DatasetPaths {
    pub fn load(&self) -> Result<DatasetBundle> {
        load_dataset(&self.features, &self.edges, self.labels.as_deref())
    }

    /// Content hash over the concatenated dataset files.
    pub fn content_sha256(&self) -> Result<String> {
        let mut bytes = Vec::new();
        for path in [Some(&self.features), Some(&self.edges), self.labels.as_ref()]
            .into_iter()
            .flatten()
        {
            bytes.extend(fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?);
        }
        Ok(sha256_hex(&bytes))
    }
}

/// Parse a flat key=value config file into a train config plus dataset
/// paths. Unknown keys are usage errors.
pub fn parse_config_file(path: &Path) -> Result<(TrainConfig, DatasetPaths)> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_str(&text, path)
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<(TrainConfig, DatasetPaths)> {
    let mut cfg = TrainConfig::default();
    let mut features: Option<PathBuf> = None;
    let mut edges: Option<PathBuf> = None;
    let mut labels: Option<PathBuf> = None;

    let bad = |line: usize, msg: String| Error::InvalidConfig(format!(
        "{}:{}: {}",
        path.display(),
        line,
        msg
    ));

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(lineno + 1, format!("expected key=value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_err = |e: String| bad(lineno + 1, e);
        match key {
            "mode" => cfg.mode = value.parse().map_err(|e: Error| parse_err(e.to_string()))?,
            "k" => cfg.k = value.parse().map_err(|_| parse_err(format!("bad k {value:?}")))?,
            "ds_fraction" => {
                cfg.ds_fraction = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad ds_fraction {value:?}")))?
            }
            "encoder" => {
                cfg.encoder = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
            }
            "alpha" => {
                cfg.alpha = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad alpha {value:?}")))?
            }
            "tau" => {
                cfg.tau = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad tau {value:?}")))?
            }
            "lr" => {
                cfg.lr = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad lr {value:?}")))?
            }
            "beta1" => {
                cfg.beta1 = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad beta1 {value:?}")))?
            }
            "beta2" => {
                cfg.beta2 = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad beta2 {value:?}")))?
            }
            "eps" => {
                cfg.eps = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad eps {value:?}")))?
            }
            "weight_decay" => {
                cfg.weight_decay = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad weight_decay {value:?}")))?
            }
            "max_epochs" => {
                cfg.max_epochs = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad max_epochs {value:?}")))?
            }
            "patience" => {
                cfg.patience = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad patience {value:?}")))?
            }
            "drop_p" => {
                cfg.drop_p = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad drop_p {value:?}")))?
            }
            "recon_target" => {
                cfg.recon_target = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
            }
            "selection" => {
                cfg.selection = value.parse().map_err(|e: Error| parse_err(e.to_string()))?
            }
            "use_bias" => {
                cfg.use_bias = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad use_bias {value:?}")))?
            }
            "include_intra_view" => {
                cfg.include_intra_view = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad include_intra_view {value:?}")))?
            }
            "seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| parse_err(format!("bad seed {value:?}")))?
            }
            "features" => features = Some(PathBuf::from(value)),
            "edges" => edges = Some(PathBuf::from(value)),
            "labels" => labels = Some(PathBuf::from(value)),
            other => return Err(bad(lineno + 1, format!("unknown key {other:?}"))),
        }
    }

    let features =
        features.ok_or_else(|| Error::InvalidConfig("config must set features=".into()))?;
    let edges = edges.ok_or_else(|| Error::InvalidConfig("config must set edges=".into()))?;
    Ok((
        cfg,
        DatasetPaths {
            features,
            edges,
            labels,
        },
    ))
}

fn write_out(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Generate a synthetic dataset and write it in the loadable text format,
/// together with a stats JSON.
pub fn cmd_synth(params: &SbmParams, out_dir: &Path) -> Result<serde_json::Value> {
    let bundle = generate_sbm(params)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    export_dataset(
        &bundle.graph,
        &out_dir.join("features.txt"),
        &out_dir.join("edges.txt"),
        Some(&out_dir.join("labels.txt")),
    )?;
    let stats = dataset_stats(&bundle);
    write_out(
        &out_dir.join("dataset.json"),
        serde_json::to_string_pretty(&stats)?,
    )?;
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitSampler {
    Res,
    Re,
    Rwj,
    Rn,
}

impl std::str::FromStr for SplitSampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "res" => Ok(SplitSampler::Res),
            "re" => Ok(SplitSampler::Re),
            "rwj" => Ok(SplitSampler::Rwj),
            "rn" => Ok(SplitSampler::Rn),
            other => Err(Error::InvalidConfig(format!("unknown sampler {other:?}"))),
        }
    }
}

/// Split a dataset and build K static subgraph views, writing the split
/// JSON. `res` partitions edge-disjointly; the alternative samplers draw K
/// possibly-overlapping views of the training edges.
pub fn cmd_split(
    dataset: &DatasetPaths,
    ratios: (f64, f64, f64),
    k: usize,
    sampler: SplitSampler,
    seed: u64,
    out: &Path,
) -> Result<(Split, Partition)> {
    let bundle = dataset.load()?;
    let graph = &bundle.graph;
    let split = res_split(graph, ratios, seed)?;
    let n = graph.num_nodes();
    let partition = match sampler {
        SplitSampler::Res => partition_k(&split.train, k, n, seed)?,
        SplitSampler::Re => {
            let mut rng = stream_rng(seed, Stream::Sampler);
            let size = (split.train.len() + k - 1) / k;
            let mut subgraphs = Vec::with_capacity(k);
            for index in 0..k {
                let mut s = sample_re(&split.train, size, n, &mut rng)?;
                s.index = index;
                subgraphs.push(s);
            }
            Partition { subgraphs }
        }
        SplitSampler::Rwj => {
            let mut rng = stream_rng(seed, Stream::Sampler);
            let budget = (split.train.len() + k - 1) / k;
            let mut subgraphs = Vec::with_capacity(k);
            for index in 0..k {
                let mut s = sample_rwj(&split.train, budget, n, 0.1, &mut rng)?;
                s.index = index;
                subgraphs.push(s);
            }
            Partition { subgraphs }
        }
        SplitSampler::Rn => {
            let mut rng = stream_rng(seed, Stream::Sampler);
            let nodes = (n + k - 1) / k;
            let mut subgraphs = Vec::with_capacity(k);
            for index in 0..k {
                let mut s = sample_rn(&split.train, nodes, n, &mut rng)?;
                s.index = index;
                subgraphs.push(s);
            }
            Partition { subgraphs }
        }
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    save_split(&split, &partition, out)?;
    Ok((split, partition))
}

/// Context stored in the checkpoint header so evaluation and analysis can
/// rebuild the test-time embedding.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainContext {
    pub mode: TrainMode,
    pub k: usize,
    pub alpha: u8,
    pub tau: f64,
    pub recon_target: ReconTarget,
    pub selection: Selection,
    pub dataset: DatasetPaths,
    pub dataset_sha256: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    toolkit_version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a TrainConfig,
    dataset: &'a DatasetPaths,
    dataset_sha256: &'a str,
    split_path: String,
    split_sha256: String,
    outputs: HashMap<&'a str, String>,
    timing: serde_json::Value,
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
    pub result: TrainResult,
}

/// Train per a config file on a stored split; writes checkpoint,
/// metrics CSV, and manifest into `out_dir`.
pub fn cmd_train(
    config_path: &Path,
    split_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<TrainArtifacts> {
    let started = Instant::now();
    let (mut config, dataset) = parse_config_file(config_path)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let bundle = dataset.load()?;
    let (split, partition) = load_split(split_path)?;
    let partition_arg = match config.mode {
        TrainMode::Ness => Some(&partition),
        _ => None,
    };
    let result = train(&config, &bundle.graph, &split, partition_arg)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let dataset_sha = dataset.content_sha256()?;
    let context = TrainContext {
        mode: config.mode,
        k: config.k,
        alpha: config.alpha,
        tau: config.tau,
        recon_target: config.recon_target,
        selection: config.selection,
        dataset: dataset.clone(),
        dataset_sha256: dataset_sha.clone(),
        best_epoch: result.best_epoch,
        epochs_run: result.epochs_run(),
    };
    let checkpoint = out_dir.join("checkpoint.ness");
    save_checkpoint(
        &checkpoint,
        &result.best_params,
        config.seed,
        result.best_epoch,
        serde_json::to_value(&context)?,
    )?;
    let metrics = out_dir.join("metrics.csv");
    write_out(&metrics, metrics_csv(&result))?;

    let split_bytes =
        fs::read(split_path).map_err(|e| Error::io(split_path.display().to_string(), e))?;
    let manifest_path = out_dir.join("manifest.json");
    let manifest = RunManifest {
        toolkit_version: TOOLKIT_VERSION,
        command: "train",
        seed: config.seed,
        config: &config,
        dataset: &dataset,
        dataset_sha256: &dataset_sha,
        split_path: split_path.display().to_string(),
        split_sha256: sha256_hex(&split_bytes),
        outputs: HashMap::from([
            ("checkpoint", checkpoint.display().to_string()),
            ("metrics", metrics.display().to_string()),
        ]),
        timing: serde_json::json!({
            "total_ms": started.elapsed().as_millis() as u64,
            "epoch_ms": result.epoch_wall_ms,
        }),
    };
    write_out(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(TrainArtifacts {
        checkpoint,
        metrics,
        manifest: manifest_path,
        result,
    })
}

fn context_from_header(header: &crate::encoder::CheckpointHeader) -> Result<TrainContext> {
    serde_json::from_value(header.extra.clone()).map_err(Error::Json)
}

/// Load a checkpoint plus its training context and dataset, verifying both
/// content hashes.
fn load_run(
    checkpoint_path: &Path,
) -> Result<(ModelParams, TrainContext, DatasetBundle, u64)> {
    let (params, header) = load_checkpoint(checkpoint_path)?;
    let context = context_from_header(&header)?;
    let actual = context.dataset.content_sha256()?;
    if actual != context.dataset_sha256 {
        return Err(Error::ChecksumMismatch {
            path: context.dataset.features.display().to_string(),
        });
    }
    let bundle = context.dataset.load()?;
    Ok((params, context, bundle, header.seed))
}

/// Test-time embeddings for a trained model: one per static subgraph for
/// ness, one full-graph embedding otherwise (dres draws a fresh partition
/// from the stored seed for its per-subgraph analyses).
fn test_time_embeddings(
    params: &EncoderParams,
    context: &TrainContext,
    graph: &Graph,
    split: &Split,
    partition: &Partition,
    seed: u64,
) -> Result<Vec<ndarray::Array2<f64>>> {
    match context.mode {
        TrainMode::Ness => subgraph_embeddings_for(params, graph, &partition.subgraphs),
        TrainMode::Dres => {
            let mut rng = stream_rng(seed, Stream::Sampler);
            let parts = crate::split::dynamic_res_partition(
                &split.train,
                context.k,
                graph.num_nodes(),
                &mut rng,
            )?;
            subgraph_embeddings_for(params, graph, &parts.subgraphs)
        }
        _ => {
            let full = crate::split::Subgraph::new(0, graph.num_nodes(), split.train.clone());
            subgraph_embeddings_for(params, graph, std::slice::from_ref(&full))
        }
    }
}

fn joint_embedding(
    params: &EncoderParams,
    context: &TrainContext,
    graph: &Graph,
    split: &Split,
    partition: &Partition,
) -> Result<ndarray::Array2<f64>> {
    match context.mode {
        TrainMode::Ness => {
            let zs = subgraph_embeddings_for(params, graph, &partition.subgraphs)?;
            crate::eval::aggregate(&zs, Aggregation::Mean)
        }
        _ => {
            let full = crate::split::Subgraph::new(0, graph.num_nodes(), split.train.clone());
            let zs = subgraph_embeddings_for(params, graph, std::slice::from_ref(&full))?;
            Ok(zs.into_iter().next().expect("one embedding"))
        }
    }
}

/// Evaluate a checkpoint on the stored test split: AUC and AP of the
/// mode's test-time embedding.
pub fn cmd_eval(checkpoint_path: &Path, split_path: &Path) -> Result<MetricReport> {
    let (params, context, bundle, _) = load_run(checkpoint_path)?;
    let (split, partition) = load_split(split_path)?;
    let joint = joint_embedding(&params.encoder, &context, &bundle.graph, &split, &partition)?;
    metric_report(&joint, &split.test_pos, &split.test_neg)
}

pub const ALL_ANALYSES: [&str; 5] = ["fig3a", "fig3b", "fig3c", "fig4a", "fig5"];

/// One object per analysis block; keys are the stable schema names.
#[derive(Debug, Default, Serialize)]
pub struct AnalysisReport {
    /// Pairwise correlation of subgraph mean representations.
    #[serde(rename = "fig3a", skip_serializing_if = "Option::is_none")]
    pub correlation: Option<serde_json::Value>,
    /// Consensus ratio of per-subgraph predictions on the test set.
    #[serde(rename = "fig3b", skip_serializing_if = "Option::is_none")]
    pub consensus: Option<serde_json::Value>,
    /// Joint-embedding test metrics.
    #[serde(rename = "fig3c", skip_serializing_if = "Option::is_none")]
    pub joint: Option<serde_json::Value>,
    /// Aggregated vs direct full-graph encoding.
    #[serde(rename = "fig4a", skip_serializing_if = "Option::is_none")]
    pub agg_vs_direct: Option<serde_json::Value>,
    /// Per-subgraph AUC, gradual aggregation curve, ensemble baseline.
    #[serde(rename = "fig5", skip_serializing_if = "Option::is_none")]
    pub curves: Option<serde_json::Value>,
}

/// Run the requested analyses for a checkpoint. `analyses` of None selects
/// every analysis applicable to the checkpoint's view count; explicitly
/// requested analyses fail if inapplicable.
pub fn cmd_analyze(
    checkpoint_path: &Path,
    split_path: &Path,
    analyses: Option<&[String]>,
    out_dir: &Path,
) -> Result<AnalysisReport> {
    let (params, context, bundle, seed) = load_run(checkpoint_path)?;
    let (split, partition) = load_split(split_path)?;
    let graph = &bundle.graph;

    let explicit = analyses.is_some();
    let requested: Vec<String> = match analyses {
        Some(list) => {
            for name in list {
                if !ALL_ANALYSES.contains(&name.as_str()) {
                    return Err(Error::InvalidConfig(format!(
                        "unknown analysis {name:?} (expected one of {ALL_ANALYSES:?})"
                    )));
                }
            }
            list.to_vec()
        }
        None => ALL_ANALYSES.iter().map(|s| s.to_string()).collect(),
    };

    let zs = test_time_embeddings(&params.encoder, &context, graph, &split, &partition, seed)?;
    let multi_view = zs.len() >= 2;
    let want = |name: &str| requested.iter().any(|r| r == name);
    let mut report = AnalysisReport::default();
    let mut csv = String::from("analysis,name,index,value\n");

    if want("fig3a") {
        if multi_view {
            let subgraphs: &[crate::split::Subgraph] = match context.mode {
                TrainMode::Ness => &partition.subgraphs,
                _ => &[],
            };
            let vectors = if subgraphs.len() == zs.len() {
                zs.iter()
                    .zip(subgraphs)
                    .map(|(z, s)| subgraph_mean_representation(z, s))
                    .collect::<Result<Vec<_>>>()?
            } else {
                return Err(Error::InvalidConfig(
                    "fig3a needs the static partition used in training".into(),
                ));
            };
            let summary = pairwise_pearson(&vectors)?;
            csv.push_str(&format!(
                "fig3a,mean_pairwise_pearson,,{}\n",
                summary.mean
            ));
            report.correlation = Some(serde_json::to_value(&summary)?);
        } else if explicit {
            return Err(Error::InvalidConfig(
                "fig3a needs at least two subgraph views".into(),
            ));
        }
    }
    if want("fig3b") {
        if multi_view {
            let ratio = consensus(&zs, &split.test_pos, &split.test_neg, 0.5)?;
            csv.push_str(&format!("fig3b,consensus_ratio,,{ratio}\n"));
            report.consensus = Some(serde_json::json!({
                "consensus_ratio": ratio,
                "threshold": 0.5,
                "k": zs.len(),
            }));
        } else if explicit {
            return Err(Error::InvalidConfig(
                "fig3b needs at least two subgraph views".into(),
            ));
        }
    }
    if want("fig3c") {
        let joint = crate::eval::aggregate(&zs, Aggregation::Mean)?;
        let metrics = metric_report(&joint, &split.test_pos, &split.test_neg)?;
        csv.push_str(&format!("fig3c,joint_auc,,{}\n", metrics.auc));
        csv.push_str(&format!("fig3c,joint_ap,,{}\n", metrics.ap));
        report.joint = Some(serde_json::to_value(&metrics)?);
    }
    if want("fig4a") {
        let cmp = aggregation_vs_direct(
            &params.encoder,
            graph,
            &split.train,
            &zs,
            &split.test_pos,
            &split.test_neg,
        )?;
        csv.push_str(&format!("fig4a,auc_agg,,{}\n", cmp.auc_agg));
        csv.push_str(&format!("fig4a,auc_direct,,{}\n", cmp.auc_direct));
        csv.push_str(&format!("fig4a,delta,,{}\n", cmp.delta));
        report.agg_vs_direct = Some(serde_json::to_value(cmp)?);
    }
    if want("fig5") {
        let per: Vec<f64> = zs
            .iter()
            .map(|z| Ok(metric_report(z, &split.test_pos, &split.test_neg)?.auc))
            .collect::<Result<_>>()?;
        let gradual = gradual_aggregation_curve(&zs, &split.test_pos, &split.test_neg)?;
        let ensemble = ensemble_baseline(&zs, &split.test_pos, &split.test_neg)?;
        for (i, v) in per.iter().enumerate() {
            csv.push_str(&format!("fig5,per_subgraph_auc,{i},{v}\n"));
        }
        for (i, v) in gradual.iter().enumerate() {
            csv.push_str(&format!("fig5,gradual_auc,{i},{v}\n"));
        }
        csv.push_str(&format!("fig5,ensemble_auc,,{}\n", ensemble.auc));
        report.curves = Some(serde_json::json!({
            "per_subgraph_auc": per,
            "gradual_auc": gradual,
            "ensemble_auc": ensemble.auc,
            "ensemble_ap": ensemble.ap,
        }));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    write_out(
        &out_dir.join("analysis.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    write_out(&out_dir.join("analysis.csv"), &csv)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRun {
    pub config: String,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub config: String,
    pub n_seeds: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One training run inside a sweep: fresh 85/5/10 split for the seed,
/// partition sized per the config, training, and test metrics of the
/// mode's test-time embedding.
pub fn sweep_run(config: &TrainConfig, graph: &Graph, seed: u64) -> Result<(MetricReport, TrainResult)> {
    let mut config = config.clone();
    config.seed = seed;
    let split = res_split(graph, (0.85, 0.05, 0.10), seed)?;
    let partition = match config.mode {
        TrainMode::Ness => Some(partition_k(
            &split.train,
            config.k,
            graph.num_nodes(),
            seed,
        )?),
        _ => None,
    };
    let result = train(&config, graph, &split, partition.as_ref())?;
    let report = metric_report(&result.aggregated, &split.test_pos, &split.test_neg)?;
    Ok((report, result))
}

/// Multi-seed comparison sweep over a config matrix. Runs execute in a
/// worker pool; outputs reduce in config-then-seed order.
pub fn cmd_compare(
    matrix_path: &Path,
    seeds: &[u64],
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<CompareSummary>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    let text = fs::read_to_string(matrix_path)
        .map_err(|e| Error::io(matrix_path.display().to_string(), e))?;
    let config_paths: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(PathBuf::from)
        .collect();
    if config_paths.is_empty() {
        return Err(Error::InvalidConfig("config matrix is empty".into()));
    }

    let mut configs = Vec::new();
    let mut graphs: HashMap<String, Arc<Graph>> = HashMap::new();
    for path in &config_paths {
        let (cfg, dataset) = parse_config_file(path)?;
        let key = format!(
            "{}|{}|{:?}",
            dataset.features.display(),
            dataset.edges.display(),
            dataset.labels.as_ref().map(|p| p.display().to_string())
        );
        if !graphs.contains_key(&key) {
            graphs.insert(key.clone(), Arc::new(dataset.load()?.graph));
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        configs.push((name, cfg, Arc::clone(&graphs[&key])));
    }

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<CompareRun>> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(c, seed)| {
                let (name, cfg, graph) = &configs[c];
                let (report, result) = sweep_run(cfg, graph, seed)?;
                Ok(CompareRun {
                    config: name.clone(),
                    seed,
                    auc: report.auc,
                    ap: report.ap,
                    best_epoch: result.best_epoch,
                    epochs_run: result.epochs_run(),
                })
            })
            .collect()
    });
    let runs: Vec<CompareRun> = results.into_iter().collect::<Result<_>>()?;

    let mut runs_csv = String::from("config,seed,auc,ap,best_epoch,epochs_run\n");
    for r in &runs {
        runs_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.config, r.seed, r.auc, r.ap, r.best_epoch, r.epochs_run
        ));
    }

    let mut summaries = Vec::new();
    let mut summary_csv = String::from("config,n_seeds,auc_mean,auc_std,ap_mean,ap_std\n");
    for (c, (name, _, _)) in configs.iter().enumerate() {
        let rows: Vec<&CompareRun> = jobs
            .iter()
            .zip(&runs)
            .filter(|((ci, _), _)| *ci == c)
            .map(|(_, r)| r)
            .collect();
        let aucs: Vec<f64> = rows.iter().map(|r| r.auc).collect();
        let aps: Vec<f64> = rows.iter().map(|r| r.ap).collect();
        let (auc_mean, auc_std) = mean_std(&aucs);
        let (ap_mean, ap_std) = mean_std(&aps);
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            rows.len(),
            auc_mean,
            auc_std,
            ap_mean,
            ap_std
        ));
        summaries.push(CompareSummary {
            config: name.clone(),
            n_seeds: rows.len(),
            auc_mean,
            auc_std,
            ap_mean,
            ap_std,
        });
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    write_out(&out_dir.join("runs.csv"), &runs_csv)?;
    write_out(&out_dir.join("summary.csv"), &summary_csv)?;
    Ok(summaries)
}

pub fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "ratios must be three comma-separated reals, got {s:?}"
        )));
    }
    let mut vals = [0.0; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad ratio {p:?}")))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad seed {p:?}")))
        })
        .collect()
}

pub fn parse_block_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad block size {p:?}")))
        })
        .collect()
}
