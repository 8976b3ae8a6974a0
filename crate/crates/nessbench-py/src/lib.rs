//! Python bindings for the link-prediction toolkit: dataset loading and
//! synthesis, edge splitting with static subgraph views, training every
//! regime, and the rank metrics.

use std::path::PathBuf;

use ndarray::Array2;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nessbench::data::{generate_sbm, load_dataset, load_split, save_split, SbmParams};
use nessbench::error::Error;
use nessbench::eval::metric_report;
use nessbench::graph::{build_graph, edge_homophily, EdgeSet};
use nessbench::split::{partition_k, res_split};
use nessbench::trainer::{train, TrainConfig, TrainMode};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A node-feature matrix plus a symmetric adjacency with self-loops.
#[pyclass(name = "Graph")]
struct PyGraph {
    inner: nessbench::graph::Graph,
}

#[pymethods]
impl PyGraph {
    /// Load from whitespace-separated text files (features, edges, labels).
    #[staticmethod]
    #[pyo3(signature = (features, edges, labels=None))]
    fn from_files(features: PathBuf, edges: PathBuf, labels: Option<PathBuf>) -> PyResult<Self> {
        let bundle =
            load_dataset(&features, &edges, labels.as_deref()).map_err(to_py_err)?;
        Ok(PyGraph {
            inner: bundle.graph,
        })
    }

    /// Build from an in-memory feature matrix and edge list.
    #[staticmethod]
    #[pyo3(signature = (features, edges, labels=None))]
    fn from_arrays(
        features: PyReadonlyArray2<f64>,
        edges: Vec<(u32, u32)>,
        labels: Option<Vec<u32>>,
    ) -> PyResult<Self> {
        let features: Array2<f64> = features.as_array().to_owned();
        let edges = EdgeSet::from_pairs(edges).map_err(to_py_err)?;
        let inner = build_graph(features, edges, labels).map_err(to_py_err)?;
        Ok(PyGraph { inner })
    }

    /// Sample a stochastic block model: one-hot block features plus
    /// uniform noise, labels = block ids. Deterministic per seed.
    #[staticmethod]
    #[pyo3(signature = (block_sizes, intra_p, inter_p, feature_dim, feature_noise, seed))]
    fn synth_sbm(
        block_sizes: Vec<usize>,
        intra_p: f64,
        inter_p: f64,
        feature_dim: usize,
        feature_noise: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let params = SbmParams {
            block_sizes,
            intra_p,
            inter_p,
            feature_dim,
            feature_noise,
            seed,
        };
        let bundle = generate_sbm(&params).map_err(to_py_err)?;
        Ok(PyGraph {
            inner: bundle.graph,
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.edges().as_slice().to_vec()
    }

    fn features<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.features().to_owned().into_pyarray(py)
    }

    /// Fraction of edges whose endpoints share a label.
    fn edge_homophily(&self) -> PyResult<f64> {
        edge_homophily(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, num_edges={}, feature_dim={})",
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.feature_dim()
        )
    }
}

/// Train/val/test split plus the K static subgraph views.
#[pyclass(name = "Split")]
struct PySplit {
    split: nessbench::split::Split,
    partition: nessbench::split::Partition,
}

#[pymethods]
impl PySplit {
    #[getter]
    fn num_train(&self) -> usize {
        self.split.train.len()
    }

    #[getter]
    fn num_val(&self) -> usize {
        self.split.val_pos.len()
    }

    #[getter]
    fn num_test(&self) -> usize {
        self.split.test_pos.len()
    }

    #[getter]
    fn k(&self) -> usize {
        self.partition.k()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.split.seed
    }

    fn subgraph_sizes(&self) -> Vec<usize> {
        self.partition
            .subgraphs
            .iter()
            .map(|s| s.edge_set.len())
            .collect()
    }

    /// Persist as the v1 split JSON (includes a content checksum).
    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_split(&self.split, &self.partition, &path).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (split, partition) = load_split(&path).map_err(to_py_err)?;
        Ok(PySplit { split, partition })
    }

    fn __repr__(&self) -> String {
        format!(
            "Split(train={}, val={}, test={}, k={})",
            self.split.train.len(),
            self.split.val_pos.len(),
            self.split.test_pos.len(),
            self.partition.k()
        )
    }
}

/// Random edge split into train/val/test plus a K-way edge-disjoint
/// partition of the training edges.
#[pyfunction]
#[pyo3(signature = (graph, ratios=(0.85, 0.05, 0.10), k=2, seed=0))]
fn make_split(graph: &PyGraph, ratios: (f64, f64, f64), k: usize, seed: u64) -> PyResult<PySplit> {
    let split = res_split(&graph.inner, ratios, seed).map_err(to_py_err)?;
    let partition =
        partition_k(&split.train, k, graph.inner.num_nodes(), seed).map_err(to_py_err)?;
    Ok(PySplit { split, partition })
}

/// Outcome of one training run: selected parameters already applied.
#[pyclass(name = "TrainOutcome")]
struct PyTrainOutcome {
    result: nessbench::trainer::TrainResult,
    test_auc: f64,
    test_ap: f64,
}

#[pymethods]
impl PyTrainOutcome {
    #[getter]
    fn auc(&self) -> f64 {
        self.test_auc
    }

    #[getter]
    fn ap(&self) -> f64 {
        self.test_ap
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.result.best_epoch
    }

    #[getter]
    fn epochs_run(&self) -> usize {
        self.result.epochs_run()
    }

    /// Per-epoch (total, reconstruction, contrastive) training losses.
    fn loss_history(&self) -> Vec<(f64, f64, f64)> {
        self.result
            .loss_history
            .iter()
            .map(|l| (l.total, l.recon, l.contrastive))
            .collect()
    }

    /// Per-epoch (validation loss, validation AUC).
    fn validation_history(&self) -> Vec<(f64, f64)> {
        self.result
            .validation_history
            .iter()
            .map(|v| (v.loss, v.auc))
            .collect()
    }

    /// Joint (mean-aggregated) node embedding at the best epoch.
    fn embedding<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.result.aggregated.clone().into_pyarray(py)
    }

    /// One embedding per static subgraph view at the best epoch.
    fn subgraph_embeddings<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyArray2<f64>>> {
        self.result
            .subgraph_embeddings
            .iter()
            .map(|z| z.clone().into_pyarray(py))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainOutcome(auc={:.4}, ap={:.4}, best_epoch={})",
            self.test_auc, self.test_ap, self.result.best_epoch
        )
    }
}

/// Train one model and evaluate it on the split's test edges.
///
/// Modes: "ness" (static subgraphs, aggregated at test time), "sgae"
/// (full graph), "ds" / "fgae" (dynamically sampled), "dres" (dynamic
/// partition). The split's stored views drive ness; other modes ignore
/// them.
#[pyfunction]
#[pyo3(signature = (graph, split, mode="ness", encoder="gnae", alpha=0, tau=0.5,
                    lr=0.01, weight_decay=0.0, max_epochs=500, patience=10, drop_p=0.2,
                    ds_fraction=0.5, recon_target="subgraph", selection="val_loss",
                    seed=0))]
#[allow(clippy::too_many_arguments)]
fn train_model(
    graph: &PyGraph,
    split: &PySplit,
    mode: &str,
    encoder: &str,
    alpha: u8,
    tau: f64,
    lr: f64,
    weight_decay: f64,
    max_epochs: usize,
    patience: usize,
    drop_p: f64,
    ds_fraction: f64,
    recon_target: &str,
    selection: &str,
    seed: u64,
) -> PyResult<PyTrainOutcome> {
    let mode: TrainMode = mode.parse().map_err(to_py_err)?;
    let config = TrainConfig {
        mode,
        k: split.partition.k(),
        ds_fraction,
        encoder: encoder.parse().map_err(to_py_err)?,
        alpha,
        tau,
        lr,
        weight_decay,
        max_epochs,
        patience,
        drop_p,
        recon_target: recon_target.parse().map_err(to_py_err)?,
        selection: selection.parse().map_err(to_py_err)?,
        seed,
        ..TrainConfig::default()
    };
    let partition = match mode {
        TrainMode::Ness => Some(&split.partition),
        _ => None,
    };
    let result = train(&config, &graph.inner, &split.split, partition).map_err(to_py_err)?;
    let report = metric_report(
        &result.aggregated,
        &split.split.test_pos,
        &split.split.test_neg,
    )
    .map_err(to_py_err)?;
    Ok(PyTrainOutcome {
        result,
        test_auc: report.auc,
        test_ap: report.ap,
    })
}

/// Rank-based AUC with ties credited one half.
#[pyfunction]
fn auc(pos_scores: Vec<f64>, neg_scores: Vec<f64>) -> PyResult<f64> {
    nessbench::eval::auc(&pos_scores, &neg_scores).map_err(to_py_err)
}

/// Average precision over descending score thresholds.
#[pyfunction]
fn average_precision(pos_scores: Vec<f64>, neg_scores: Vec<f64>) -> PyResult<f64> {
    nessbench::eval::average_precision(&pos_scores, &neg_scores).map_err(to_py_err)
}

#[pymodule]
fn nessbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyTrainOutcome>()?;
    m.add_function(wrap_pyfunction!(make_split, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
