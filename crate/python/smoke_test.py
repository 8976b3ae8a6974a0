#!/usr/bin/env python3
"""Smoke test for the nessbench_py extension module.

Builds the cdylib if needed, imports it, and runs a miniature end-to-end
experiment: synthesize a block-model graph, split it, train the
partitioned-subgraph model and the full-graph baseline, and sanity-check
the metrics and embeddings.

Usage:  python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_and_import():
    lib = REPO / "target" / "release" / "libnessbench_py.so"
    if not lib.exists():
        print("building nessbench-py (release)...")
        subprocess.run(
            ["cargo", "build", "-p", "nessbench-py", "--release"],
            cwd=REPO,
            check=True,
        )
    staging = Path(tempfile.mkdtemp(prefix="nessbench_py_"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(lib, staging / f"nessbench_py{suffix}")
    sys.path.insert(0, str(staging))
    import nessbench_py

    return nessbench_py


def approx_between(value, lo, hi, label):
    assert lo <= value <= hi, f"{label} = {value} outside [{lo}, {hi}]"
    print(f"  {label} = {value:.4f}")


def main():
    nb = build_and_import()
    print(f"imported nessbench_py {nb.__version__}")

    graph = nb.Graph.synth_sbm(
        block_sizes=[40] * 15,
        intra_p=0.05,
        inter_p=0.002,
        feature_dim=64,
        feature_noise=0.4,
        seed=2,
    )
    print(f"graph: {graph}")
    assert graph.num_nodes == 600
    homophily = graph.edge_homophily()
    approx_between(homophily, 0.5, 1.0, "edge homophily")

    features = graph.features()
    assert features.shape == (600, 64)

    split = nb.make_split(graph, ratios=(0.85, 0.05, 0.10), k=4, seed=0)
    print(f"split: {split}")
    sizes = split.subgraph_sizes()
    assert sum(sizes) == split.num_train
    assert max(sizes) - min(sizes) <= 1

    ness = nb.train_model(
        graph, split, mode="ness", encoder="gnae", selection="val_auc", seed=0
    )
    print(f"partitioned: {ness}")
    sgae = nb.train_model(
        graph, split, mode="sgae", encoder="gnae", selection="val_auc", seed=0
    )
    print(f"full graph:  {sgae}")
    approx_between(ness.auc, 0.55, 1.0, "ness test AUC")
    approx_between(sgae.auc, 0.55, 1.0, "sgae test AUC")

    emb = ness.embedding()
    assert emb.shape == (600, 32)
    views = ness.subgraph_embeddings()
    assert len(views) == 4
    mean_views = sum(v for v in views) / 4
    assert abs(mean_views - emb).max() < 1e-12

    # rank metrics agree with hand-computable cases
    assert nb.auc([0.9, 0.4], [0.5, 0.1]) == 0.75
    assert nb.average_precision([0.9], [0.95]) == 0.5

    # determinism: same seed, same result
    again = nb.train_model(
        graph, split, mode="ness", encoder="gnae", selection="val_auc", seed=0
    )
    assert again.auc == ness.auc and again.best_epoch == ness.best_epoch

    # split files round-trip
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "split.json"
        split.save(path)
        back = nb.Split.load(path)
        assert back.num_train == split.num_train
        assert back.subgraph_sizes() == sizes

    print("smoke test passed")


if __name__ == "__main__":
    main()
