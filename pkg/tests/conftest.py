"""Shared fixtures: synthetic releases, corpora, and on-disk corpus trees."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from leanmetrics import corpus as C

# Project/version layout of the public defect corpus: 10 projects, 34 releases.
PROMISE_LAYOUT = {
    "ant": ["1.3", "1.4", "1.5", "1.6", "1.7"],
    "camel": ["1.0", "1.2", "1.4", "1.6"],
    "ivy": ["1.1", "1.4", "2.0"],
    "jedit": ["3.2", "4.0"],
    "lucene": ["2.0", "2.2", "2.4"],
    "poi": ["1.5", "2.0", "2.5", "3.0"],
    "synapse": ["1.0", "1.1", "1.2"],
    "velocity": ["1.4", "1.5", "1.6"],
    "xalan": ["2.4", "2.5", "2.6"],
    "xerces": ["init", "1.2", "1.3", "1.4"],
}


def make_release(
    project: str,
    version: str,
    n: int = 50,
    seed: int = 0,
    buggy_rate: float = 0.35,
    signal: tuple[str, ...] = ("CBO", "LOC"),
    shift: float = 0.0,
    preprocess: bool = True,
) -> C.Release:
    """Synthetic release whose ``signal`` metrics carry the label."""
    rng = np.random.default_rng(seed)
    signal_cols = [C.METRIC_INDEX[m] for m in signal]
    instances = []
    for i in range(n):
        values = rng.normal(2.0 + shift, 1.0, size=len(C.METRICS)).clip(0.0)
        buggy = rng.random() < buggy_rate
        if buggy:
            for col in signal_cols:
                values[col] += 2.5
        instances.append(
            C.Instance(
                f"pkg.Class{i}",
                tuple(float(v) for v in values),
                (1 + int(rng.random() * 3)) if buggy else 0,
            )
        )
    release = C.Release(project, version, tuple(instances))
    return C.preprocess(release) if preprocess else release


def make_corpus(layout: dict[str, list[str]], n: int = 50, seed: int = 0, **kwargs) -> C.Corpus:
    releases = []
    counter = seed
    for project, versions in layout.items():
        for version in versions:
            counter += 1
            releases.append(make_release(project, version, n=n, seed=counter, **kwargs))
    return C.Corpus(tuple(releases))


def release_csv_text(release: C.Release) -> str:
    return C.release_to_csv(release)


def write_corpus_tree(tmp_path: Path, layout: dict[str, list[str]],
                      n: int = 40, seed: int = 100) -> Path:
    """Write raw CSVs plus a manifest; returns the manifest path."""
    manifest = {"projects": []}
    counter = seed
    for project, versions in layout.items():
        entry = {"name": project, "releases": []}
        for version in versions:
            counter += 1
            release = make_release(project, version, n=n, seed=counter, preprocess=False)
            file_name = f"{project}-{version}.csv"
            (tmp_path / file_name).write_text(C.release_to_csv(release), encoding="utf-8")
            entry["releases"].append({"version": version, "path": file_name})
        manifest["projects"].append(entry)
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return manifest_path


@pytest.fixture
def small_corpus() -> C.Corpus:
    return make_corpus({"alpha": ["1.0", "1.1", "1.2"], "beta": ["1.0", "2.0"]})


@pytest.fixture
def paper_shape_corpus() -> C.Corpus:
    """34 tiny releases in the public corpus's project/version layout."""
    return make_corpus(PROMISE_LAYOUT, n=12, seed=500)


@pytest.fixture
def corpus_tree(tmp_path) -> Path:
    return write_corpus_tree(tmp_path, {"alpha": ["1.0", "1.1", "1.2"], "beta": ["1.0", "2.0"]})
