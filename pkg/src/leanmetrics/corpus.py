"""PROMISE-style release corpus: CSV parsing, preprocessing, and summaries.

A release is one version of one project; each instance is a class file with
20 static code metric values and a bug count. Releases are immutable after
construction, so they can be shared freely across workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlreadyFiltered,
    DuplicateColumn,
    EmptyFile,
    ManifestError,
    MissingColumn,
    NegativeBugCount,
    NegativeMetricValue,
    NonNumericCell,
    NotBinarized,
    UnknownColumn,
    UnknownMetric,
)

#: Canonical metric vocabulary. The order is total and fixed; every tie-break
#: in the toolkit falls back to position in this tuple.
METRICS: tuple[str, ...] = (
    "WMC", "DIT", "NOC", "CBO", "RFC", "LCOM", "CA", "CE", "NPM", "LCOM3",
    "LOC", "DAM", "MOA", "MFA", "CAM", "IC", "CBM", "AMC", "MAX_CC", "AVG_CC",
)

METRIC_INDEX: dict[str, int] = {name: i for i, name in enumerate(METRICS)}

BUG_COLUMN = "bug"

#: Leading identifier columns tolerated (and ignored, except for the class
#: name) in input CSVs. PROMISE files carry two columns named "name".
IDENTIFIER_COLUMNS = frozenset({"name", "version"})

# preprocessing state flags
RAW = "raw"
LOG_FILTERED = "log_filtered"
BINARIZED = "binarized"


def canonical_subset(names: Iterable[str]) -> tuple[str, ...]:
    """Validate metric names against the vocabulary and sort canonically."""
    unique = []
    seen = set()
    for name in names:
        if name not in METRIC_INDEX:
            raise UnknownMetric(name)
        if name not in seen:
            seen.add(name)
            unique.append(name)
    return tuple(sorted(unique, key=METRIC_INDEX.__getitem__))


@dataclass(frozen=True)
class Instance:
    """One class file: 20 metric values plus its bug count."""

    class_name: str
    metrics: tuple[float, ...]
    bug_count: int

    def __post_init__(self):
        if len(self.metrics) != len(METRICS):
            raise ValueError(
                f"expected {len(METRICS)} metric values, got {len(self.metrics)}"
            )
        if self.bug_count < 0:
            raise ValueError("bug_count must be >= 0")

    @property
    def buggy(self) -> bool:
        return self.bug_count > 0


@dataclass(frozen=True)
class Release:
    """All instances of one (project, version), plus preprocessing state."""

    project: str
    version: str
    instances: tuple[Instance, ...]
    state: frozenset[str] = frozenset({RAW})

    def __post_init__(self):
        if not self.instances:
            raise ValueError("a release must contain at least one instance")

    @property
    def key(self) -> tuple[str, str]:
        return (self.project, self.version)

    @property
    def label(self) -> str:
        return f"{self.project}-{self.version}"

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_defective(self) -> int:
        return sum(1 for inst in self.instances if inst.buggy)

    @property
    def binarized(self) -> bool:
        return BINARIZED in self.state


@dataclass(frozen=True)
class Corpus:
    """Ordered releases; project and version order come from the manifest."""

    releases: tuple[Release, ...]
    _index: dict[tuple[str, str], int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        index = {}
        for pos, rel in enumerate(self.releases):
            if rel.key in index:
                raise ManifestError(f"duplicate release {rel.label}")
            index[rel.key] = pos
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.releases)

    def position(self, release: Release) -> int:
        return self._index[release.key]

    def get(self, project: str, version: str) -> Release:
        return self.releases[self._index[(project, version)]]

    def projects(self) -> tuple[str, ...]:
        seen: list[str] = []
        for rel in self.releases:
            if rel.project not in seen:
                seen.append(rel.project)
        return tuple(seen)

    def releases_of(self, project: str) -> tuple[Release, ...]:
        return tuple(r for r in self.releases if r.project == project)

    def foreign_releases(self, project: str) -> tuple[Release, ...]:
        return tuple(r for r in self.releases if r.project != project)


# --- CSV parsing ----------------------------------------------------------


def _parse_number(text: str, row: int, column: str) -> float:
    s = text.strip()
    # scientific notation is fine; thousands separators and Python-style
    # underscores are not data we want to silently accept
    if not s or "," in s or "_" in s:
        raise NonNumericCell(row, column, text)
    try:
        value = float(s)
    except ValueError:
        raise NonNumericCell(row, column, text) from None
    if not math.isfinite(value):
        raise NonNumericCell(row, column, text)
    return value


def parse_release(
    csv_text: str, project: str, version: str, lenient: bool = False
) -> Release:
    """Parse one PROMISE-format CSV into a raw Release.

    The header row is matched case-insensitively after stripping whitespace.
    Metric columns may appear in any order; leading identifier columns
    ("name", "version") are tolerated, and the class name is taken from the
    last "name" column when present. Any other column is an error unless
    ``lenient`` is set.
    """
    rows = [r for r in csv.reader(io.StringIO(csv_text)) if r]
    if not rows:
        raise EmptyFile("no header row")

    header = [cell.strip().lower() for cell in rows[0]]
    metric_pos: dict[str, int] = {}
    bug_pos = None
    name_pos = None
    ignored: set[int] = set()
    lower_metrics = {m.lower(): m for m in METRICS}
    for pos, col in enumerate(header):
        if col in lower_metrics:
            canon = lower_metrics[col]
            if canon in metric_pos:
                raise DuplicateColumn(col)
            metric_pos[canon] = pos
        elif col == BUG_COLUMN:
            if bug_pos is not None:
                raise DuplicateColumn(col)
            bug_pos = pos
        elif col == "name":
            name_pos = pos  # PROMISE carries two; the last one is the class path
        elif col in IDENTIFIER_COLUMNS:
            pass
        elif lenient:
            ignored.add(pos)
        else:
            raise UnknownColumn(col)

    for metric in METRICS:
        if metric not in metric_pos:
            raise MissingColumn(metric.lower())
    if bug_pos is None:
        raise MissingColumn(BUG_COLUMN)

    data_rows = rows[1:]
    if not data_rows:
        raise EmptyFile("header only, no data rows")

    instances = []
    width = len(header)
    for i, row in enumerate(data_rows, start=1):
        if len(row) != width:
            raise NonNumericCell(i, "<row>", f"expected {width} cells, got {len(row)}")
        values = []
        for metric in METRICS:
            v = _parse_number(row[metric_pos[metric]], i, metric.lower())
            if v < 0:
                raise NegativeMetricValue(i, metric.lower(), v)
            values.append(v)
        bug = _parse_number(row[bug_pos], i, BUG_COLUMN)
        if bug < 0:
            raise NegativeBugCount(i, bug)
        if bug != int(bug):
            raise NonNumericCell(i, BUG_COLUMN, row[bug_pos])
        class_name = row[name_pos].strip() if name_pos is not None else str(i)
        instances.append(Instance(class_name, tuple(values), int(bug)))

    return Release(project, version, tuple(instances), frozenset({RAW}))


def release_to_csv(release: Release) -> str:
    """Serialize a release back to canonical CSV (repr floats round-trip)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", *(m.lower() for m in METRICS), BUG_COLUMN])
    for inst in release.instances:
        writer.writerow([inst.class_name, *(repr(v) for v in inst.metrics), inst.bug_count])
    return out.getvalue()


# --- preprocessing --------------------------------------------------------


def log_filter(release: Release) -> Release:
    """Replace every metric value v with ln(v + 1); bug counts untouched."""
    if LOG_FILTERED in release.state:
        raise AlreadyFiltered(f"{release.label} is already log-filtered")
    instances = tuple(
        Instance(
            inst.class_name,
            tuple(math.log1p(v) for v in inst.metrics),
            inst.bug_count,
        )
        for inst in release.instances
    )
    return Release(release.project, release.version, instances,
                   release.state | {LOG_FILTERED})


def binarize_labels(release: Release) -> Release:
    """Mark the release as binarized: buggy iff bug_count > 0.

    Bug counts are preserved for reporting; the derived label is exposed as
    ``Instance.buggy``.
    """
    return Release(release.project, release.version, release.instances,
                   release.state | {BINARIZED})


def preprocess(release: Release) -> Release:
    """Standard pipeline order: log-filter, then binarize."""
    if LOG_FILTERED not in release.state:
        release = log_filter(release)
    return binarize_labels(release)


def corpus_summary(corpus: Corpus) -> list[tuple[str, str, int, int, float]]:
    """One (project, version, #instances, #defective, %defective) row per release."""
    rows = []
    for rel in corpus.releases:
        if not rel.binarized:
            raise NotBinarized(f"{rel.label} must be binarized before summarizing")
        defective = rel.n_defective
        pct = round(100.0 * defective / rel.n_instances, 1)
        rows.append((rel.project, rel.version, rel.n_instances, defective, pct))
    return rows


# --- matrices -------------------------------------------------------------


def feature_matrix(release: Release, subset: Sequence[str] | None = None) -> np.ndarray:
    """(n_instances, k) float matrix, columns in the order given by ``subset``."""
    names = tuple(subset) if subset is not None else METRICS
    cols = []
    for name in names:
        if name not in METRIC_INDEX:
            raise UnknownMetric(name)
        cols.append(METRIC_INDEX[name])
    data = np.array([inst.metrics for inst in release.instances], dtype=np.float64)
    return data[:, cols]


def label_vector(release: Release) -> np.ndarray:
    if not release.binarized:
        raise NotBinarized(f"{release.label} has no binary labels yet")
    return np.array([inst.buggy for inst in release.instances], dtype=bool)


def pooled_matrix(
    releases: Sequence[Release], subset: Sequence[str] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate several releases into one labeled training matrix."""
    if not releases:
        raise ValueError("no releases to pool")
    xs = [feature_matrix(r, subset) for r in releases]
    ys = [label_vector(r) for r in releases]
    return np.vstack(xs), np.concatenate(ys)


# --- manifest -------------------------------------------------------------


def load_manifest(path: str | Path) -> list[tuple[str, str, Path]]:
    """Read a corpus manifest: ordered projects, ordered versions, CSV paths.

    Version order is exactly the manifest order; no semantic-version parsing
    is attempted ("init" style versions sort wrongly as strings).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None

    projects = doc.get("projects")
    if not isinstance(projects, list) or not projects:
        raise ManifestError("manifest must contain a non-empty 'projects' list")

    entries: list[tuple[str, str, Path]] = []
    base = path.parent
    for p_i, proj in enumerate(projects):
        name = proj.get("name") if isinstance(proj, dict) else None
        if not name:
            raise ManifestError(f"projects[{p_i}] is missing a 'name'")
        releases = proj.get("releases")
        if not isinstance(releases, list) or not releases:
            raise ManifestError(f"projects[{p_i}] ({name}) has no 'releases' list")
        for r_i, rel in enumerate(releases):
            version = rel.get("version") if isinstance(rel, dict) else None
            rel_path = rel.get("path") if isinstance(rel, dict) else None
            if not version or not rel_path:
                raise ManifestError(
                    f"projects[{p_i}].releases[{r_i}] needs 'version' and 'path'"
                )
            entries.append((name, str(version), base / rel_path))
    return entries


def load_corpus(manifest_path: str | Path, lenient: bool = False) -> Corpus:
    """Load all releases named by the manifest, in manifest order, raw state."""
    releases = []
    for project, version, csv_path in load_manifest(manifest_path):
        try:
            text = Path(csv_path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ManifestError(f"data file not found: {csv_path}") from None
        releases.append(parse_release(text, project, version, lenient=lenient))
    return Corpus(tuple(releases))


def preprocess_corpus(corpus: Corpus) -> Corpus:
    return Corpus(tuple(preprocess(r) for r in corpus.releases))
