"""Run configuration: parsing and validation of the JSON experiment config."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .corpus import METRIC_INDEX
from .errors import ConfigError
from .learners import ClassifierSpec
from .scenarios import OBJECTIVES, SCENARIO_KINDS, ScenarioSpec

METRIC_SET_KINDS = ("all", "filter", "topk", "min", "explicit")


@dataclass(frozen=True)
class MetricSetDef:
    name: str
    kind: str  # one of METRIC_SET_KINDS
    k: int | None = None          # topk/min: None means pick by coverage peak
    phi: float = 0.6              # min: strong-correlation threshold
    signed: bool = True           # min: compare signed r (False: |r|)
    metrics: tuple[str, ...] = ()  # explicit only


@dataclass(frozen=True)
class Thresholds:
    precision: float = 0.5
    recall: float = 0.7
    f_measure: float = 0.583
    wilcoxon_p: float = 0.01
    anova_p: float = 0.05
    ratio: float = 0.9


@dataclass(frozen=True)
class RunConfig:
    manifest: str
    scenarios: tuple[ScenarioSpec, ...]
    classifiers: tuple[ClassifierSpec, ...]
    metric_sets: tuple[MetricSetDef, ...]
    comparisons: tuple[tuple[str, str], ...] = ()
    thresholds: Thresholds = field(default_factory=Thresholds)
    coverage_k_range: tuple[int, int] = (1, 10)
    bins: int = 10
    seed: int = 0
    workers: int = 1
    lenient: bool = False

    def metric_set(self, name: str) -> MetricSetDef:
        for d in self.metric_sets:
            if d.name == name:
                return d
        raise KeyError(name)


def _expect(doc: Mapping[str, Any], key: str, types, where: str, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{where}{key}", "is required")
        return default
    value = doc[key]
    if not isinstance(value, types):
        raise ConfigError(f"{where}{key}", f"expected {types}, got {type(value).__name__}")
    return value


def _parse_scenario(doc: Mapping[str, Any], where: str) -> ScenarioSpec:
    kind = _expect(doc, "kind", str, where)
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"{where}kind", f"must be one of {SCENARIO_KINDS}, got {kind!r}")
    max_releases = _expect(doc, "max_releases", int, where, default=3)
    objective = _expect(doc, "objective", str, where, default="f_measure")
    if objective not in OBJECTIVES:
        raise ConfigError(f"{where}objective", f"must be one of {OBJECTIVES}")
    name = _expect(doc, "name", str, where, default=None)
    try:
        return ScenarioSpec(kind, cpdp_max_releases=max_releases,
                            cpdp_objective=objective, name=name)
    except ValueError as exc:
        raise ConfigError(where.rstrip("."), str(exc)) from None


def _parse_classifier(doc: Mapping[str, Any], where: str, seed: int) -> ClassifierSpec:
    kind = _expect(doc, "kind", str, where)
    params = _expect(doc, "params", dict, where, default={})
    spec_seed = _expect(doc, "seed", int, where, default=seed)
    try:
        return ClassifierSpec(kind, seed=spec_seed, params=params)
    except ValueError as exc:
        raise ConfigError(where.rstrip("."), str(exc)) from None


def _parse_metric_set(doc: Mapping[str, Any], where: str) -> MetricSetDef:
    name = _expect(doc, "name", str, where)
    kind = _expect(doc, "kind", str, where)
    if kind not in METRIC_SET_KINDS:
        raise ConfigError(f"{where}kind", f"must be one of {METRIC_SET_KINDS}, got {kind!r}")
    k = _expect(doc, "k", int, where, default=None)
    if k is not None and not 1 <= k <= len(METRIC_INDEX):
        raise ConfigError(f"{where}k", f"must be in [1, {len(METRIC_INDEX)}]")
    phi = float(_expect(doc, "phi", (int, float), where, default=0.6))
    if not 0.0 < phi < 1.0:
        raise ConfigError(f"{where}phi", "must lie in (0, 1)")
    signed = _expect(doc, "signed", bool, where, default=True)
    metrics_raw = _expect(doc, "metrics", list, where, default=[])
    metrics = []
    for i, m in enumerate(metrics_raw):
        if not isinstance(m, str) or m.upper() not in METRIC_INDEX:
            raise ConfigError(f"{where}metrics[{i}]", f"unknown metric {m!r}")
        metrics.append(m.upper())
    if kind == "explicit" and not metrics:
        raise ConfigError(f"{where}metrics", "explicit metric sets need a 'metrics' list")
    return MetricSetDef(name=name, kind=kind, k=k, phi=phi, signed=signed,
                        metrics=tuple(metrics))


def parse_config(doc: Mapping[str, Any], base_dir: str | Path | None = None) -> RunConfig:
    """Validate a config document; paths resolve against ``base_dir``."""
    if not isinstance(doc, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    manifest = _expect(doc, "manifest", str, "")
    if base_dir is not None:
        manifest = str((Path(base_dir) / manifest).resolve())

    seed = _expect(doc, "seed", int, "", default=0)
    workers = _expect(doc, "workers", int, "", default=1)
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    bins = _expect(doc, "bins", int, "", default=10)
    if bins < 2:
        raise ConfigError("bins", "must be >= 2")
    lenient = _expect(doc, "lenient", bool, "", default=False)

    raw_scenarios = _expect(doc, "scenarios", list, "")
    if not raw_scenarios:
        raise ConfigError("scenarios", "needs at least one scenario")
    scenarios = tuple(
        _parse_scenario(s, f"scenarios[{i}].") for i, s in enumerate(raw_scenarios)
    )
    labels = [s.label for s in scenarios]
    if len(set(labels)) != len(labels):
        raise ConfigError("scenarios", "scenario labels must be unique")

    raw_classifiers = _expect(doc, "classifiers", list, "")
    if not raw_classifiers:
        raise ConfigError("classifiers", "needs at least one classifier")
    classifiers = tuple(
        _parse_classifier(c, f"classifiers[{i}].", seed)
        for i, c in enumerate(raw_classifiers)
    )
    kinds = [c.kind for c in classifiers]
    if len(set(kinds)) != len(kinds):
        raise ConfigError("classifiers", "classifier kinds must be unique per run")

    raw_sets = _expect(doc, "metric_sets", list, "")
    if not raw_sets:
        raise ConfigError("metric_sets", "needs at least one metric set")
    metric_sets = tuple(
        _parse_metric_set(s, f"metric_sets[{i}].") for i, s in enumerate(raw_sets)
    )
    names = [m.name for m in metric_sets]
    if len(set(names)) != len(names):
        raise ConfigError("metric_sets", "metric set names must be unique")

    raw_comparisons = _expect(doc, "comparisons", list, "", default=[])
    comparisons = []
    for i, pair in enumerate(raw_comparisons):
        if (not isinstance(pair, list)) or len(pair) != 2:
            raise ConfigError(f"comparisons[{i}]", "must be a [benchmark, candidate] pair")
        for side in pair:
            if side not in names:
                raise ConfigError(f"comparisons[{i}]", f"unknown metric set {side!r}")
        comparisons.append((pair[0], pair[1]))

    raw_thresholds = _expect(doc, "thresholds", dict, "", default={})
    defaults = Thresholds()
    values = {}
    for key in ("precision", "recall", "f_measure", "wilcoxon_p", "anova_p", "ratio"):
        values[key] = float(
            _expect(raw_thresholds, key, (int, float), "thresholds.",
                    default=getattr(defaults, key))
        )
    thresholds = Thresholds(**values)

    raw_range = _expect(doc, "coverage_k_range", list, "", default=[1, 10])
    if len(raw_range) != 2 or not all(isinstance(v, int) for v in raw_range):
        raise ConfigError("coverage_k_range", "must be a [lo, hi] pair of integers")
    lo, hi = raw_range
    if not 1 <= lo <= hi <= len(METRIC_INDEX):
        raise ConfigError("coverage_k_range", f"must satisfy 1 <= lo <= hi <= {len(METRIC_INDEX)}")

    return RunConfig(
        manifest=manifest,
        scenarios=scenarios,
        classifiers=classifiers,
        metric_sets=metric_sets,
        comparisons=tuple(comparisons),
        thresholds=thresholds,
        coverage_k_range=(lo, hi),
        bins=bins,
        seed=seed,
        workers=workers,
        lenient=lenient,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return parse_config(doc, base_dir=path.parent)


def config_digest(doc: Mapping[str, Any]) -> str:
    """Stable hash of a config document for reproducibility manifests."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_to_dict(config: RunConfig) -> dict:
    """Normalized echo of a parsed config (what actually ran)."""
    return {
        "manifest": config.manifest,
        "seed": config.seed,
        "workers": config.workers,
        "bins": config.bins,
        "lenient": config.lenient,
        "coverage_k_range": list(config.coverage_k_range),
        "scenarios": [
            {
                "kind": s.kind,
                "name": s.label,
                "max_releases": s.cpdp_max_releases,
                "objective": s.cpdp_objective,
            }
            for s in config.scenarios
        ],
        "classifiers": [
            {"kind": c.kind, "seed": c.seed, "params": dict(sorted(c.params.items()))}
            for c in config.classifiers
        ],
        "metric_sets": [
            {
                "name": m.name,
                "kind": m.kind,
                "k": m.k,
                "phi": m.phi,
                "signed": m.signed,
                "metrics": list(m.metrics),
            }
            for m in config.metric_sets
        ],
        "comparisons": [list(p) for p in config.comparisons],
        "thresholds": {
            "precision": config.thresholds.precision,
            "recall": config.thresholds.recall,
            "f_measure": config.thresholds.f_measure,
            "wilcoxon_p": config.thresholds.wilcoxon_p,
            "anova_p": config.thresholds.anova_p,
            "ratio": config.thresholds.ratio,
        },
    }
