"""End-to-end experiment pipeline: ingest, select, simplify, run, compare.

Artifacts are written with deterministic serialization (sorted keys, repr
floats); the only timestamp lives in run_manifest.json so that two runs with
the same config and corpus are byte-identical everywhere else.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import RunConfig, config_digest, config_to_dict
from .corpus import (
    METRICS,
    Corpus,
    corpus_summary,
    feature_matrix,
    label_vector,
    load_corpus,
    preprocess_corpus,
)
from .errors import MatchingFailure, SingleClassData
from .features import greedy_stepwise_cfs
from .scenarios import ResultTable, run_grid
from .simplify import (
    choose_k,
    correlation_matrix,
    enumerate_admissible,
    minimum_subset,
    strong_pairs,
    tally_occurrences,
    top_k,
)
from .stats import (
    MeasureTriple,
    anova_oneway,
    compare_methods,
    threshold_counts,
)

RESULTS_FILE = "results.jsonl"
MANIFEST_FILE = "run_manifest.json"


@dataclass(frozen=True)
class RunResult:
    out_dir: Path
    row_count: int
    artifacts: tuple[str, ...]
    config_hash: str


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv_text(header: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def select_filter_subsets(corpus: Corpus, bins: int):
    """Greedy filter selection per release, on the release's own data.

    Releases whose labels are single-class cannot drive the search; they are
    reported and excluded from the tally.
    """
    subsets: list[dict] = []
    usable: list[tuple[str, ...]] = []
    for rel in corpus.releases:
        entry = {"project": rel.project, "version": rel.version}
        try:
            chosen = greedy_stepwise_cfs(feature_matrix(rel), label_vector(rel), bins=bins)
            entry["metrics"] = list(chosen)
            usable.append(chosen)
        except SingleClassData as exc:
            entry["error"] = str(exc)
        subsets.append(entry)
    return subsets, usable


def resolve_metric_sets(config: RunConfig, corpus: Corpus, filter_subsets):
    """Turn metric-set definitions into per-scenario explicit subsets.

    The minimum set depends on the scenario (its correlation matrix is a
    median over that scenario's training pools), so resolution happens per
    scenario. Returns (per-scenario mapping, selection artifacts).
    """
    tally = tally_occurrences(filter_subsets)
    k_star, curve = choose_k(filter_subsets, config.coverage_k_range)

    selection = {
        "tally": tally.as_dict(),
        "n_datasets": tally.n_datasets,
        "chosen_k": k_star,
        "curve": [
            {"k": p.k, "coverage": p.coverage, "metrics": list(p.subset)}
            for p in curve
        ],
    }

    # a min set without its own k minimizes the Top-k subset the run uses;
    # the coverage peak is the fallback when no topk set is configured
    topk_defs = [d for d in config.metric_sets if d.kind == "topk"]
    default_min_k = (topk_defs[0].k or k_star) if topk_defs else k_star

    per_scenario: dict[str, dict[str, tuple[str, ...] | None]] = {}
    simplification: dict[str, dict] = {}
    for scenario in config.scenarios:
        resolved: dict[str, tuple[str, ...] | None] = {}
        for definition in config.metric_sets:
            if definition.kind == "all":
                resolved[definition.name] = METRICS
            elif definition.kind == "filter":
                resolved[definition.name] = None
            elif definition.kind == "explicit":
                resolved[definition.name] = definition.metrics
            elif definition.kind == "topk":
                resolved[definition.name] = top_k(tally, definition.k or k_star)
            else:  # min
                base = top_k(tally, max(2, definition.k or default_min_k))
                matrix = correlation_matrix(corpus, base, scenario)
                pairs = strong_pairs(matrix, phi=definition.phi, signed=definition.signed)
                admissible = enumerate_admissible(base, pairs)
                ranked = minimum_subset(admissible, filter_subsets)
                resolved[definition.name] = ranked[0][0]
                simplification[scenario.label] = {
                    "set_name": definition.name,
                    "base_subset": list(base),
                    "phi": definition.phi,
                    "signed": definition.signed,
                    "matrix": {
                        "names": list(matrix.names),
                        "values": [list(row) for row in matrix.values],
                    },
                    "skipped_targets": [list(k) for k in matrix.skipped_targets],
                    "strong_pairs": [list(p) for p in pairs],
                    "combinations": [
                        {"metrics": list(combo), "coverage": cov}
                        for combo, cov in ranked
                    ],
                    "minimum": list(ranked[0][0]),
                }
        per_scenario[scenario.label] = resolved
    return per_scenario, selection, simplification


def _comparison_cells(report) -> list[dict]:
    return [
        {
            "measure": c.measure,
            "median_a": c.median_a,
            "median_b": c.median_b,
            "ratio": c.ratio if c.ratio != float("inf") else None,
            "ratio_degenerate": c.ratio_degenerate,
            "p": c.p,
            "p_method": c.p_method,
            "cliffs_d": c.cliffs_d,
            "n": c.n,
            "acceptable": c.acceptable,
        }
        for c in report.cells
    ]


def build_comparisons(config: RunConfig, table: ResultTable) -> list[dict]:
    """Per (comparison pair, scenario, classifier): medians, ratio, p, d."""
    out: list[dict] = []
    for name_a, name_b in config.comparisons:
        for scenario in config.scenarios:
            for classifier in config.classifiers:
                def rows_for(set_name):
                    rows = {}
                    for row in table.select(
                        scenario=scenario.label,
                        classifier=classifier.kind,
                        metric_set=set_name,
                    ):
                        if row.error is None:
                            rows[(row.target_project, row.target_version)] = MeasureTriple(
                                row.precision, row.recall, row.f_measure
                            )
                    return rows

                entry = {
                    "benchmark": name_a,
                    "candidate": name_b,
                    "scenario": scenario.label,
                    "classifier": classifier.kind,
                }
                rows_a = rows_for(name_a)
                rows_b = rows_for(name_b)
                common = sorted(set(rows_a) & set(rows_b))
                dropped = sorted(set(rows_a) ^ set(rows_b))
                if len(common) < 2:
                    entry["error"] = "not enough matched rows to compare"
                    out.append(entry)
                    continue
                try:
                    report = compare_methods(
                        {k: rows_a[k] for k in common},
                        {k: rows_b[k] for k in common},
                        label_a=name_a,
                        label_b=name_b,
                        ratio_threshold=config.thresholds.ratio,
                        p_threshold=config.thresholds.wilcoxon_p,
                    )
                except MatchingFailure as exc:
                    entry["error"] = str(exc)
                    out.append(entry)
                    continue
                entry["cells"] = _comparison_cells(report)
                entry["dropped_targets"] = [list(k) for k in dropped]
                out.append(entry)
    return out


def build_threshold_counts(config: RunConfig, table: ResultTable) -> list[dict]:
    out = []
    t = config.thresholds
    for scenario in config.scenarios:
        for classifier in config.classifiers:
            for definition in config.metric_sets:
                rows = [
                    r.triple
                    for r in table.select(
                        scenario=scenario.label,
                        classifier=classifier.kind,
                        metric_set=definition.name,
                    )
                    if r.error is None
                ]
                counts = threshold_counts(
                    rows,
                    precision_threshold=t.precision,
                    recall_threshold=t.recall,
                    f_threshold=t.f_measure,
                )
                out.append(
                    {
                        "scenario": scenario.label,
                        "classifier": classifier.kind,
                        "metric_set": definition.name,
                        "rows": len(rows),
                        "precision": counts.precision,
                        "recall": counts.recall,
                        "f_measure": counts.f_measure,
                        "total": counts.total,
                    }
                )
    return out


def build_anova(config: RunConfig, table: ResultTable) -> list[dict]:
    """One-way ANOVA of per-target Consistency across classifiers."""
    out = []
    for scenario in config.scenarios:
        for definition in config.metric_sets:
            groups = []
            for classifier in config.classifiers:
                values = [
                    r.consistency
                    for r in table.select(
                        scenario=scenario.label,
                        classifier=classifier.kind,
                        metric_set=definition.name,
                    )
                    if r.error is None and r.consistency is not None
                ]
                if len(values) >= 2:
                    groups.append(values)
            entry = {"scenario": scenario.label, "metric_set": definition.name}
            if len(groups) < 2:
                entry["error"] = "not enough groups with Consistency values"
            else:
                result = anova_oneway(groups)
                entry.update(
                    {
                        "f": None if result.f == float("inf") else result.f,
                        "p": result.p,
                        "df_between": result.df_between,
                        "df_within": result.df_within,
                        "ss_between": result.ss_between,
                        "ss_within": result.ss_within,
                        "ms_between": result.ms_between,
                        "ms_within": result.ms_within,
                        "zero_within": result.zero_within,
                        "significant": result.p < config.thresholds.anova_p,
                    }
                )
            out.append(entry)
    return out


def run_experiment(config: RunConfig, out_dir: str | Path) -> RunResult:
    """Execute the full pipeline and write all artifacts to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []

    corpus = preprocess_corpus(load_corpus(config.manifest, lenient=config.lenient))

    summary_rows = corpus_summary(corpus)
    _write_text(
        out / "corpus_summary.csv",
        _csv_text(
            ["project", "version", "instances", "defective", "pct_defective"],
            [list(r) for r in summary_rows],
        ),
    )
    artifacts.append("corpus_summary.csv")

    subsets_doc, filter_subsets = select_filter_subsets(corpus, config.bins)
    _write_text(out / "filter_subsets.json", _dump_json(subsets_doc))
    artifacts.append("filter_subsets.json")
    if not filter_subsets:
        raise SingleClassData("no release produced a usable filter subset")

    per_scenario_sets, selection, simplification = resolve_metric_sets(
        config, corpus, filter_subsets
    )
    _write_text(out / "selection.json", _dump_json(selection))
    artifacts.append("selection.json")
    _write_text(
        out / "coverage_curve.csv",
        _csv_text(
            ["k", "coverage", "metrics"],
            [[p["k"], repr(p["coverage"]), " ".join(p["metrics"])] for p in selection["curve"]],
        ),
    )
    artifacts.append("coverage_curve.csv")
    if simplification:
        _write_text(out / "simplification.json", _dump_json(simplification))
        artifacts.append("simplification.json")
    _write_text(
        out / "metric_sets.json",
        _dump_json(
            {
                scenario: {
                    name: (list(subset) if subset is not None else "per-task filter")
                    for name, subset in sets.items()
                }
                for scenario, sets in per_scenario_sets.items()
            }
        ),
    )
    artifacts.append("metric_sets.json")

    all_rows = []
    for scenario in config.scenarios:
        table = run_grid(
            corpus,
            [scenario],
            config.classifiers,
            per_scenario_sets[scenario.label],
            workers=config.workers,
            bins=config.bins,
        )
        all_rows.extend(table.rows)
    table = ResultTable(tuple(all_rows))

    _write_text(out / RESULTS_FILE, table.to_jsonl())
    artifacts.append(RESULTS_FILE)
    _write_text(
        out / "results.csv",
        _csv_text(
            [
                "target_project", "target_version", "scenario", "classifier",
                "metric_set", "tp", "fp", "tn", "fn", "precision", "recall",
                "f_measure", "consistency", "subset", "training", "error",
            ],
            [
                [
                    r.target_project, r.target_version, r.scenario, r.classifier,
                    r.metric_set,
                    r.outcome.tp if r.outcome else "",
                    r.outcome.fp if r.outcome else "",
                    r.outcome.tn if r.outcome else "",
                    r.outcome.fn if r.outcome else "",
                    repr(r.precision) if r.precision is not None else "",
                    repr(r.recall) if r.recall is not None else "",
                    repr(r.f_measure) if r.f_measure is not None else "",
                    repr(r.consistency) if r.consistency is not None else "",
                    " ".join(r.subset),
                    " ".join("-".join(k) for k in r.training),
                    r.error or "",
                ]
                for r in table.rows
            ],
        ),
    )
    artifacts.append("results.csv")

    _write_text(out / "comparisons.json", _dump_json(build_comparisons(config, table)))
    artifacts.append("comparisons.json")
    _write_text(out / "threshold_counts.json", _dump_json(build_threshold_counts(config, table)))
    artifacts.append("threshold_counts.json")
    _write_text(out / "anova.json", _dump_json(build_anova(config, table)))
    artifacts.append("anova.json")

    config_doc = config_to_dict(config)
    digest = config_digest(config_doc)
    manifest = {
        "toolkit_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "config_hash": digest,
        "seed": config.seed,
        "config": config_doc,
        "corpus": {
            "manifest": config.manifest,
            "releases": len(corpus),
            "projects": list(corpus.projects()),
        },
        "notes": {
            "preprocessing": "log filter ln(v+1) applied before all downstream statistics",
            "wilcoxon": "exact null distribution for n <= 20, normal approximation beyond",
            "cpdp_selection": "objective ranking uses target measures; the selection leak is inherent to exhaustive search",
            "filter_selection": (
                "correlation-based subset evaluation re-implemented with "
                f"equal-frequency discretization ({config.bins} bins) and "
                "symmetrical uncertainty; subsets may differ from "
                "MDL-discretized implementations"
            ),
            "coverage_population": "coverage averages over every release with a usable filter subset",
        },
        "artifacts": sorted(artifacts),
        "row_count": len(table),
    }
    _write_text(out / MANIFEST_FILE, _dump_json(manifest))
    artifacts.append(MANIFEST_FILE)

    return RunResult(
        out_dir=out,
        row_count=len(table),
        artifacts=tuple(sorted(artifacts)),
        config_hash=digest,
    )
