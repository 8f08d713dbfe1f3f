"""Human-readable reports and plot data rendered from run artifacts.

Every number in a rendered table comes straight from a result row or a stats
artifact; rendering only formats (3 decimals in markdown, full precision in
the machine files written by the pipeline).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingArtifacts
from .pipeline import MANIFEST_FILE, RESULTS_FILE
from .scenarios import ResultTable
from .stats import boxplot_stats

REPORT_DIR = "report"


@dataclass(frozen=True)
class RenderedReport:
    report_path: Path
    files: tuple[str, ...]
    markdown: str


def _fmt(value, digits: int = 3) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _load_json(result_dir: Path, name: str):
    path = result_dir / name
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _boxplot_rows(table: ResultTable) -> list[list[str]]:
    keys = sorted(
        {(r.scenario, r.classifier, r.metric_set) for r in table.rows if r.error is None}
    )
    rows = []
    for scenario, classifier, metric_set in keys:
        cells = table.select(scenario=scenario, classifier=classifier, metric_set=metric_set)
        for measure in ("precision", "recall", "f_measure"):
            values = [getattr(r, measure) for r in cells if r.error is None]
            if not values:
                continue
            b = boxplot_stats(values)
            rows.append(
                [
                    scenario, classifier, metric_set, measure,
                    repr(b.low), repr(b.q1), repr(b.median), repr(b.q3), repr(b.high),
                    " ".join(repr(v) for v in b.outliers),
                ]
            )
    return rows


def render_report(result_dir: str | Path) -> RenderedReport:
    """Build report/report.md and report/boxplots.csv from a finished run."""
    result_dir = Path(result_dir)
    manifest = _load_json(result_dir, MANIFEST_FILE)
    results_path = result_dir / RESULTS_FILE
    if manifest is None or not results_path.exists():
        raise MissingArtifacts(
            f"{result_dir} does not contain a finished run "
            f"({MANIFEST_FILE} and {RESULTS_FILE} are required)"
        )
    table = ResultTable.from_jsonl(results_path.read_text(encoding="utf-8"))

    sections: list[str] = []
    sections.append("# Defect prediction run report\n")
    sections.append(
        f"- config hash: `{manifest['config_hash']}`\n"
        f"- toolkit version: {manifest['toolkit_version']}\n"
        f"- releases: {manifest['corpus']['releases']}\n"
        f"- result rows: {manifest['row_count']}\n"
    )

    summary_path = result_dir / "corpus_summary.csv"
    if summary_path.exists():
        reader = csv.reader(io.StringIO(summary_path.read_text(encoding="utf-8")))
        rows = list(reader)
        sections.append("## Corpus\n")
        sections.append(_md_table(rows[0], rows[1:]))

    selection = _load_json(result_dir, "selection.json")
    if selection:
        sections.append("## Metric-set selection\n")
        tally = selection["tally"]
        occupied = [(m, c) for m, c in tally.items() if c > 0]
        occupied.sort(key=lambda mc: (-mc[1], mc[0]))
        sections.append(
            _md_table(["metric", "occurrences"], [[m, str(c)] for m, c in occupied])
        )
        sections.append(
            f"\nCoverage peak at k = {selection['chosen_k']} "
            f"over {selection['n_datasets']} filter subsets.\n"
        )
        sections.append(
            _md_table(
                ["k", "coverage", "metrics"],
                [
                    [str(p["k"]), _fmt(p["coverage"]), " ".join(p["metrics"])]
                    for p in selection["curve"]
                ],
            )
        )

    simplification = _load_json(result_dir, "simplification.json")
    if simplification:
        sections.append("## Minimum metric subset\n")
        for scenario, doc in sorted(simplification.items()):
            sections.append(f"### {scenario}\n")
            names = doc["matrix"]["names"]
            matrix_rows = [
                [name] + [_fmt(v) for v in row]
                for name, row in zip(names, doc["matrix"]["values"])
            ]
            sections.append(_md_table(["r"] + names, matrix_rows))
            pairs = ", ".join("+".join(p) for p in doc["strong_pairs"]) or "none"
            sections.append(
                f"\nStrong pairs (r > {doc['phi']}): {pairs}. "
                f"{len(doc['combinations'])} admissible combinations; "
                f"minimum subset: {'+'.join(doc['minimum'])}.\n"
            )
            sections.append(
                _md_table(
                    ["combination", "coverage"],
                    [
                        ["+".join(c["metrics"]), _fmt(c["coverage"])]
                        for c in doc["combinations"][:10]
                    ],
                )
            )

    comparisons = _load_json(result_dir, "comparisons.json")
    if comparisons:
        sections.append("## Method comparisons\n")
        grouped: dict[tuple[str, str, str], list[dict]] = {}
        for entry in comparisons:
            grouped.setdefault(
                (entry["benchmark"], entry["candidate"], entry["scenario"]), []
            ).append(entry)
        for (bench, cand, scenario), entries in grouped.items():
            sections.append(f"### {scenario}: {cand} vs {bench}\n")
            header = [
                "classifier",
                f"median {bench} P", "R", "F",
                f"median {cand}/{bench} P", "R", "F",
                "p (d) P", "R", "F",
            ]
            rows = []
            for entry in entries:
                if "error" in entry:
                    rows.append([entry["classifier"], entry["error"]] + [""] * 8)
                    continue
                cells = {c["measure"]: c for c in entry["cells"]}
                row = [entry["classifier"]]
                for m in ("precision", "recall", "f_measure"):
                    row.append(_fmt(cells[m]["median_a"]))
                for m in ("precision", "recall", "f_measure"):
                    ratio = cells[m]["ratio"]
                    row.append(_fmt(ratio) if ratio is not None else "inf")
                for m in ("precision", "recall", "f_measure"):
                    c = cells[m]
                    p_text = _fmt(c["p"]) if c["p"] is not None else c["p_method"]
                    row.append(f"{p_text} ({_fmt(c['cliffs_d'])})")
                rows.append(row)
            sections.append(_md_table(header, rows))

    thresholds = _load_json(result_dir, "threshold_counts.json")
    if thresholds:
        sections.append("## Threshold counts\n")
        sections.append(
            _md_table(
                ["scenario", "classifier", "metric set", "rows",
                 "#Precision", "#Recall", "#F-measure", "#Total"],
                [
                    [
                        t["scenario"], t["classifier"], t["metric_set"], str(t["rows"]),
                        str(t["precision"]), str(t["recall"]),
                        str(t["f_measure"]), str(t["total"]),
                    ]
                    for t in thresholds
                ],
            )
        )

    anova = _load_json(result_dir, "anova.json")
    if anova:
        sections.append("## Consistency ANOVA across classifiers\n")
        rows = []
        for entry in anova:
            if "error" in entry:
                rows.append([entry["scenario"], entry["metric_set"], entry["error"],
                             "", "", "", ""])
                continue
            rows.append(
                [
                    entry["scenario"], entry["metric_set"],
                    _fmt(entry["ss_between"]), str(entry["df_between"]),
                    _fmt(entry["ms_between"]),
                    _fmt(entry["f"]) if entry["f"] is not None else "inf",
                    _fmt(entry["p"]),
                ]
            )
        sections.append(
            _md_table(
                ["scenario", "metric set", "SS between", "df", "MS between", "F", "p"],
                rows,
            )
        )

    markdown = "\n".join(sections)

    report_dir = result_dir / REPORT_DIR
    report_dir.mkdir(parents=True, exist_ok=True)
    report_path = report_dir / "report.md"
    report_path.write_text(markdown, encoding="utf-8")

    box_rows = _boxplot_rows(table)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["scenario", "classifier", "metric_set", "measure",
         "low", "q1", "median", "q3", "high", "outliers"]
    )
    writer.writerows(box_rows)
    (report_dir / "boxplots.csv").write_text(out.getvalue(), encoding="utf-8")

    return RenderedReport(
        report_path=report_path,
        files=("report.md", "boxplots.csv"),
        markdown=markdown,
    )
