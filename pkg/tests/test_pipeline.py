"""Full pipeline runs: artifacts, determinism, comparisons, and reports."""
import json
from pathlib import Path

import pytest

from leanmetrics.config import config_digest, load_config, parse_config
from leanmetrics.errors import ConfigError, MissingArtifacts
from leanmetrics.pipeline import run_experiment
from leanmetrics.reporting import render_report
from leanmetrics.scenarios import ResultTable
from leanmetrics.stats import MeasureTriple, threshold_counts

from conftest import write_corpus_tree

LAYOUT = {"alpha": ["1.0", "1.1", "1.2"], "beta": ["1.0", "2.0"]}


def base_config(manifest_path: Path) -> dict:
    return {
        "manifest": str(manifest_path),
        "seed": 3,
        "scenarios": [
            {"kind": "wpdp_nearest"},
            {"kind": "cpdp_exhaustive", "max_releases": 2},
        ],
        "classifiers": [{"kind": "naive_bayes"}, {"kind": "decision_table"}],
        "metric_sets": [
            {"name": "ALL", "kind": "all"},
            {"name": "FILTER", "kind": "filter"},
            {"name": "TOP3", "kind": "topk", "k": 3},
            {"name": "MIN", "kind": "min", "phi": 0.6, "k": 3},
        ],
        "comparisons": [["ALL", "TOP3"], ["FILTER", "TOP3"]],
    }


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    manifest = write_corpus_tree(tmp, LAYOUT)
    config = parse_config(base_config(manifest))
    result = run_experiment(config, tmp / "out")
    return config, result, tmp


class TestConfig:
    def test_missing_required_field(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"scenarios": []})
        assert "manifest" in str(err.value)

    def test_invalid_metric_named_in_error(self, tmp_path):
        doc = base_config(tmp_path / "m.json")
        doc["metric_sets"].append(
            {"name": "BAD", "kind": "explicit", "metrics": ["CBO", "NOPE"]}
        )
        with pytest.raises(ConfigError) as err:
            parse_config(doc)
        assert "NOPE" in str(err.value)
        assert "metric_sets[4].metrics[1]" in str(err.value)

    def test_duplicate_set_names_rejected(self, tmp_path):
        doc = base_config(tmp_path / "m.json")
        doc["metric_sets"].append({"name": "ALL", "kind": "all"})
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_unknown_comparison_side(self, tmp_path):
        doc = base_config(tmp_path / "m.json")
        doc["comparisons"] = [["ALL", "MYSTERY"]]
        with pytest.raises(ConfigError) as err:
            parse_config(doc)
        assert "MYSTERY" in str(err.value)

    def test_load_config_resolves_relative_manifest(self, tmp_path):
        manifest = write_corpus_tree(tmp_path, LAYOUT)
        doc = base_config(Path("manifest.json"))
        (tmp_path / "config.json").write_text(json.dumps(doc))
        config = load_config(tmp_path / "config.json")
        assert Path(config.manifest) == manifest.resolve()

    def test_digest_stable_under_key_order(self):
        assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})


class TestRunArtifacts:
    def test_row_count_is_grid_product(self, finished_run):
        config, result, _ = finished_run
        targets = 3  # non-first releases in LAYOUT
        expected = targets * len(config.scenarios) * len(config.classifiers) * len(config.metric_sets)
        assert result.row_count == expected

    def test_all_artifacts_exist(self, finished_run):
        _, result, _ = finished_run
        for name in result.artifacts:
            assert (result.out_dir / name).exists(), name

    def test_results_parse_back(self, finished_run):
        _, result, _ = finished_run
        table = ResultTable.from_jsonl(
            (result.out_dir / "results.jsonl").read_text()
        )
        assert len(table) == result.row_count
        clean = [r for r in table.rows if r.error is None]
        assert clean, "expected at least some successful cells"

    def test_metric_sets_resolved_per_scenario(self, finished_run):
        _, result, _ = finished_run
        doc = json.loads((result.out_dir / "metric_sets.json").read_text())
        assert set(doc) == {"wpdp_nearest", "cpdp_exhaustive"}
        for sets in doc.values():
            assert sets["ALL"] and len(sets["ALL"]) == 20
            assert sets["FILTER"] == "per-task filter"
            assert len(sets["TOP3"]) == 3
            assert 1 <= len(sets["MIN"]) <= 2  # proper subset of TOP3

    def test_simplification_artifact_structure(self, finished_run):
        _, result, _ = finished_run
        doc = json.loads((result.out_dir / "simplification.json").read_text())
        for scenario_doc in doc.values():
            names = scenario_doc["matrix"]["names"]
            values = scenario_doc["matrix"]["values"]
            assert len(values) == len(names)
            for i in range(len(names)):
                assert values[i][i] == 1.0
                for j in range(len(names)):
                    assert values[i][j] == values[j][i]
            combos = scenario_doc["combinations"]
            assert combos == sorted(
                combos, key=lambda c: (-c["coverage"], len(c["metrics"]))
            )
            assert scenario_doc["minimum"] == combos[0]["metrics"]

    def test_threshold_counts_recomputable_from_rows(self, finished_run):
        config, result, _ = finished_run
        table = ResultTable.from_jsonl((result.out_dir / "results.jsonl").read_text())
        recorded = json.loads((result.out_dir / "threshold_counts.json").read_text())
        for entry in recorded:
            rows = [
                MeasureTriple(r.precision, r.recall, r.f_measure)
                for r in table.rows
                if r.error is None
                and r.scenario == entry["scenario"]
                and r.classifier == entry["classifier"]
                and r.metric_set == entry["metric_set"]
            ]
            counts = threshold_counts(rows)
            assert entry["precision"] == counts.precision
            assert entry["recall"] == counts.recall
            assert entry["f_measure"] == counts.f_measure
            assert entry["total"] == counts.total

    def test_comparisons_cover_configured_pairs(self, finished_run):
        config, result, _ = finished_run
        doc = json.loads((result.out_dir / "comparisons.json").read_text())
        pairs = {(e["benchmark"], e["candidate"]) for e in doc}
        assert pairs == {("ALL", "TOP3"), ("FILTER", "TOP3")}
        scored = [e for e in doc if "cells" in e]
        assert scored, "expected at least one comparable group"
        for entry in scored:
            assert {c["measure"] for c in entry["cells"]} == {
                "precision", "recall", "f_measure",
            }

    def test_run_manifest_records_config_hash(self, finished_run):
        config, result, _ = finished_run
        doc = json.loads((result.out_dir / "run_manifest.json").read_text())
        assert doc["config_hash"] == result.config_hash
        assert doc["row_count"] == result.row_count
        assert doc["seed"] == config.seed


class TestDeterminism:
    def test_two_runs_byte_identical_outside_manifest(self, finished_run):
        config, result, tmp = finished_run
        second = run_experiment(config, tmp / "out_again")
        for name in result.artifacts:
            first_bytes = (result.out_dir / name).read_bytes()
            second_bytes = (second.out_dir / name).read_bytes()
            if name == "run_manifest.json":
                a = json.loads(first_bytes)
                b = json.loads(second_bytes)
                a.pop("created")
                b.pop("created")
                assert a == b
            else:
                assert first_bytes == second_bytes, name


class TestReporting:
    def test_report_renders_tables(self, finished_run):
        _, result, _ = finished_run
        rendered = render_report(result.out_dir)
        assert rendered.report_path.exists()
        assert "## Corpus" in rendered.markdown
        assert "## Metric-set selection" in rendered.markdown
        assert "## Method comparisons" in rendered.markdown
        assert "## Threshold counts" in rendered.markdown
        boxplots = (result.out_dir / "report" / "boxplots.csv").read_text()
        assert boxplots.splitlines()[0].startswith("scenario,classifier")
        assert len(boxplots.splitlines()) > 1

    def test_report_is_deterministic(self, finished_run):
        _, result, _ = finished_run
        first = render_report(result.out_dir).markdown
        second = render_report(result.out_dir).markdown
        assert first == second

    def test_missing_artifacts(self, tmp_path):
        with pytest.raises(MissingArtifacts):
            render_report(tmp_path)

    def test_self_comparison_ratio_is_one(self, tmp_path):
        manifest = write_corpus_tree(tmp_path, {"p": ["1.0", "1.1", "1.2"]})
        doc = {
            "manifest": str(manifest),
            "scenarios": [{"kind": "wpdp_nearest"}],
            "classifiers": [{"kind": "naive_bayes"}],
            "metric_sets": [
                {"name": "A", "kind": "explicit", "metrics": ["CBO", "LOC"]},
                {"name": "B", "kind": "explicit", "metrics": ["CBO", "LOC"]},
            ],
            "comparisons": [["A", "B"]],
        }
        result = run_experiment(parse_config(doc), tmp_path / "out")
        comparisons = json.loads((result.out_dir / "comparisons.json").read_text())
        for entry in comparisons:
            if "cells" not in entry:
                continue
            for cell in entry["cells"]:
                assert cell["ratio"] == 1.0
                assert cell["p_method"] == "no_difference"
                assert cell["cliffs_d"] == 0.0
        rendered = render_report(result.out_dir)
        assert "1.000" in rendered.markdown
