"""Training/test task construction and the full experimental grid.

Three training-data scenarios: nearest prior release, all prior releases,
and exhaustive cross-project search over unions of up to N foreign
releases. Grid cells are independent work units; results assemble by key,
so worker count never changes the output.
"""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .corpus import Corpus, Release, canonical_subset, feature_matrix, label_vector, pooled_matrix
from .errors import DegenerateTestSet, NoTrainingData, SingleClassData, TooFewSamples
from .features import greedy_stepwise_cfs
from .learners import ClassifierSpec, Model, evaluate_on, outcome_from_scores, train_matrix
from .stats import MeasureTriple, Outcome, consistency as consistency_index, measures

WPDP_NEAREST = "wpdp_nearest"
WPDP_ALL_HISTORY = "wpdp_all_history"
CPDP_EXHAUSTIVE = "cpdp_exhaustive"
SCENARIO_KINDS = (WPDP_NEAREST, WPDP_ALL_HISTORY, CPDP_EXHAUSTIVE)

OBJECTIVES = ("precision", "recall", "f_measure")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    cpdp_max_releases: int = 3
    cpdp_objective: str = "f_measure"
    name: str | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {SCENARIO_KINDS}")
        if self.cpdp_max_releases < 1:
            raise ValueError("cpdp_max_releases must be >= 1")
        if self.cpdp_objective not in OBJECTIVES:
            raise ValueError(f"cpdp_objective must be one of {OBJECTIVES}")

    @property
    def label(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class PredictionTask:
    """One target release plus the releases allowed to train its model.

    Cross-project tasks leave ``training`` empty; the exhaustive search
    resolves it per cell.
    """

    target: Release
    training: tuple[Release, ...]
    scenario_kind: str

    def __post_init__(self):
        for rel in self.training:
            if rel.key == self.target.key:
                raise ValueError(f"task for {self.target.label} trains on itself")
            if self.scenario_kind in (WPDP_NEAREST, WPDP_ALL_HISTORY):
                if rel.project != self.target.project:
                    raise ValueError("within-project training must share the project")
            elif rel.project == self.target.project:
                raise ValueError("cross-project training must not share the project")


def build_tasks(corpus: Corpus, spec: ScenarioSpec) -> list[PredictionTask]:
    """Targets are every non-first release of each project, in manifest order."""
    tasks = []
    for project in corpus.projects():
        releases = corpus.releases_of(project)
        for i, target in enumerate(releases):
            if i == 0:
                continue  # first releases only ever serve as training data
            if spec.kind == WPDP_NEAREST:
                training: tuple[Release, ...] = (releases[i - 1],)
            elif spec.kind == WPDP_ALL_HISTORY:
                training = tuple(releases[:i])
            else:
                training = ()
            tasks.append(PredictionTask(target, training, spec.kind))
    return tasks


# --- exhaustive cross-project selection -----------------------------------------


def enumerate_cpdp_combinations(
    candidates: Sequence[Release], max_releases: int
) -> list[tuple[Release, ...]]:
    """All non-empty unions of 1..max_releases candidate releases, smaller
    unions first, candidates in corpus order within each size."""
    combos = []
    for size in range(1, min(max_releases, len(candidates)) + 1):
        combos.extend(itertools.combinations(candidates, size))
    return combos


@dataclass(frozen=True)
class CpdpSelection:
    combination: tuple[tuple[str, str], ...]
    outcome: Outcome
    objective_value: float
    subset: tuple[str, ...]
    n_candidates: int
    n_skipped: int


def exhaustive_cpdp(
    corpus: Corpus,
    target: Release,
    spec: ScenarioSpec,
    classifier: ClassifierSpec,
    subset: Sequence[str] | None,
    bins: int = 10,
) -> CpdpSelection:
    """Train on every admissible foreign-release union and keep the best.

    ``subset=None`` re-runs the greedy filter selection on each candidate
    union. The best combination maximizes the scenario objective on the
    target; ties keep the earlier (smaller, earlier-enumerated) combination.
    Single-class unions are skipped and counted.
    """
    candidates = corpus.foreign_releases(target.project)
    if not candidates:
        raise NoTrainingData(f"no foreign releases available for {target.label}")
    combos = enumerate_cpdp_combinations(candidates, spec.cpdp_max_releases)
    best: CpdpSelection | None = None
    skipped = 0
    filter_cache: dict = {}
    for combo in combos:
        try:
            model, used = _fit_combo(classifier, combo, subset, bins, filter_cache)
        except (SingleClassData, TooFewSamples):
            skipped += 1
            continue
        outcome = evaluate_on(model, target)
        value = measures(outcome).get(spec.cpdp_objective)
        if best is None or value > best.objective_value:
            best = CpdpSelection(
                combination=tuple(r.key for r in combo),
                outcome=outcome,
                objective_value=value,
                subset=used,
                n_candidates=len(combos),
                n_skipped=0,
            )
    if best is None:
        raise SingleClassData(
            f"every candidate combination for {target.label} was single-class"
        )
    return replace(best, n_skipped=skipped)


def _fit_combo(
    classifier: ClassifierSpec,
    combo: Sequence[Release],
    subset: Sequence[str] | None,
    bins: int,
    cache: dict,
) -> tuple[Model, tuple[str, ...]]:
    if subset is None:
        used = _filter_subset_for(combo, bins, cache)
    else:
        used = tuple(subset)
    X, y = pooled_matrix(combo, used)
    return train_matrix(classifier, X, y, used), used


def _filter_subset_for(
    releases: Sequence[Release], bins: int, cache: dict
) -> tuple[str, ...]:
    """Greedy filter subset of a pooled training set, memoized per run.

    The cache is scoped to one grid plan (one corpus), never shared across
    corpora, so identical release keys from different data can not collide.
    """
    key = tuple(sorted(r.key for r in releases))
    cached = cache.get(key)
    if cached is not None:
        return cached
    X, y = pooled_matrix(releases)
    subset = greedy_stepwise_cfs(X, y, bins=bins)
    cache[key] = subset
    return subset


# --- the grid ---------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    target_project: str
    target_version: str
    scenario: str
    classifier: str
    metric_set: str
    subset: tuple[str, ...] = ()
    outcome: Outcome | None = None
    precision: float | None = None
    recall: float | None = None
    f_measure: float | None = None
    consistency: float | None = None
    consistency_degenerate: bool = False
    cpdp_combination: tuple[tuple[str, str], ...] | None = None
    cpdp_objective: str | None = None
    cpdp_objective_value: float | None = None
    cpdp_skipped: int = 0
    training: tuple[tuple[str, str], ...] = ()
    error: str | None = None

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (
            self.target_project,
            self.target_version,
            self.scenario,
            self.classifier,
            self.metric_set,
        )

    @property
    def triple(self) -> MeasureTriple | None:
        if self.outcome is None:
            return None
        return MeasureTriple(self.precision, self.recall, self.f_measure)

    def to_dict(self) -> dict:
        out = {
            "target_project": self.target_project,
            "target_version": self.target_version,
            "scenario": self.scenario,
            "classifier": self.classifier,
            "metric_set": self.metric_set,
            "subset": list(self.subset),
            "outcome": None,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "consistency": self.consistency,
            "consistency_degenerate": self.consistency_degenerate,
            "cpdp_combination": None,
            "cpdp_objective": self.cpdp_objective,
            "cpdp_objective_value": self.cpdp_objective_value,
            "cpdp_skipped": self.cpdp_skipped,
            "training": [list(k) for k in self.training],
            "error": self.error,
        }
        if self.outcome is not None:
            out["outcome"] = {
                "tp": self.outcome.tp,
                "fp": self.outcome.fp,
                "tn": self.outcome.tn,
                "fn": self.outcome.fn,
            }
        if self.cpdp_combination is not None:
            out["cpdp_combination"] = [list(k) for k in self.cpdp_combination]
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ResultRow":
        outcome = None
        if doc.get("outcome"):
            o = doc["outcome"]
            outcome = Outcome(tp=o["tp"], fp=o["fp"], tn=o["tn"], fn=o["fn"])
        combo = doc.get("cpdp_combination")
        return cls(
            target_project=doc["target_project"],
            target_version=doc["target_version"],
            scenario=doc["scenario"],
            classifier=doc["classifier"],
            metric_set=doc["metric_set"],
            subset=tuple(doc.get("subset", ())),
            outcome=outcome,
            precision=doc.get("precision"),
            recall=doc.get("recall"),
            f_measure=doc.get("f_measure"),
            consistency=doc.get("consistency"),
            consistency_degenerate=doc.get("consistency_degenerate", False),
            cpdp_combination=tuple(tuple(k) for k in combo) if combo else None,
            cpdp_objective=doc.get("cpdp_objective"),
            cpdp_objective_value=doc.get("cpdp_objective_value"),
            cpdp_skipped=doc.get("cpdp_skipped", 0),
            training=tuple(tuple(k) for k in doc.get("training", ())),
            error=doc.get("error"),
        )


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[ResultRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def select(self, **conditions) -> list[ResultRow]:
        out = []
        for row in self.rows:
            if all(getattr(row, k) == v for k, v in conditions.items()):
                out.append(row)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.rows)

    @classmethod
    def from_jsonl(cls, text: str) -> "ResultTable":
        rows = [ResultRow.from_dict(json.loads(line)) for line in text.splitlines() if line]
        return cls(tuple(rows))


@dataclass(frozen=True)
class GridPlan:
    """Everything one worker needs to produce the rows of a single cell group."""

    corpus: Corpus
    scenario: ScenarioSpec
    classifiers: tuple[ClassifierSpec, ...]
    metric_sets: tuple[tuple[str, tuple[str, ...] | None], ...]
    bins: int = 10
    filter_cache: dict = field(default_factory=dict, compare=False, repr=False)


def _measure_fields(outcome: Outcome) -> dict:
    triple = measures(outcome)
    try:
        cons = consistency_index(outcome)
        degenerate = False
    except DegenerateTestSet:
        cons = None
        degenerate = True
    return {
        "outcome": outcome,
        "precision": triple.precision,
        "recall": triple.recall,
        "f_measure": triple.f_measure,
        "consistency": cons,
        "consistency_degenerate": degenerate,
    }


def _cpdp_set_rows(plan: GridPlan, task: PredictionTask, set_name: str,
                   set_subset, base: dict) -> list[ResultRow]:
    """All classifier rows of one CPDP cell group, sharing per-combination work.

    Equivalent to calling exhaustive_cpdp per classifier (same enumeration
    order and tie-breaks), but each candidate union's training matrix is
    built once and every classifier trains on it.
    """
    scenario = plan.scenario
    target = task.target
    candidates = plan.corpus.foreign_releases(target.project)
    if not candidates:
        raise NoTrainingData(f"no foreign releases available for {target.label}")
    combos = enumerate_cpdp_combinations(candidates, scenario.cpdp_max_releases)

    y_target = label_vector(target)
    target_cache: dict[tuple[str, ...], object] = {}

    def target_matrix(subset):
        if subset not in target_cache:
            target_cache[subset] = feature_matrix(target, subset)
        return target_cache[subset]

    best: dict[str, CpdpSelection] = {}
    skipped = {c.kind: 0 for c in plan.classifiers}
    for combo in combos:
        if set_subset is not None:
            used = set_subset
        else:
            used = _filter_subset_for(combo, plan.bins, plan.filter_cache)
        X, y = pooled_matrix(combo, used)
        for classifier in plan.classifiers:
            try:
                model = train_matrix(classifier, X, y, used)
            except (SingleClassData, TooFewSamples):
                skipped[classifier.kind] += 1
                continue
            outcome = outcome_from_scores(
                model.clf.score_samples(target_matrix(used)), y_target
            )
            value = measures(outcome).get(scenario.cpdp_objective)
            current = best.get(classifier.kind)
            if current is None or value > current.objective_value:
                best[classifier.kind] = CpdpSelection(
                    combination=tuple(r.key for r in combo),
                    outcome=outcome,
                    objective_value=value,
                    subset=used,
                    n_candidates=len(combos),
                    n_skipped=0,
                )

    rows = []
    for classifier in plan.classifiers:
        info = dict(base, classifier=classifier.kind, metric_set=set_name)
        selection = best.get(classifier.kind)
        if selection is None:
            rows.append(
                ResultRow(
                    **info,
                    error=(
                        "SingleClassData: every candidate combination for "
                        f"{target.label} was single-class"
                    ),
                )
            )
            continue
        selection = replace(selection, n_skipped=skipped[classifier.kind])
        rows.append(
            ResultRow(
                **info,
                subset=selection.subset,
                cpdp_combination=selection.combination,
                cpdp_objective=scenario.cpdp_objective,
                cpdp_objective_value=selection.objective_value,
                cpdp_skipped=selection.n_skipped,
                training=selection.combination,
                **_measure_fields(selection.outcome),
            )
        )
    return rows


def _cell_group_rows(plan: GridPlan, task: PredictionTask, set_name: str,
                     set_subset) -> list[ResultRow]:
    """All classifier rows for one (target, metric set) cell group."""
    scenario = plan.scenario
    target = task.target
    base = {
        "target_project": target.project,
        "target_version": target.version,
        "scenario": scenario.label,
    }
    if scenario.kind == CPDP_EXHAUSTIVE:
        try:
            return _cpdp_set_rows(plan, task, set_name, set_subset, base)
        except Exception as exc:  # cell-group failure: one error row per cell
            return [
                ResultRow(
                    **dict(base, classifier=classifier.kind, metric_set=set_name),
                    error=f"{type(exc).__name__}: {exc}",
                )
                for classifier in plan.classifiers
            ]
    rows: list[ResultRow] = []
    for classifier in plan.classifiers:
        info = dict(base, classifier=classifier.kind, metric_set=set_name)
        try:
            if not task.training:
                raise NoTrainingData(f"{target.label} has no prior release")
            if set_subset is None:
                used = _filter_subset_for(task.training, plan.bins, plan.filter_cache)
            else:
                used = set_subset
            X, y = pooled_matrix(task.training, used)
            model = train_matrix(classifier, X, y, used)
            outcome = evaluate_on(model, target)
            rows.append(
                ResultRow(
                    **info,
                    subset=used,
                    training=tuple(r.key for r in task.training),
                    **_measure_fields(outcome),
                )
            )
        except Exception as exc:  # per-cell failures never abort the grid
            rows.append(
                ResultRow(
                    **info,
                    training=tuple(r.key for r in task.training),
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return rows


def _target_rows(plan: GridPlan, task: PredictionTask) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for set_name, set_subset in plan.metric_sets:
        rows.extend(_cell_group_rows(plan, task, set_name, set_subset))
    return rows


_WORKER_PLAN: GridPlan | None = None


def _worker_init(plan: GridPlan):
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _worker_run(unit: tuple[int, int]) -> list[ResultRow]:
    task_index, set_index = unit
    plan = _WORKER_PLAN
    tasks = build_tasks(plan.corpus, plan.scenario)
    set_name, set_subset = plan.metric_sets[set_index]
    return _cell_group_rows(plan, tasks[task_index], set_name, set_subset)


def run_grid(
    corpus: Corpus,
    scenarios: Sequence[ScenarioSpec],
    classifiers: Sequence[ClassifierSpec],
    metric_sets: Mapping[str, tuple[str, ...] | None],
    workers: int = 1,
    bins: int = 10,
) -> ResultTable:
    """Run the complete grid: every target x scenario x classifier x metric set.

    ``metric_sets`` maps a set name to an explicit metric tuple, or to None
    for per-task filter selection. Rows come back in deterministic order
    (scenario, manifest target order, metric set, classifier) regardless of
    worker count.
    """
    normalized: list[tuple[str, tuple[str, ...] | None]] = []
    for name, subset in metric_sets.items():
        if subset is None:
            normalized.append((name, None))
        else:
            normalized.append((name, canonical_subset(subset)))

    all_rows: list[ResultRow] = []
    for scenario in scenarios:
        plan = GridPlan(
            corpus=corpus,
            scenario=scenario,
            classifiers=tuple(classifiers),
            metric_sets=tuple(normalized),
            bins=bins,
        )
        tasks = build_tasks(corpus, scenario)
        if workers > 1 and len(tasks) > 1:
            units = [
                (task_index, set_index)
                for task_index in range(len(tasks))
                for set_index in range(len(normalized))
            ]
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_worker_init, initargs=(plan,)
            ) as pool:
                for rows in pool.map(_worker_run, units):
                    all_rows.extend(rows)
        else:
            for task in tasks:
                all_rows.extend(_target_rows(plan, task))
    return ResultTable(tuple(all_rows))
