"""Binary defect classifiers over a chosen metric subset.

Five deterministic, library-free learners: Gaussian naive Bayes, ridge
logistic regression (fixed-step batch gradient descent), a gain-ratio
decision tree, a discretized decision table, and a Pegasos-style linear SVM.
Every predictor exposes a class-1 tendency score in [0, 1]; the positive
flag is score >= 0.5.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import METRIC_INDEX, Instance, Release, label_vector, pooled_matrix
from .errors import MissingFeature, SingleClassData, TooFewSamples
from .features import EqualFrequencyBinner
from .stats import Outcome

MODEL_FORMAT_VERSION = 1

KINDS = ("naive_bayes", "logistic", "tree", "decision_table", "linear_svm")

_DEFAULT_PARAMS: dict[str, dict[str, float | int]] = {
    "naive_bayes": {"var_floor": 1e-9},
    "logistic": {"ridge": 1e-8, "tol": 1e-8, "max_iter": 500},
    "tree": {"min_leaf": 2, "max_depth": 20},
    "decision_table": {"bins": 3},
    "linear_svm": {"lam": 1e-4, "epochs": 200, "batch_size": 0},
}

_POSITIVE_PARAMS = {"var_floor", "ridge", "tol", "max_iter", "min_leaf",
                    "max_depth", "bins", "lam", "epochs"}


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind plus validated hyperparameters and a seed."""

    kind: str
    seed: int = 0
    params: Mapping[str, float | int] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        defaults = _DEFAULT_PARAMS[self.kind]
        merged = dict(defaults)
        for key, value in self.params.items():
            if key not in defaults:
                raise ValueError(f"unknown parameter {key!r} for kind {self.kind!r}")
            if key in _POSITIVE_PARAMS and not value > 0:
                raise ValueError(f"parameter {key!r} must be positive, got {value}")
            if key == "batch_size" and value < 0:
                raise ValueError("batch_size must be >= 0 (0 means full batch)")
            merged[key] = value
        object.__setattr__(self, "params", merged)

    def param(self, key: str) -> float | int:
        return self.params[key]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# --- Gaussian naive Bayes ---------------------------------------------------


class GaussianNB:
    """Per-class Gaussian likelihoods with a variance floor.

    Tolerates single-class training data by predicting that class constantly.
    """

    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor
        self.single_class: int | None = None
        self.log_prior: tuple[float, float] | None = None
        self.means: np.ndarray | None = None  # shape (2, k)
        self.variances: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianNB":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=bool)
        classes = np.unique(y)
        if classes.size == 1:
            self.single_class = int(classes[0])
            return self
        n = y.size
        self.log_prior = (
            math.log(np.count_nonzero(~y) / n),
            math.log(np.count_nonzero(y) / n),
        )
        means = np.empty((2, X.shape[1]))
        variances = np.empty((2, X.shape[1]))
        for c, mask in enumerate((~y, y)):
            xc = X[mask]
            means[c] = xc.mean(axis=0)
            variances[c] = np.maximum(xc.var(axis=0), self.var_floor)
        self.means = means
        self.variances = variances
        return self

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.single_class is not None:
            return np.full(X.shape[0], float(self.single_class))
        log_like = []
        for c in (0, 1):
            mu = self.means[c]
            var = self.variances[c]
            ll = -0.5 * (np.log(2.0 * math.pi * var) + (X - mu) ** 2 / var)
            log_like.append(self.log_prior[c] + ll.sum(axis=1))
        return _sigmoid(log_like[1] - log_like[0])


# --- logistic regression -----------------------------------------------------


class LogisticModel:
    """Ridge-regularized logistic regression, fixed-step batch gradient descent.

    Features are standardized internally; the fitted weights are mapped back
    to the original scale. All-constant columns are dropped with a recorded
    warning. The step size comes from a trace bound on the Hessian, which
    makes the training loss non-increasing; pass ``track_loss=True`` to
    record the loss trajectory (pure observation, identical weight path).
    """

    def __init__(self, ridge: float = 1e-8, tol: float = 1e-8, max_iter: int = 500,
                 track_loss: bool = False):
        self.ridge = ridge
        self.tol = tol
        self.max_iter = max_iter
        self.track_loss = track_loss
        self.weights: np.ndarray | None = None  # original scale
        self.bias: float = 0.0
        self.dropped: tuple[int, ...] = ()
        self.loss_history: tuple[float, ...] = ()
        self.n_iter: int = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticModel":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=bool)
        if np.all(y == y.flat[0]):
            raise SingleClassData("logistic regression needs both classes")
        yf = y.astype(np.float64)
        n, k = X.shape

        sd = X.std(axis=0)
        keep = np.flatnonzero(sd > 0.0)
        self.dropped = tuple(int(j) for j in np.flatnonzero(sd == 0.0))
        mu = X[:, keep].mean(axis=0)
        sigma = sd[keep]
        Z = (X[:, keep] - mu) / sigma if keep.size else np.empty((n, 0))

        w = np.zeros(keep.size)
        b = 0.0
        # trace bound: standardized columns have unit mean square, the bias
        # column is ones, so L <= (k' + 1) / 4 + ridge
        step = 1.0 / ((keep.size + 1) / 4.0 + self.ridge)
        tol2 = self.tol * self.tol

        def loss(w, b):
            z = Z @ w + b
            nll = float(np.mean(np.logaddexp(0.0, z) - yf * z))
            return nll + 0.5 * self.ridge * float(w @ w)

        history = [loss(w, b)] if self.track_loss else []
        iterations = 0
        for _ in range(self.max_iter):
            residual = _sigmoid(Z @ w + b)
            residual -= yf
            g_w = Z.T @ residual
            g_w /= n
            g_w += self.ridge * w
            g_b = float(residual.mean())
            if float(g_w @ g_w) + g_b * g_b <= tol2:
                break
            iterations += 1
            w -= step * g_w
            b -= step * g_b
            if self.track_loss:
                history.append(loss(w, b))
        self.n_iter = iterations
        self.loss_history = tuple(history)

        weights = np.zeros(k)
        if keep.size:
            weights[keep] = w / sigma
            b = b - float(np.sum(w * mu / sigma))
        self.weights = weights
        self.bias = b
        return self

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return _sigmoid(X @ self.weights + self.bias)


# --- gain-ratio decision tree --------------------------------------------------


def _binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))


class GainRatioTree:
    """Binary tree on numeric thresholds chosen by gain ratio.

    Thresholds are midpoints between consecutive distinct sorted values;
    splits must leave ``min_leaf`` instances on each side and have strictly
    positive information gain. No pruning. Each feature is sorted once at
    the root; splits partition the sorted index lists, keeping node
    construction linear per level.
    """

    def __init__(self, min_leaf: int = 2, max_depth: int = 20):
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.root: dict | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GainRatioTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=bool)
        if np.all(y == y.flat[0]):
            raise SingleClassData("tree training needs both classes")
        sorted_cols = [
            np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])
        ]
        self.root = self._build(X, y, sorted_cols, depth=0)
        return self

    def _best_split(self, X: np.ndarray, y: np.ndarray, sorted_cols):
        n = sorted_cols[0].size
        pos_total = int(y[sorted_cols[0]].sum())
        parent_h = _binary_entropy(pos_total / n)
        best = None  # (ratio, feature, threshold)
        sizes = np.arange(1, n)
        for j, order in enumerate(sorted_cols):
            sv = X[order, j]
            sy = y[order]
            cum_pos = np.cumsum(sy)
            # candidate left sizes: boundaries between distinct values
            boundary = sv[1:] != sv[:-1]
            valid = boundary & (sizes >= self.min_leaf) & (n - sizes >= self.min_leaf)
            if not valid.any():
                continue
            left = sizes[valid].astype(np.float64)
            right = n - left
            lpos = cum_pos[:-1][valid].astype(np.float64)
            rpos = pos_total - lpos
            with np.errstate(divide="ignore", invalid="ignore"):
                def h(p):
                    p = np.clip(p, 1e-300, 1.0)
                    q = np.clip(1.0 - p, 1e-300, 1.0)
                    out = -(p * np.log(p) + q * np.log(q))
                    return np.where((p <= 1e-300) | (q <= 1e-300), 0.0, out)

                h_left = h(lpos / left)
                h_right = h(rpos / right)
                gain = parent_h - (left / n) * h_left - (right / n) * h_right
                split_info = -(left / n) * np.log(left / n) - (right / n) * np.log(right / n)
            usable = gain > 1e-12
            if not usable.any():
                continue
            ratio = np.where(usable, gain / split_info, -np.inf)
            pick = int(np.argmax(ratio))
            if best is None or ratio[pick] > best[0]:
                cut_index = int(sizes[valid][pick])
                threshold = float((sv[cut_index - 1] + sv[cut_index]) / 2.0)
                best = (float(ratio[pick]), j, threshold)
        return best

    def _build(self, X: np.ndarray, y: np.ndarray, sorted_cols, depth: int) -> dict:
        n = sorted_cols[0].size
        score = float(y[sorted_cols[0]].sum()) / n
        if depth >= self.max_depth or score in (0.0, 1.0) or n < 2 * self.min_leaf:
            return {"leaf": score}
        best = self._best_split(X, y, sorted_cols)
        if best is None:
            return {"leaf": score}
        _, feature, threshold = best
        go_left = X[:, feature] <= threshold
        left_cols = [order[go_left[order]] for order in sorted_cols]
        right_cols = [order[~go_left[order]] for order in sorted_cols]
        return {
            "feature": feature,
            "threshold": threshold,
            "left": self._build(X, y, left_cols, depth + 1),
            "right": self._build(X, y, right_cols, depth + 1),
        }

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root
            while "leaf" not in node:
                node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
            out[i] = node["leaf"]
        return out


# --- decision table ---------------------------------------------------------------


class DecisionTable:
    """Schema = the active metric subset; body = discretized training cells.

    Each feature is split into equal-frequency bins; a cell predicts the
    fraction of buggy training instances it holds, and unseen cells fall
    back to the global fraction.
    """

    def __init__(self, bins: int = 3):
        self.bins = bins
        self.binners: list[EqualFrequencyBinner | None] = []
        self.radices: list[int] = []
        self.cells: dict[int, float] = {}
        self.global_score: float = 0.5

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTable":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=bool)
        n, k = X.shape
        self.global_score = float(y.sum()) / n
        self.binners = []
        self.radices = []
        codes = np.zeros(n, dtype=np.int64)
        radix = 1
        for j in range(k):
            col = X[:, j]
            if n < self.bins or np.all(col == col[0]):
                self.binners.append(None)
                self.radices.append(0)
                continue
            binner = EqualFrequencyBinner(self.bins).fit(col)
            self.binners.append(binner)
            self.radices.append(radix)
            codes = codes + binner.transform(col) * radix
            radix *= self.bins
        # cell ids are sparse in a space of bins**k; count by grouping
        unique_ids, inverse = np.unique(codes, return_inverse=True)
        totals = np.bincount(inverse)
        positives = np.bincount(inverse, weights=y.astype(np.float64))
        self.cells = {
            int(cell): float(pos / tot)
            for cell, tot, pos in zip(unique_ids, totals, positives)
        }
        return self

    def _cell_ids(self, X: np.ndarray) -> np.ndarray:
        codes = np.zeros(X.shape[0], dtype=np.int64)
        for j, (binner, radix) in enumerate(zip(self.binners, self.radices)):
            if binner is None:
                continue
            codes = codes + binner.transform(X[:, j]) * radix
        return codes

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        ids = self._cell_ids(X)
        return np.array([self.cells.get(int(c), self.global_score) for c in ids])


# --- linear SVM --------------------------------------------------------------------


class LinearSVM:
    """Pegasos-style subgradient descent on the hinge loss.

    The bias is folded in as a constant feature. ``batch_size=0`` runs one
    deterministic full-batch subgradient step per epoch; positive batch
    sizes shuffle each epoch with the seeded generator. Raw margins map to
    scores through 1 / (1 + exp(-2 margin)). ``track_objective=True``
    records the per-epoch objective without touching the weight path.
    """

    def __init__(self, lam: float = 1e-4, epochs: int = 200,
                 batch_size: int = 0, seed: int = 0,
                 track_objective: bool = False):
        self.lam = lam
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.track_objective = track_objective
        self.weights: np.ndarray | None = None  # includes the bias slot
        self.objective_history: tuple[float, ...] = ()

    def _objective(self, Z: np.ndarray, y_pm: np.ndarray, w: np.ndarray) -> float:
        margins = y_pm * (Z @ w)
        hinge = float(np.mean(np.maximum(0.0, 1.0 - margins)))
        return hinge + 0.5 * self.lam * float(w @ w)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearSVM":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=bool)
        if np.all(y == y.flat[0]):
            raise SingleClassData("linear SVM needs both classes")
        n = X.shape[0]
        Z = np.hstack([X, np.ones((n, 1))])
        y_pm = np.where(y, 1.0, -1.0)
        w = np.zeros(Z.shape[1])
        radius = 1.0 / math.sqrt(self.lam)
        rng = np.random.default_rng(self.seed)
        t = 0
        history = [self._objective(Z, y_pm, w)] if self.track_objective else []
        full = np.arange(n)
        for _ in range(self.epochs):
            if self.batch_size > 0:
                order = rng.permutation(n)
                batches = [
                    order[i : i + self.batch_size]
                    for i in range(0, n, self.batch_size)
                ]
            else:
                batches = [full]
            for batch in batches:
                t += 1
                eta = 1.0 / (self.lam * t)
                if batch is full:
                    zb, yb = Z, y_pm
                else:
                    zb, yb = Z[batch], y_pm[batch]
                margins = zb @ w
                margins *= yb
                coef = np.where(margins < 1.0, yb, 0.0)
                grad_term = zb.T @ coef
                grad_term /= batch.size
                w = (1.0 - eta * self.lam) * w + eta * grad_term
                norm2 = float(w @ w)
                if norm2 > radius * radius:
                    w *= radius / math.sqrt(norm2)
            if self.track_objective:
                history.append(self._objective(Z, y_pm, w))
        self.weights = w
        self.objective_history = tuple(history)
        return self

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        margins = X @ self.weights[:-1] + self.weights[-1]
        return _sigmoid(2.0 * margins)


# --- training / prediction API -------------------------------------------------------


@dataclass(frozen=True)
class Model:
    """A fitted classifier bound to the metric subset it was trained on."""

    kind: str
    subset: tuple[str, ...]
    clf: object
    n_train: int
    n_buggy: int
    warnings: tuple[str, ...] = ()


def _build_classifier(spec: ClassifierSpec):
    p = spec.params
    if spec.kind == "naive_bayes":
        return GaussianNB(var_floor=p["var_floor"])
    if spec.kind == "logistic":
        return LogisticModel(ridge=p["ridge"], tol=p["tol"], max_iter=int(p["max_iter"]))
    if spec.kind == "tree":
        return GainRatioTree(min_leaf=int(p["min_leaf"]), max_depth=int(p["max_depth"]))
    if spec.kind == "decision_table":
        return DecisionTable(bins=int(p["bins"]))
    return LinearSVM(lam=p["lam"], epochs=int(p["epochs"]),
                     batch_size=int(p["batch_size"]), seed=spec.seed)


def train_matrix(
    spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, subset: Sequence[str]
) -> Model:
    """Fit ``spec`` on an explicit matrix whose columns follow ``subset``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    if X.shape[0] < 2:
        raise TooFewSamples("training needs at least 2 instances")
    clf = _build_classifier(spec).fit(X, y)
    warnings = []
    dropped = getattr(clf, "dropped", ())
    if dropped:
        names = [subset[j] for j in dropped]
        warnings.append(f"dropped constant columns: {', '.join(names)}")
    return Model(
        kind=spec.kind,
        subset=tuple(subset),
        clf=clf,
        n_train=int(X.shape[0]),
        n_buggy=int(np.count_nonzero(y)),
        warnings=tuple(warnings),
    )


def train(
    spec: ClassifierSpec,
    training: Release | Sequence[Release],
    subset: Sequence[str],
) -> Model:
    """Fit on one release or a pooled list of releases (binarized)."""
    releases = [training] if isinstance(training, Release) else list(training)
    X, y = pooled_matrix(releases, subset)
    return train_matrix(spec, X, y, subset)


def predict(model: Model, instance: Instance) -> tuple[bool, float]:
    """(flag, score) for one instance; flag is score >= 0.5."""
    row = []
    for name in model.subset:
        if name not in METRIC_INDEX:
            raise MissingFeature(name)
        row.append(instance.metrics[METRIC_INDEX[name]])
    score = float(model.clf.score_samples(np.array([row]))[0])
    return score >= 0.5, score


def outcome_from_scores(scores: np.ndarray, y: np.ndarray) -> Outcome:
    """Confusion counts from scores (flag = score >= 0.5) against labels."""
    flags = np.asarray(scores) >= 0.5
    y = np.asarray(y, dtype=bool)
    return Outcome(
        tp=int(np.count_nonzero(flags & y)),
        fp=int(np.count_nonzero(flags & ~y)),
        tn=int(np.count_nonzero(~flags & ~y)),
        fn=int(np.count_nonzero(~flags & y)),
    )


def evaluate_on(model: Model, test: Release) -> Outcome:
    """Confusion counts of the model against a binarized test release."""
    y = label_vector(test)
    X = np.array([inst.metrics for inst in test.instances], dtype=np.float64)
    cols = [METRIC_INDEX[name] for name in model.subset]
    scores = model.clf.score_samples(X[:, cols])
    return outcome_from_scores(scores, y)


# --- model serialization ----------------------------------------------------------


def _binner_state(binner: EqualFrequencyBinner | None):
    if binner is None:
        return None
    return {
        "bins": binner.bins,
        "distinct": [float(v) for v in binner._distinct],
        "distinct_bins": [int(v) for v in binner._distinct_bins],
        "degenerate": binner.degenerate,
    }


def _binner_restore(state) -> EqualFrequencyBinner | None:
    if state is None:
        return None
    binner = EqualFrequencyBinner(state["bins"])
    binner._distinct = np.array(state["distinct"], dtype=np.float64)
    binner._distinct_bins = np.array(state["distinct_bins"], dtype=np.int64)
    binner.degenerate = state["degenerate"]
    return binner


def model_to_json(model: Model) -> str:
    clf = model.clf
    if model.kind == "naive_bayes":
        params = {
            "single_class": clf.single_class,
            "log_prior": list(clf.log_prior) if clf.log_prior else None,
            "means": clf.means.tolist() if clf.means is not None else None,
            "variances": clf.variances.tolist() if clf.variances is not None else None,
            "var_floor": clf.var_floor,
        }
    elif model.kind == "logistic":
        params = {
            "weights": clf.weights.tolist(),
            "bias": clf.bias,
            "dropped": list(clf.dropped),
            "ridge": clf.ridge,
        }
    elif model.kind == "tree":
        params = {"root": clf.root, "min_leaf": clf.min_leaf, "max_depth": clf.max_depth}
    elif model.kind == "decision_table":
        params = {
            "bins": clf.bins,
            "binners": [_binner_state(b) for b in clf.binners],
            "radices": clf.radices,
            "cells": {str(k): v for k, v in sorted(clf.cells.items())},
            "global_score": clf.global_score,
        }
    else:
        params = {"weights": clf.weights.tolist(), "lam": clf.lam}
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "subset": list(model.subset),
        "n_train": model.n_train,
        "n_buggy": model.n_buggy,
        "warnings": list(model.warnings),
        "params": params,
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> Model:
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {doc.get('format_version')}")
    kind = doc["kind"]
    params = doc["params"]
    if kind == "naive_bayes":
        clf = GaussianNB(var_floor=params["var_floor"])
        clf.single_class = params["single_class"]
        if params["log_prior"] is not None:
            clf.log_prior = tuple(params["log_prior"])
            clf.means = np.array(params["means"], dtype=np.float64)
            clf.variances = np.array(params["variances"], dtype=np.float64)
    elif kind == "logistic":
        clf = LogisticModel(ridge=params["ridge"])
        clf.weights = np.array(params["weights"], dtype=np.float64)
        clf.bias = params["bias"]
        clf.dropped = tuple(params["dropped"])
    elif kind == "tree":
        clf = GainRatioTree(min_leaf=params["min_leaf"], max_depth=params["max_depth"])
        clf.root = params["root"]
    elif kind == "decision_table":
        clf = DecisionTable(bins=params["bins"])
        clf.binners = [_binner_restore(s) for s in params["binners"]]
        clf.radices = list(params["radices"])
        clf.cells = {int(k): float(v) for k, v in params["cells"].items()}
        clf.global_score = params["global_score"]
    elif kind == "linear_svm":
        clf = LinearSVM(lam=params["lam"])
        clf.weights = np.array(params["weights"], dtype=np.float64)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return Model(
        kind=kind,
        subset=tuple(doc["subset"]),
        clf=clf,
        n_train=doc["n_train"],
        n_buggy=doc["n_buggy"],
        warnings=tuple(doc["warnings"]),
    )
