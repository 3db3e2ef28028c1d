"""L2-regularized logistic regression, hyperplane averaging, and the two baselines.

The trainer is deterministic full-batch gradient descent: steepest-descent
steps sized by a Barzilai-Borwein estimate and guarded by Armijo backtracking,
run to a gradient-norm tolerance. No randomness anywhere, so retraining on
identical inputs is bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import CourseData, LabelSet, derive_labels
from .errors import (
    BadValueError,
    EmptyListError,
    NonFiniteLossError,
    SchemaMismatchError,
    SingleClassError,
)
from .features import (
    DEFAULT_SCHEMA,
    FeatureMatrix,
    NormStats,
    days_since_last_action,
    encode_demographics,
    norm_stats_from_dict,
    norm_stats_to_dict,
)


@dataclass(frozen=True)
class ScoredStudents:
    """Per-student scores; higher means more likely to certify."""

    student_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.shape != (len(self.student_ids),):
            raise BadValueError("scores must align one-to-one with student_ids")
        if scores.size and not np.all(np.isfinite(scores)):
            raise BadValueError("scores must be finite")


@dataclass(frozen=True)
class LinearModel:
    """Logistic hyperplane over the feature schema columns."""

    weights: np.ndarray
    intercept: float
    reg_C: float
    norm: NormStats | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1:
            raise BadValueError("weights must be a vector")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.intercept)):
            raise BadValueError("model parameters must be finite")
        if self.reg_C <= 0:
            raise BadValueError(f"reg_C {self.reg_C} must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient-descent controls; tolerance scales with the number of examples."""

    tol_per_example: float = 1e-6
    max_iter: int = 10_000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60


def loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float
) -> tuple[float, np.ndarray, float]:
    """Regularized log-loss (1/C)*0.5*||w||^2 + sum_i loss_i and its gradient.

    The intercept is unregularized. Stable via logaddexp: loss_i =
    log(1 + exp(z_i)) - y_i*z_i with z = Xw + b.
    """
    z = X @ w + b
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z)) + 0.5 / C * float(w @ w)
    r = expit(z) - y
    grad_w = X.T @ r + w / C
    grad_b = float(np.sum(r))
    return loss, grad_w, grad_b


def _loss_along(
    z: np.ndarray, dz: np.ndarray, y: np.ndarray,
    w_sq: float, w_dot_d: float, d_sq: float, s: float, C: float,
) -> float:
    """Objective at step length s along a fixed direction, without a matvec."""
    zs = z + s * dz
    reg = 0.5 / C * (w_sq + 2.0 * s * w_dot_d + s * s * d_sq)
    return float(np.sum(np.logaddexp(0.0, zs) - y * zs)) + reg


def _minimize(
    X: np.ndarray, y: np.ndarray, C: float, opt: OptimizerConfig
) -> tuple[np.ndarray, float, int, bool]:
    """Run the descent from the origin; returns (w, b, iterations, converged)."""
    n, p = X.shape
    tol = opt.tol_per_example * n
    w = np.zeros(p)
    b = 0.0
    z = np.zeros(n)
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z))
    r = expit(z) - y
    gw = X.T @ r + w / C
    gb = float(np.sum(r))
    prev_dw = prev_db = None
    prev_gw = prev_gb = None
    step = 1.0
    for it in range(opt.max_iter):
        g_norm = math.sqrt(float(gw @ gw) + gb * gb)
        if g_norm <= tol:
            return w, b, it, True
        dw, db = -gw, -gb
        # Barzilai-Borwein step estimate from the last accepted move
        if prev_dw is not None:
            s_dot_s = float(prev_dw @ prev_dw) + prev_db * prev_db
            s_dot_yv = float(prev_dw @ (gw - prev_gw)) + prev_db * (gb - prev_gb)
            if s_dot_yv > 0 and math.isfinite(s_dot_yv):
                step = min(max(s_dot_s / s_dot_yv, 1e-12), 1e12)
        dz = X @ dw + db
        w_sq = float(w @ w)
        w_dot_d = float(w @ dw)
        d_sq = float(dw @ dw)
        slope = -(g_norm * g_norm)  # directional derivative along -g
        s = step
        accepted = False
        for _ in range(opt.max_backtracks):
            cand = _loss_along(z, dz, y, w_sq, w_dot_d, d_sq, s, C)
            if math.isfinite(cand) and cand <= loss + opt.armijo_c * s * slope:
                accepted = True
                break
            s *= opt.backtrack
        if not accepted:
            return w, b, it, False  # step underflow: numerically stationary
        prev_dw, prev_db = s * dw, s * db
        prev_gw, prev_gb = gw.copy(), gb
        w = w + prev_dw
        b = b + prev_db
        z = z + s * dz
        loss = cand
        if not math.isfinite(loss):
            raise NonFiniteLossError(f"loss diverged at iteration {it}")
        r = expit(z) - y
        gw = X.T @ r + w / C
        gb = float(np.sum(r))
        step = s
    g_norm = math.sqrt(float(gw @ gw) + gb * gb)
    return w, b, opt.max_iter, bool(g_norm <= tol)


def _check_binary(y: np.ndarray) -> None:
    if len(y) == 0 or np.all(y == y[0]):
        raise SingleClassError("training labels contain a single class")


def train_logreg(
    X: FeatureMatrix,
    y: LabelSet,
    C: float = 1.0,
    opt: OptimizerConfig | None = None,
    norm: NormStats | None = None,
) -> LinearModel:
    """Fit the logistic hyperplane on an already-normalized matrix.

    norm is carried on the model purely as a record of how X was produced;
    pass the stats used so deployment can reproduce the transform.
    """
    if C <= 0:
        raise BadValueError(f"C {C} must be positive")
    opt = opt or OptimizerConfig()
    yv = y.vector(X.student_ids)
    if len(yv) == 0:
        raise SingleClassError("no training rows")
    _check_binary(yv)
    w, b, _, _ = _minimize(X.values, yv, C, opt)
    return LinearModel(weights=w, intercept=b, reg_C=C, norm=norm)


def predict_proba(m: LinearModel, X: FeatureMatrix) -> ScoredStudents:
    """Certification probabilities via the logistic link."""
    if len(m.weights) != X.schema.width:
        raise SchemaMismatchError(
            f"model has {len(m.weights)} weights, matrix has {X.schema.width} columns"
        )
    if m.norm is not None and m.norm.names != X.schema.names:
        raise SchemaMismatchError("model was trained on a different schema")
    z = X.values @ m.weights + m.intercept
    return ScoredStudents(X.student_ids, expit(z))


def decision_values(m: LinearModel, X: FeatureMatrix) -> np.ndarray:
    """Raw logits w.x + b (same ordering as predict_proba scores)."""
    if len(m.weights) != X.schema.width:
        raise SchemaMismatchError(
            f"model has {len(m.weights)} weights, matrix has {X.schema.width} columns"
        )
    return X.values @ m.weights + m.intercept


def average_hyperplanes(models: Sequence[LinearModel]) -> LinearModel:
    """Element-wise mean of weights and intercepts.

    Each component is summed with math.fsum (correctly rounded), so the result
    is exactly invariant to the order of the models. The norm field is cleared:
    the caller supplies the deployment normalization.
    """
    if len(models) == 0:
        raise EmptyListError("cannot average zero models")
    width = len(models[0].weights)
    for m in models[1:]:
        if len(m.weights) != width:
            raise SchemaMismatchError("models have mismatched weight widths")
    n = len(models)
    weights = np.array(
        [math.fsum(float(m.weights[j]) for m in models) / n for j in range(width)]
    )
    intercept = math.fsum(float(m.intercept) for m in models) / n
    return LinearModel(weights=weights, intercept=intercept, reg_C=models[0].reg_C, norm=None)


def baseline_demographics(
    course: CourseData,
    y: LabelSet | None = None,
    C: float = 1.0,
    opt: OptimizerConfig | None = None,
) -> LinearModel:
    """Demographics-only logistic regression (Baseline 1).

    Trains on the raw 33 dummy columns; every other weight is exactly zero, so
    activity can never influence the score.
    """
    if y is None:
        y = derive_labels(course)
    if C <= 0:
        raise BadValueError(f"C {C} must be positive")
    opt = opt or OptimizerConfig()
    by_id = {s.student_id: s for s in course.students}
    demo = np.array([encode_demographics(by_id[sid]) for sid in course.student_ids])
    yv = y.vector(course.student_ids)
    if len(yv) == 0:
        raise SingleClassError("no training rows")
    _check_binary(yv)
    w33, b, _, _ = _minimize(demo, yv, C, opt)
    weights = np.zeros(DEFAULT_SCHEMA.width)
    demo_cols = [i for blk in
                 ("age_dummies", "loe_dummies", "gender_dummies", "continent_dummies")
                 for i in DEFAULT_SCHEMA.blocks[blk]]
    weights[demo_cols] = w33
    return LinearModel(weights=weights, intercept=b, reg_C=C, norm=None)


def score_demographics(m: LinearModel, course: CourseData) -> ScoredStudents:
    """Apply a demographics-only model to a course roster (no activity read)."""
    by_id = {s.student_id: s for s in course.students}
    demo_cols = [i for blk in
                 ("age_dummies", "loe_dummies", "gender_dummies", "continent_dummies")
                 for i in DEFAULT_SCHEMA.blocks[blk]]
    demo = np.array([encode_demographics(by_id[sid]) for sid in course.student_ids])
    z = demo @ m.weights[demo_cols] + m.intercept
    return ScoredStudents(course.student_ids, expit(z))


def baseline_recency(course: CourseData, as_of) -> ScoredStudents:
    """Recency ranking (Baseline 2): score = -days_since_last_action, no training."""
    from .features import check_as_of, cumulative_all

    off = check_as_of(course, as_of)
    _, dsla = cumulative_all(course, off)
    return ScoredStudents(course.student_ids, -dsla)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def schema_hash(names: Sequence[str] = DEFAULT_SCHEMA.names) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


def save_model(m: LinearModel, path: str | Path) -> None:
    doc = {
        "schema_hash": schema_hash(),
        "weights": m.weights.tolist(),
        "intercept": m.intercept,
        "C": m.reg_C,
        "norm": None if m.norm is None else norm_stats_to_dict(m.norm),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_model(path: str | Path) -> LinearModel:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("schema_hash") != schema_hash():
        raise SchemaMismatchError(f"{path}: model schema does not match this feature schema")
    norm = doc.get("norm")
    return LinearModel(
        weights=np.asarray(doc["weights"], dtype=np.float64),
        intercept=float(doc["intercept"]),
        reg_C=float(doc["C"]),
        norm=None if norm is None else norm_stats_from_dict(norm),
    )
