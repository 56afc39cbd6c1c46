"""Selective prediction metrics: ROC, PR and risk-coverage curves.

Misclassified samples are the positive class.  A threshold ``t`` keeps the
samples with confidence ``>= t`` (covered) and flags the rest (abstained), so
the ROC and PR curves are swept with confidence ascending and the RC curve
with confidence descending.  Samples sharing a confidence value always move
across the threshold together.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import log_softmax

from .core import EvaluationSet
from .exceptions import DegenerateClasses, KindMismatch, MissingLogits, MTooLarge

__all__ = [
    "CurveKind",
    "Curve",
    "Dominance",
    "SelectiveReport",
    "roc_curve",
    "pr_curve",
    "rc_curve",
    "auroc",
    "aupr",
    "aurc",
    "dominates",
    "perturb_m",
    "brier",
    "nll",
    "selective_report",
    "is_perfect",
]


class CurveKind(str, enum.Enum):
    ROC = "ROC"
    PR = "PR"
    RC = "RC"


@dataclass(frozen=True, eq=False)
class Curve:
    """A named polyline with the area under it.

    ``x``/``y`` are FPR/TPR for ROC, recall/precision for PR and
    coverage/risk for RC.  ``thresholds`` holds the confidence value at
    which each point is reached (NaN for synthetic end points).
    """

    kind: CurveKind
    x: np.ndarray
    y: np.ndarray
    area: float
    thresholds: np.ndarray = field(repr=False, default=None)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self):
        return len(self.x)


class Dominance(str, enum.Enum):
    A_DOMINATES = "A_dominates"
    B_DOMINATES = "B_dominates"
    INCOMPARABLE = "incomparable"
    EQUAL = "equal"


def _tie_groups(sorted_conf):
    """Index of the last element of each run of equal values."""
    n = sorted_conf.shape[0]
    change = np.flatnonzero(sorted_conf[1:] != sorted_conf[:-1])
    return np.append(change, n - 1)


def _ascending(eval_set):
    order = np.argsort(eval_set.confidence, kind="stable")
    r = eval_set.confidence[order]
    wrong = 1 - eval_set.correct[order].astype(np.int64)
    ends = _tie_groups(r)
    tp = np.cumsum(wrong)[ends]
    fp = (ends + 1) - tp
    return r[ends], tp, fp


def roc_curve(eval_set: EvaluationSet) -> Curve:
    """ROC curve for detecting misclassifications.

    Points are ``(FPR, TPR)`` after each distinct confidence value is
    flagged, preceded by ``(0, 0)``; the area uses the trapezoidal rule, which
    gives ties half credit.
    """
    thr, tp, fp = _ascending(eval_set)
    pos, neg = int(tp[-1]), int(fp[-1])
    if pos == 0 or neg == 0:
        raise DegenerateClasses(
            "ROC needs at least one correct and one wrong prediction "
            f"(got {neg} correct, {pos} wrong)")
    x = np.concatenate([[0.0], fp / neg])
    y = np.concatenate([[0.0], tp / pos])
    area = float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)
    return Curve(CurveKind.ROC, x, y, area, np.concatenate([[np.nan], thr]))


def pr_curve(eval_set: EvaluationSet) -> Curve:
    """Precision-recall curve for detecting misclassifications.

    The area is the step-wise (right-continuous) sum
    ``sum_k (R_k - R_{k-1}) * P_k``, i.e. average precision; precision is held
    constant between achieved recall levels rather than linearly
    interpolated.  The leading ``(0, 1)`` point is cosmetic and does not enter
    the area.
    """
    thr, tp, fp = _ascending(eval_set)
    pos = int(tp[-1])
    if pos == 0:
        raise DegenerateClasses("PR needs at least one wrong prediction")
    recall = tp / pos
    precision = tp / (tp + fp)
    area = float(np.sum(np.diff(np.concatenate([[0.0], recall])) * precision))
    return Curve(CurveKind.PR,
                 np.concatenate([[0.0], recall]),
                 np.concatenate([[1.0], precision]),
                 area, np.concatenate([[np.nan], thr]))


def rc_curve(eval_set: EvaluationSet) -> Curve:
    """Risk-coverage curve.

    Records are covered in descending confidence, one tie group at a time.
    Each group boundary emits ``(k / N, mean loss of the k covered records)``.
    The area is the trapezoid over these points plus a constant extension
    of the first point down to coverage 0, where risk is otherwise undefined.
    """
    n = len(eval_set)
    order = np.argsort(-eval_set.confidence, kind="stable")
    r = eval_set.confidence[order]
    cum = np.cumsum(eval_set.losses[order])
    ends = _tie_groups(r)
    k = (ends + 1).astype(np.float64)
    x = k / n
    y = cum[ends] / k
    area = float(x[0] * y[0] + np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)
    return Curve(CurveKind.RC, x, y, area, r[ends])


def auroc(eval_set: EvaluationSet) -> float:
    return roc_curve(eval_set).area


def aupr(eval_set: EvaluationSet) -> float:
    return pr_curve(eval_set).area


def aurc(eval_set: EvaluationSet) -> float:
    """Area under the risk-coverage curve; lower is better."""
    return rc_curve(eval_set).area


def _limits(xs, ys, q):
    """Left and right limits of a monotone-x polyline at query points."""
    lo = np.searchsorted(xs, q, side="left")
    hi = np.searchsorted(xs, q, side="right")
    left = np.empty_like(q)
    right = np.empty_like(q)
    for j, (a, b) in enumerate(zip(lo, hi)):
        if a < b:
            left[j], right[j] = ys[a], ys[b - 1]
        elif a == 0 or a == len(xs):
            left[j] = right[j] = ys[min(a, len(xs) - 1)]
        else:
            x0, x1, y0, y1 = xs[a - 1], xs[a], ys[a - 1], ys[a]
            left[j] = right[j] = y0 + (y1 - y0) * (q[j] - x0) / (x1 - x0)
    return left, right


def _covered_loss(curve):
    # Cumulative mean loss (risk * coverage) is what varies linearly when a
    # tie group is covered part way; risk itself does not.
    return (np.concatenate([[0.0], curve.x]),
            np.concatenate([[0.0], curve.x * curve.y]))


def dominates(curve_a: Curve, curve_b: Curve, atol: float = 1e-12) -> Dominance:
    """Pointwise dominance between two curves of the same kind.

    Both curves are compared at the union of their breakpoints, using left
    and right limits so vertical segments count.  Higher is better for ROC
    and PR, lower for RC.  RC curves are compared through ``coverage *
    risk`` interpolated linearly between points, the curve traced by
    covering a tie group in random order; at equal coverage this orders
    the same way as risk.
    """
    if curve_a.kind != curve_b.kind:
        raise KindMismatch(f"cannot compare {curve_a.kind.value} with {curve_b.kind.value}")
    if curve_a.kind is CurveKind.RC:
        (xa, ya), (xb, yb) = _covered_loss(curve_a), _covered_loss(curve_b)
        sign = -1.0
    else:
        xa, ya, xb, yb = curve_a.x, curve_a.y, curve_b.x, curve_b.y
        sign = 1.0
    q = np.union1d(xa, xb)
    la, ra = _limits(xa, ya, q)
    lb, rb = _limits(xb, yb, q)
    diff = sign * np.concatenate([la - lb, ra - rb])
    if np.all(np.abs(diff) <= atol):
        return Dominance.EQUAL
    if np.all(diff >= -atol):
        return Dominance.A_DOMINATES
    if np.all(diff <= atol):
        return Dominance.B_DOMINATES
    return Dominance.INCOMPARABLE


def perturb_m(eval_set: EvaluationSet, m: int) -> EvaluationSet:
    """Flip the ``m`` least confident correct predictions to wrong.

    Confidences are untouched.  Ties among the lowest confident correct
    predictions are broken by input order.  Flipped records fall back to the
    0/1 loss.  For ``m > 0`` logits are dropped from the result because they
    no longer agree with the correctness flags.
    """
    m = int(m)
    correct_idx = np.flatnonzero(eval_set.correct == 1)
    if m < 0 or m > correct_idx.size:
        raise MTooLarge(f"m={m} but the set has {correct_idx.size} correct predictions")
    if m == 0:
        return eval_set
    order = np.argsort(eval_set.confidence[correct_idx], kind="stable")
    flip = correct_idx[order[:m]]
    c = eval_set.correct.copy()
    c[flip] = 0
    loss = None
    if eval_set.loss is not None:
        loss = eval_set.loss.copy()
        loss[flip] = np.nan
    return EvaluationSet.from_arrays(eval_set.confidence, c, loss=loss, name=eval_set.name)


def _softmax_probs(eval_set):
    if not eval_set.has_logits:
        raise MissingLogits("records carry no logits")
    return np.exp(log_softmax(eval_set.logits, axis=1))


def brier(eval_set: EvaluationSet, mode: str = "binary") -> float:
    """Brier score, a supplementary metric.

    ``mode="binary"`` scores confidence against correctness; ``"multiclass"``
    scores the full softmax vector against the one-hot label and needs
    logits; ``"auto"`` uses logits when present.
    """
    if mode == "auto":
        mode = "multiclass" if eval_set.has_logits else "binary"
    if mode == "binary":
        return float(np.mean((eval_set.confidence - eval_set.correct) ** 2))
    if mode != "multiclass":
        raise ValueError(f"unknown mode {mode!r}")
    p = _softmax_probs(eval_set)
    p[np.arange(len(eval_set)), eval_set.labels] -= 1.0
    return float(np.mean(np.sum(p ** 2, axis=1)))


def nll(eval_set: EvaluationSet, mode: str = "auto", eps: float = 1e-15) -> float:
    """Negative log likelihood, a supplementary metric.

    With logits (``"multiclass"``) this is the mean cross-entropy of the
    softmax; otherwise (``"binary"``) the Bernoulli log loss of confidence
    against correctness with probabilities clipped to ``[eps, 1 - eps]``.
    """
    if mode == "auto":
        mode = "multiclass" if eval_set.has_logits else "binary"
    if mode == "multiclass":
        if not eval_set.has_logits:
            raise MissingLogits("multiclass NLL requires logits and labels")
        lp = log_softmax(eval_set.logits, axis=1)
        return float(-np.mean(lp[np.arange(len(eval_set)), eval_set.labels]))
    if mode != "binary":
        raise ValueError(f"unknown mode {mode!r}")
    r = np.clip(eval_set.confidence, eps, 1.0 - eps)
    c = eval_set.correct
    return float(-np.mean(np.where(c == 1, np.log(r), np.log1p(-r))))


@dataclass(frozen=True)
class SelectiveReport:
    """Selective prediction metrics; a field is None when undefined."""

    auroc: Optional[float]
    aupr: Optional[float]
    aurc: float
    full_coverage_risk: float
    roc: Optional[Curve] = field(default=None, repr=False)
    pr: Optional[Curve] = field(default=None, repr=False)
    rc: Optional[Curve] = field(default=None, repr=False)
    errors: dict = field(default_factory=dict)


def selective_report(eval_set: EvaluationSet) -> SelectiveReport:
    errors = {}
    roc = pr = None
    try:
        roc = roc_curve(eval_set)
    except DegenerateClasses as exc:
        errors["auroc"] = str(exc)
    try:
        pr = pr_curve(eval_set)
    except DegenerateClasses as exc:
        errors["aupr"] = str(exc)
    rc = rc_curve(eval_set)
    return SelectiveReport(
        auroc=None if roc is None else roc.area,
        aupr=None if pr is None else pr.area,
        aurc=rc.area,
        full_coverage_risk=float(np.mean(eval_set.losses)),
        roc=roc, pr=pr, rc=rc, errors=errors)


def is_perfect(eval_set: EvaluationSet) -> bool:
    """True iff the confidence is perfect for both selective prediction and
    calibration, which happens only when every score is 0 or 1 and equals
    the correctness flag."""
    r = eval_set.confidence
    return bool(np.all((r == 0.0) | (r == 1.0)) and np.all(r == eval_set.correct))
