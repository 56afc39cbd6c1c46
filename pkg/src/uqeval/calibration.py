"""Binned calibration error: equal-range, equal-size and adaptive binning.

The binning strategies are scikit-learn style estimators.  ``fit`` partitions
a set of (confidence, correctness) pairs and stores the bins together with the
resulting ECE and MCE; ``transform`` maps new confidences to bin positions.

>>> from uqeval.calibration import AdaptiveBinning
>>> est = AdaptiveBinning(alpha=0.2).fit(confidence, correct)   # doctest: +SKIP
>>> est.ece_, est.mce_, len(est.bins_)                          # doctest: +SKIP
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist
from typing import List, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_consistent_length

from .core import EvaluationSet
from .exceptions import EmptySet, OutOfRange, TooManyBins

__all__ = [
    "Bin",
    "CalibrationReport",
    "EqualRangeBinning",
    "EqualSizeBinning",
    "AdaptiveBinning",
    "parse_scheme",
    "bin_partition",
    "bins_from_assignment",
    "ece",
    "mce",
    "true_ece_discrete",
    "z_score",
    "adaptive_bins",
    "adaptive_sample_size",
    "audit_adaptive_bins",
    "reliability_data",
    "calibration_report",
]


@dataclass(frozen=True)
class Bin:
    """Summary of the samples that fall into one confidence interval.

    ``gap`` is ``mean_confidence - empirical_accuracy``; positive means
    over-confident.  ``index`` is the interval number for equal-range bins
    (empty intervals are skipped, so it need not be contiguous) and the
    position in the partition otherwise.
    """

    lo: float
    hi: float
    count: int
    mean_confidence: float
    empirical_accuracy: float
    gap: float
    index: int = 0
    confidence_sum: float = field(default=0.0, repr=False)
    correct_sum: int = field(default=0, repr=False)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _xy(X, y):
    """Accept an EvaluationSet or a pair of 1-D arrays."""
    if isinstance(X, EvaluationSet):
        return X.confidence, X.correct
    if y is None:
        raise ValueError("correctness labels are required when X is not an EvaluationSet")
    r = np.asarray(X, dtype=np.float64).reshape(-1)
    c = np.asarray(y).reshape(-1)
    check_consistent_length(r, c)
    if r.size == 0:
        raise EmptySet("cannot bin an empty set")
    if not np.all((r >= 0) & (r <= 1)):
        raise OutOfRange("confidence values must lie in [0, 1]")
    if not np.all((c == 0) | (c == 1)):
        raise OutOfRange("correctness values must be 0 or 1")
    return r, c.astype(np.int8)


def bins_from_assignment(confidence, correct, assignment, bounds=None) -> List[Bin]:
    """Summarise samples grouped by an integer ``assignment`` per sample.

    Bins are returned in ascending label order; labels without samples are
    dropped.  ``bounds`` maps a label to a fixed ``(lo, hi)``; without it the
    member min and max confidences are used.
    """
    r = np.asarray(confidence, dtype=np.float64)
    c = np.asarray(correct, dtype=np.int64)
    a = np.asarray(assignment)
    order = np.argsort(a, kind="stable")
    a, r, c = a[order], r[order], c[order]
    starts = np.flatnonzero(np.concatenate([[True], a[1:] != a[:-1]]))
    counts = np.diff(np.append(starts, a.size))
    sum_r = np.add.reduceat(r, starts)
    sum_c = np.add.reduceat(c, starts)
    min_r = np.minimum.reduceat(r, starts)
    max_r = np.maximum.reduceat(r, starts)
    out = []
    for j, label in enumerate(a[starts].tolist()):
        n, s_r, s_c = int(counts[j]), float(sum_r[j]), int(sum_c[j])
        lo, hi = (float(min_r[j]), float(max_r[j])) if bounds is None else bounds[label]
        mean_r = s_r / n
        acc = s_c / n
        out.append(Bin(lo, hi, n, mean_r, acc, mean_r - acc, label, s_r, s_c))
    return out


class _Binning(BaseEstimator):
    """Shared fit/transform machinery; subclasses implement ``_assign``."""

    def fit(self, X, y=None):
        """Partition the samples.

        Parameters
        ----------
        X : EvaluationSet or array-like of shape (n_samples,)
            Confidence scores.
        y : array-like of shape (n_samples,), optional
            Correctness flags; ignored when ``X`` is an EvaluationSet.
        """
        self._check_params()
        r, c = _xy(X, y)
        labels, bounds = self._assign(r)
        self.bins_ = bins_from_assignment(r, c, labels, bounds)
        self.assignment_ = np.searchsorted([b.index for b in self.bins_], labels)
        self.n_samples_ = int(r.size)
        self.ece_ = ece(self.bins_, self.n_samples_)
        self.mce_ = mce(self.bins_)
        self.n_bins_used_ = len(self.bins_)
        return self

    def transform(self, X):
        """Position in ``bins_`` of each confidence (-1 if no bin covers it)."""
        if not hasattr(self, "bins_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        r = X.confidence if isinstance(X, EvaluationSet) else np.asarray(X, dtype=np.float64)
        his = np.array([b.hi for b in self.bins_])
        pos = np.searchsorted(his, r, side="left")
        return np.minimum(pos, len(self.bins_) - 1)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).assignment_

    def score(self, X, y=None):
        """Negative ECE of ``X`` under the fitted bin boundaries (larger is
        better, as scikit-learn expects)."""
        r, c = _xy(X, y)
        pos = self.transform(r)
        keep = pos >= 0
        return -ece(bins_from_assignment(r[keep], c[keep], pos[keep]), r.size)

    def _check_params(self):
        pass

    def __str__(self):
        return self.name


class EqualRangeBinning(_Binning):
    """``n_bins`` intervals of equal width over [0, 1].

    The first interval is closed, ``[0, 1/n]``; the others are ``((j-1)/n,
    j/n]``.  Empty intervals are omitted from ``bins_``.
    """

    def __init__(self, n_bins=10):
        self.n_bins = n_bins

    @property
    def name(self):
        return f"equal-range:{self.n_bins}"

    def _check_params(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError(f"n_bins must be a positive integer, got {self.n_bins!r}")

    def _edges(self):
        n = int(self.n_bins)
        return np.arange(n + 1, dtype=np.float64) / n

    def _assign(self, r):
        edges = self._edges()
        # edges[j] = j / n exactly rounded, so membership is decided against
        # the same numbers the bounds report.
        labels = np.searchsorted(edges[1:-1], r, side="left")
        bounds = {j: (float(edges[j]), float(edges[j + 1])) for j in range(int(self.n_bins))}
        return labels, bounds

    def transform(self, X):
        if not hasattr(self, "bins_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        r = X.confidence if isinstance(X, EvaluationSet) else np.asarray(X, dtype=np.float64)
        labels = np.searchsorted(self._edges()[1:-1], r, side="left")
        lookup = np.full(int(self.n_bins), -1, dtype=np.int64)
        for i, b in enumerate(self.bins_):
            lookup[b.index] = i
        return lookup[labels]


class EqualSizeBinning(_Binning):
    """``n_bins`` groups of (nearly) equal count.

    Samples are sorted by confidence (stable) and cut into contiguous groups
    of ``N // n_bins``, the first ``N % n_bins`` groups taking one extra
    sample.  Tied confidences may be split across neighbouring bins.
    """

    def __init__(self, n_bins=10):
        self.n_bins = n_bins

    @property
    def name(self):
        return f"equal-size:{self.n_bins}"

    def _check_params(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError(f"n_bins must be a positive integer, got {self.n_bins!r}")

    def _assign(self, r):
        n, k = r.size, int(self.n_bins)
        if k > n:
            raise TooManyBins(f"{k} equal-size bins requested for {n} samples")
        q, extra = divmod(n, k)
        sizes = np.full(k, q)
        sizes[:extra] += 1
        order = np.argsort(r, kind="stable")
        labels = np.empty(n, dtype=np.int64)
        labels[order] = np.repeat(np.arange(k), sizes)
        return labels, None


def z_score(alpha: float) -> float:
    """Two-sided standard-normal critical value ``Z_{alpha/2}``.

    Returns the ``1 - alpha/2`` quantile; ``z_score(0.05)`` is about 1.96.
    """
    if not 0.0 < alpha < 1.0:
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha!r}")
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def adaptive_sample_size(width: float, alpha: float = 0.2) -> float:
    """Samples needed to estimate a bin's accuracy to within ``width`` at
    confidence level ``1 - alpha``: ``0.25 * (z / width) ** 2``."""
    return 0.25 * (z_score(alpha) / width) ** 2


class AdaptiveBinning(_Binning):
    """Bins whose sample count is matched to their width.

    A bin holding ``n`` samples over a confidence range of width ``eps`` is
    closed once ``n >= 0.25 * (Z_{alpha/2} / eps) ** 2``, so dense regions
    get narrow bins and sparse regions get wide ones.

    The scan runs once over the samples in descending confidence (stable
    order).  ``eps`` is the current bin's max minus min confidence, floored
    at ``min_width`` so that point masses can still close.  Samples left
    over when the scan ends join the last closed bin, or form the only bin
    if none closed.

    Parameters
    ----------
    alpha : float, default=0.2
        One minus the confidence level of the accuracy estimate (0.2 is an
        80% interval).
    min_width : float, default=1e-3
    """

    def __init__(self, alpha=0.2, min_width=1e-3):
        self.alpha = alpha
        self.min_width = min_width

    @property
    def name(self):
        return f"adaptive:{self.alpha}"

    def _check_params(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.min_width > 0:
            raise ValueError("min_width must be positive")

    def _assign(self, r):
        z = z_score(self.alpha)
        need = 0.25 * z * z
        floor = float(self.min_width)
        order = np.argsort(-r, kind="stable")
        rs = r[order].tolist()
        cuts = []               # exclusive end index of every closed bin
        start = 0
        for i, v in enumerate(rs):
            eps = max(rs[start] - v, floor)
            if (i - start + 1) * eps * eps >= need:
                cuts.append(i + 1)
                start = i + 1
        if not cuts:
            cuts = [len(rs)]
        else:
            cuts[-1] = len(rs)
        desc_labels = np.repeat(np.arange(len(cuts)), np.diff(np.concatenate([[0], cuts])))
        labels = np.empty(r.size, dtype=np.int64)
        # highest-confidence bin gets the largest label so bins_ ascends
        labels[order] = len(cuts) - 1 - desc_labels
        self.n_closed_ = len(cuts)
        return labels, None


def parse_scheme(spec: Union[str, _Binning]) -> _Binning:
    """Build a binning estimator from ``"equal-range:10"``, ``"equal-size:15"``
    or ``"adaptive:0.2"``.  A bare name uses the default parameter."""
    if isinstance(spec, _Binning):
        return spec
    name, _, arg = str(spec).strip().partition(":")
    name = name.lower().replace("_", "-")
    try:
        if name in ("equal-range", "er"):
            return EqualRangeBinning(int(arg) if arg else 10)
        if name in ("equal-size", "es"):
            return EqualSizeBinning(int(arg) if arg else 10)
        if name in ("adaptive", "ad"):
            return AdaptiveBinning(float(arg) if arg else 0.2)
    except ValueError:
        raise ValueError(f"bad parameter in binning scheme {spec!r}") from None
    raise ValueError(f"unknown binning scheme {spec!r}")


def bin_partition(eval_set: EvaluationSet, scheme="equal-range:10") -> List[Bin]:
    return parse_scheme(scheme).fit(eval_set).bins_


def adaptive_bins(eval_set: EvaluationSet, alpha: float = 0.2) -> List[Bin]:
    return AdaptiveBinning(alpha=alpha).fit(eval_set).bins_


def ece(bins: Sequence[Bin], total: Optional[int] = None) -> float:
    """Binned expected calibration error.

    ``(1 / total) * sum_j |sum of correctness - sum of confidence in bin j|``.
    Signed gaps never cancel across bins.
    """
    if total is None:
        total = sum(b.count for b in bins)
    if total <= 0:
        raise EmptySet("ECE of an empty partition is undefined")
    return float(sum(abs(b.correct_sum - b.confidence_sum) for b in bins) / total)


def mce(bins: Sequence[Bin]) -> float:
    """Largest absolute gap over the non-empty bins."""
    if not bins:
        raise EmptySet("MCE of an empty partition is undefined")
    return float(max(abs(b.gap) for b in bins))


def true_ece_discrete(eval_set: EvaluationSet) -> float:
    """Calibration error with one bin per distinct confidence value.

    For a set whose scores take few distinct values with many samples each,
    this is the ground truth that any coarser binning can only underestimate.
    """
    r = eval_set.confidence
    values, inverse = np.unique(r, return_inverse=True)
    counts = np.bincount(inverse)
    hits = np.bincount(inverse, weights=eval_set.correct.astype(np.float64))
    return float(np.sum(np.abs(hits - counts * values)) / r.size)


def audit_adaptive_bins(bins: Sequence[Bin], alpha: float = 0.2,
                        min_width: float = 1e-3, include_last: bool = False):
    """Bins that fail the adaptive closing condition.

    The final bin (highest-confidence-first scan, so the lowest-confidence
    bin in ascending order) absorbs leftovers and is skipped unless
    ``include_last`` is set.
    """
    need = 0.25 * z_score(alpha) ** 2
    checked = list(bins) if include_last else list(bins)[1:]
    return [b for b in checked if b.count * max(b.width, min_width) ** 2 < need]


def reliability_data(bins: Sequence[Bin]) -> List[dict]:
    """Rows for a reliability diagram, one per non-empty bin.

    Each row has the bin bounds, count, mean confidence, empirical accuracy,
    gap (positive = over-confident) and ``density``, the share of all
    samples that fall into the bin.
    """
    if not bins:
        raise EmptySet("no bins to tabulate")
    total = sum(b.count for b in bins)
    return [dict(lo=b.lo, hi=b.hi, count=b.count,
                 mean_confidence=b.mean_confidence,
                 empirical_accuracy=b.empirical_accuracy,
                 gap=b.gap, density=b.count / total) for b in bins]


@dataclass(frozen=True)
class CalibrationReport:
    scheme: str
    bins: List[Bin] = field(repr=False)
    ece: float
    mce: float
    n_bins_used: int


def calibration_report(eval_set: EvaluationSet, scheme="equal-range:10") -> CalibrationReport:
    est = parse_scheme(scheme).fit(eval_set)
    return CalibrationReport(est.name, est.bins_, est.ece_, est.mce_, est.n_bins_used_)
