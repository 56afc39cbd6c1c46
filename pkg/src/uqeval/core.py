"""Validated data model consumed by every metric.

A prediction is reduced to a confidence score ``r`` in [0, 1], a correctness
flag ``c`` in {0, 1}, an optional per-item loss and, when temperature scaling is
needed, the raw logits together with the true label.  Records keep their input
order; the position inside a set is the record identity and the tie-breaker for
every downstream sort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import EmptySet, InconsistentLogits, OutOfRange

__all__ = [
    "PredictionRecord",
    "EvaluationSet",
    "validate",
    "accuracy",
]


@dataclass(frozen=True)
class PredictionRecord:
    """One sample's confidence, correctness and optional extras."""

    confidence: float
    correctness: int
    loss: Optional[float] = None
    logits: Optional[tuple] = None
    label: Optional[int] = None

    @property
    def effective_loss(self) -> float:
        return float(1 - self.correctness) if self.loss is None else float(self.loss)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EvaluationSet:
    """Ordered, validated collection of prediction records.

    Stored column-wise.  Use :func:`validate` or :meth:`from_arrays` to build
    one; both check every invariant.  Instances are immutable (the arrays are
    read-only), so they can be shared between threads freely.

    Attributes
    ----------
    confidence : ndarray of float64, shape (n,)
    correct : ndarray of int8, shape (n,)
    loss : ndarray of float64 or None
        Explicit per-item losses; NaN marks records that use the default
        0/1 loss.  ``None`` when no record carries an explicit loss.
    logits : ndarray of float64, shape (n, K), or None
    labels : ndarray of int64 or None
    name : str
    """

    confidence: np.ndarray
    correct: np.ndarray
    loss: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    name: str = ""
    _losses: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = self.correct
        default = 1.0 - c.astype(np.float64)
        if self.loss is None:
            losses = default
        else:
            losses = np.where(np.isnan(self.loss), default, self.loss)
        object.__setattr__(self, "_losses", _frozen(losses))

    @classmethod
    def from_arrays(cls, confidence, correct, loss=None, logits=None, labels=None,
                    name="", allow_empty=False) -> "EvaluationSet":
        """Validate column arrays and wrap them in an :class:`EvaluationSet`.

        Raises
        ------
        EmptySet
            No records and ``allow_empty`` is false.
        OutOfRange
            A confidence, correctness or loss value is outside its domain.
        InconsistentLogits
            Logits without labels (or vice versa), a label outside ``[0, K)``,
            or an argmax that disagrees with the correctness flag.
        """
        r = np.asarray(confidence, dtype=np.float64).reshape(-1)
        c_raw = np.asarray(correct).reshape(-1)
        n = r.shape[0]
        if n == 0 and not allow_empty:
            raise EmptySet("evaluation set has no records")
        if c_raw.shape[0] != n:
            raise OutOfRange(f"correctness has {c_raw.shape[0]} entries, expected {n}")
        bad = ~((r >= 0.0) & (r <= 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise OutOfRange(f"record {i}: confidence {r[i]!r} outside [0, 1]")
        c_num = c_raw.astype(np.float64)
        bad = (c_num != 0.0) & (c_num != 1.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise OutOfRange(f"record {i}: correctness {c_raw[i]!r} not in {{0, 1}}")
        c = c_num.astype(np.int8)

        l_arr = None
        if loss is not None:
            l_arr = np.array([np.nan if v is None else v for v in loss], dtype=np.float64) \
                if not isinstance(loss, np.ndarray) else loss.astype(np.float64).reshape(-1)
            if l_arr.shape[0] != n:
                raise OutOfRange(f"loss has {l_arr.shape[0]} entries, expected {n}")
            given = ~np.isnan(l_arr)
            bad = given & ~((l_arr >= 0.0) & (l_arr <= 1.0))
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise OutOfRange(f"record {i}: loss {l_arr[i]!r} outside [0, 1]")
            if not given.any():
                l_arr = None

        z = y = None
        if logits is not None or labels is not None:
            if logits is None or labels is None:
                raise InconsistentLogits("logits and labels must be given together")
            z = np.asarray(logits, dtype=np.float64)
            if z.ndim != 2 or z.shape[0] != n or z.shape[1] < 2:
                raise InconsistentLogits(f"logits must have shape (n, K>=2), got {z.shape}")
            y_raw = np.asarray(labels).reshape(-1)
            if y_raw.shape[0] != n:
                raise InconsistentLogits("one label per record is required")
            y = y_raw.astype(np.int64)
            if np.any(y != y_raw) or np.any(y < 0) or np.any(y >= z.shape[1]):
                raise InconsistentLogits(f"labels must be integers in [0, {z.shape[1]})")
            if not np.isfinite(z).all():
                raise InconsistentLogits("logits must be finite")
            hit = (np.argmax(z, axis=1) == y).astype(np.int8)
            bad = hit != c
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise InconsistentLogits(
                    f"record {i}: argmax(logits)={int(np.argmax(z[i]))}, label={int(y[i])} "
                    f"but correctness={int(c[i])}")
            z, y = _frozen(z), _frozen(y)

        return cls(confidence=_frozen(r), correct=_frozen(c),
                   loss=None if l_arr is None else _frozen(l_arr),
                   logits=z, labels=y, name=str(name))

    def __len__(self):
        return int(self.confidence.shape[0])

    @property
    def losses(self) -> np.ndarray:
        """Per-item loss with the 0/1 default filled in."""
        return self._losses

    @property
    def has_logits(self) -> bool:
        return self.logits is not None

    @property
    def records(self) -> tuple:
        out = []
        for i in range(len(self)):
            loss = None
            if self.loss is not None and not np.isnan(self.loss[i]):
                loss = float(self.loss[i])
            logits = label = None
            if self.logits is not None:
                logits = tuple(float(v) for v in self.logits[i])
                label = int(self.labels[i])
            out.append(PredictionRecord(float(self.confidence[i]), int(self.correct[i]),
                                        loss, logits, label))
        return tuple(out)

    def accuracy(self) -> float:
        return accuracy(self)

    def replace(self, **changes) -> "EvaluationSet":
        """Return a re-validated copy with some columns swapped out."""
        cols = dict(confidence=self.confidence, correct=self.correct, loss=self.loss,
                    logits=self.logits, labels=self.labels, name=self.name)
        cols.update(changes)
        return EvaluationSet.from_arrays(**cols)

    def subset(self, index) -> "EvaluationSet":
        """Rows selected by ``index`` (integer array, slice or boolean mask)."""
        take = lambda a: None if a is None else a[index]
        return EvaluationSet.from_arrays(self.confidence[index], self.correct[index],
                                         take(self.loss), take(self.logits),
                                         take(self.labels), name=self.name)

    def __eq__(self, other):
        if not isinstance(other, EvaluationSet):
            return NotImplemented
        return (self.name == other.name
                and _same(self.confidence, other.confidence)
                and _same(self.correct, other.correct)
                and _same(self.loss, other.loss)
                and _same(self.logits, other.logits)
                and _same(self.labels, other.labels))

    __hash__ = None


def _same(a, b):
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and np.array_equal(a, b, equal_nan=a.dtype.kind == "f")


def _coerce(rec) -> PredictionRecord:
    if isinstance(rec, PredictionRecord):
        return rec
    if isinstance(rec, dict):
        return PredictionRecord(**rec)
    return PredictionRecord(*rec)


def validate(records: Iterable, name: str = "") -> EvaluationSet:
    """Check a sequence of records and return an :class:`EvaluationSet`.

    Each item may be a :class:`PredictionRecord`, a ``(confidence,
    correctness[, loss])`` tuple or a dict of record fields.  Logits must be
    present on all records or on none.
    """
    recs: Sequence[PredictionRecord] = [_coerce(r) for r in records]
    if not recs:
        raise EmptySet("evaluation set has no records")
    with_logits = [r.logits is not None or r.label is not None for r in recs]
    logits = labels = None
    if any(with_logits):
        for i, r in enumerate(recs):
            if r.logits is None or r.label is None:
                raise InconsistentLogits(f"record {i}: logits and label must both be present")
        widths = {len(r.logits) for r in recs}
        if len(widths) != 1:
            raise InconsistentLogits("all records must carry the same number of logits")
        logits = [list(r.logits) for r in recs]
        labels = [r.label for r in recs]
    loss = None
    if any(r.loss is not None for r in recs):
        loss = [r.loss for r in recs]
    return EvaluationSet.from_arrays(
        [r.confidence for r in recs], [r.correctness for r in recs],
        loss=loss, logits=logits, labels=labels, name=name)


def accuracy(eval_set: EvaluationSet) -> float:
    """Mean correctness of a non-empty set."""
    if len(eval_set) == 0:
        raise EmptySet("accuracy of an empty set is undefined")
    return float(np.mean(eval_set.correct, dtype=np.float64))
