"""Temperature scaling as a scikit-learn style calibrator."""

from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_softmax, logsumexp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_consistent_length

from .core import EvaluationSet
from .exceptions import BadParams, MissingLogits

__all__ = ["TemperatureScaling", "fit_temperature", "apply_temperature", "softmax_nll"]


def softmax_nll(logits, labels, temperature=1.0) -> float:
    """Mean cross-entropy of ``softmax(logits / temperature)``."""
    z = np.asarray(logits, dtype=np.float64) / temperature
    return float(np.mean(logsumexp(z, axis=1) - z[np.arange(z.shape[0]), labels]))


def _logits_labels(X, y):
    if isinstance(X, EvaluationSet):
        if not X.has_logits:
            raise MissingLogits("temperature scaling needs logits and labels on every record")
        return X.logits, X.labels
    z = check_array(X, dtype=np.float64)
    if y is None:
        return z, None
    y = np.asarray(y).astype(np.int64).reshape(-1)
    check_consistent_length(z, y)
    return z, y


class TemperatureScaling(BaseEstimator, TransformerMixin):
    """Divide logits by a single scalar ``T > 0`` fitted by minimum NLL.

    The search is a bounded scalar minimisation over ``log T`` in
    ``bounds``.  Dividing by a positive constant never changes the argmax,
    so accuracy is untouched.

    Parameters
    ----------
    bounds : (float, float), default=(1e-2, 1e2)
    xatol : float, default=1e-8
        Absolute tolerance on ``log T``.

    Attributes
    ----------
    temperature_ : float
    nll_ : float
        Mean NLL at the fitted temperature.
    """

    def __init__(self, bounds=(1e-2, 1e2), xatol=1e-8):
        self.bounds = bounds
        self.xatol = xatol

    @classmethod
    def from_temperature(cls, temperature: float) -> "TemperatureScaling":
        if not temperature > 0:
            raise BadParams(f"temperature must be positive, got {temperature!r}")
        est = cls()
        est.temperature_ = float(temperature)
        return est

    def fit(self, X, y=None):
        z, labels = _logits_labels(X, y)
        if labels is None:
            raise MissingLogits("labels are required to fit a temperature")
        lo, hi = self.bounds
        if not 0 < lo < hi:
            raise BadParams(f"invalid temperature bounds {self.bounds!r}")
        idx = np.arange(z.shape[0])

        def objective(log_t):
            s = z * math.exp(-log_t)
            return float(np.mean(logsumexp(s, axis=1) - s[idx, labels]))

        res = minimize_scalar(objective, bounds=(math.log(lo), math.log(hi)),
                              method="bounded", options={"xatol": self.xatol})
        self.temperature_ = float(math.exp(res.x))
        self.nll_ = float(res.fun)
        return self

    def _check_fitted(self):
        if not hasattr(self, "temperature_"):
            raise NotFittedError("TemperatureScaling is not fitted yet")

    def transform(self, X):
        """Calibrated class probabilities, shape (n_samples, n_classes)."""
        self._check_fitted()
        z, _ = _logits_labels(X, None)
        return np.exp(log_softmax(z / self.temperature_, axis=1))

    predict_proba = transform

    def predict(self, X):
        z, _ = _logits_labels(X, None)
        return np.argmax(z, axis=1)

    def confidence(self, X):
        """Maximum calibrated softmax probability per sample."""
        return self.transform(X).max(axis=1)


def fit_temperature(eval_set: EvaluationSet, **kwargs) -> TemperatureScaling:
    return TemperatureScaling(**kwargs).fit(eval_set)


def apply_temperature(eval_set: EvaluationSet,
                      model: Union[TemperatureScaling, float]) -> EvaluationSet:
    """Replace each confidence with the max softmax probability of
    ``logits / T``.  Correctness, labels and the raw logits are kept."""
    if not isinstance(model, TemperatureScaling):
        model = TemperatureScaling.from_temperature(model)
    if not eval_set.has_logits:
        raise MissingLogits("temperature scaling needs logits and labels on every record")
    conf = np.clip(model.confidence(eval_set.logits), 0.0, 1.0)
    return eval_set.replace(confidence=conf)
