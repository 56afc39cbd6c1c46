"""Seeded synthetic prediction sets with known ground truth.

Every generator is a pure function of its arguments.  Randomness comes from
numpy's PCG64 bit generator seeded with the given unsigned 64-bit integer,
whose output stream is fixed across platforms; generator version
``GENERATOR_VERSION`` names the exact sampling recipe below, so a change to
any recipe must bump it.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_softmax

from .core import EvaluationSet
from .exceptions import BadLevel, BadParams, BadShape, NTooSmall

__all__ = [
    "GENERATOR_VERSION",
    "make_rng",
    "gen_calibrated",
    "gen_undetectable_error",
    "gen_discrete",
    "gen_logits",
    "gen_scored_model",
    "generate",
    "STRATUM_ACCURACY",
]

GENERATOR_VERSION = "pcg64-v1"

# accuracy of the six 0.01-wide slices covering [0.90, 0.96)
STRATUM_ACCURACY = (0.50, 0.55, 0.60, 0.64, 0.68, 0.73)


def make_rng(seed: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise BadParams(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def _count(n):
    if int(n) != n or n < 1:
        raise BadParams(f"sample count must be a positive integer, got {n!r}")
    return int(n)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _exact_hits(rng, n, acc):
    """A 0/1 vector of length n with exactly round(n * acc) ones."""
    c = np.zeros(n, dtype=np.int8)
    c[:_round_half_up(n * acc)] = 1
    return rng.permutation(c)


def gen_calibrated(n: int, shape: Tuple[float, float] = (1.0, 1.0), seed: int = 0,
                   name: str = "calibrated") -> EvaluationSet:
    """Confidences from Beta(a, b) and correctness ~ Bernoulli(confidence).

    ``E[c | r] = r`` by construction, so the true calibration error is 0.
    ``shape=(1, 1)`` is the uniform distribution.
    """
    n = _count(n)
    a, b = shape
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise BadShape(f"beta shape parameters must be positive, got {shape!r}")
    rng = make_rng(seed)
    r = rng.beta(a, b, size=n)
    c = (rng.random(n) < r).astype(np.int8)
    return EvaluationSet.from_arrays(r, c, name=name)


def gen_undetectable_error(n: int = 100_000, seed: int = 0,
                           name: str = "undetectable-error") -> EvaluationSet:
    """A calibration defect hidden inside a wide, well-calibrated bin.

    97% of the samples sit on [0.98, 1.0] and are calibrated.  2% form a
    thin stratum on [0.90, 0.96] whose accuracy climbs from 50% on
    [0.90, 0.91) to 73% on [0.95, 0.96) (exact per slice after rounding).
    The remaining 1% spread calibrated over [0, 0.9).  A ten-bin
    equal-range partition sees a small gap on [0.9, 1.0] because the
    calibrated mass swamps the stratum.
    """
    n = _count(n)
    if n < 10_000:
        raise NTooSmall(f"need at least 10000 samples for a usable stratum, got {n}")
    rng = make_rng(seed)
    n_top = _round_half_up(0.97 * n)
    n_strat = _round_half_up(0.02 * n)
    n_rest = n - n_top - n_strat

    r_top = rng.uniform(0.98, 1.0, size=n_top)
    c_top = (rng.random(n_top) < r_top).astype(np.int8)

    k = len(STRATUM_ACCURACY)
    sizes = np.full(k, n_strat // k)
    sizes[: n_strat % k] += 1
    r_s, c_s = [], []
    for j, (size, acc) in enumerate(zip(sizes.tolist(), STRATUM_ACCURACY)):
        lo = 0.90 + 0.01 * j
        r_s.append(rng.uniform(lo, lo + 0.01, size=size))
        c_s.append(_exact_hits(rng, size, acc))

    r_rest = rng.uniform(0.0, 0.9, size=n_rest)
    c_rest = (rng.random(n_rest) < r_rest).astype(np.int8)

    r = np.concatenate([r_top, *r_s, r_rest])
    c = np.concatenate([c_top, *c_s, c_rest])
    order = rng.permutation(n)
    return EvaluationSet.from_arrays(r[order], c[order], name=name)


def gen_discrete(levels: Iterable[Sequence], seed: int = 0,
                 name: str = "discrete") -> EvaluationSet:
    """Samples concentrated on a few confidence values.

    Each level ``(r_k, accuracy_k, count_k)`` contributes ``count_k`` samples
    at confidence ``r_k`` of which exactly ``floor(count_k * accuracy_k +
    0.5)`` are correct.  The seed only shuffles record order.
    """
    levels = [tuple(lv) for lv in levels]
    if not levels:
        raise BadLevel("at least one level is required")
    seen = set()
    r_parts, c_parts = [], []
    rng = make_rng(seed)
    for lv in levels:
        if len(lv) != 3:
            raise BadLevel(f"level must be (confidence, accuracy, count), got {lv!r}")
        r_k, acc, cnt = lv
        if not 0.0 <= r_k <= 1.0 or not 0.0 <= acc <= 1.0:
            raise BadLevel(f"confidence and accuracy must lie in [0, 1]: {lv!r}")
        if int(cnt) != cnt or cnt < 1:
            raise BadLevel(f"count must be a positive integer: {lv!r}")
        if r_k in seen:
            raise BadLevel(f"duplicate confidence level {r_k!r}")
        seen.add(r_k)
        cnt = int(cnt)
        r_parts.append(np.full(cnt, float(r_k)))
        c_parts.append(_exact_hits(rng, cnt, acc))
    r = np.concatenate(r_parts)
    c = np.concatenate(c_parts)
    order = rng.permutation(r.size)
    return EvaluationSet.from_arrays(r[order], c[order], name=name)


def gen_logits(n: int, k: int = 10, true_temperature: float = 1.0, seed: int = 0,
               logit_scale: float = 3.0, name: str = "logits") -> EvaluationSet:
    """Logits whose calibrating temperature is ``true_temperature``.

    Calibrated logits ``z ~ N(0, logit_scale^2)`` define the class
    posterior ``softmax(z)``; the label is drawn from it and the emitted
    logits are ``true_temperature * z``.  Dividing the emitted logits by
    ``true_temperature`` therefore recovers the calibrated posterior.
    Confidence is the max softmax of the emitted logits.
    """
    n = _count(n)
    if int(k) != k or k < 2:
        raise BadParams(f"need at least two classes, got {k!r}")
    if not (true_temperature > 0 and math.isfinite(true_temperature)):
        raise BadParams(f"true_temperature must be positive, got {true_temperature!r}")
    if not logit_scale > 0:
        raise BadParams("logit_scale must be positive")
    k = int(k)
    rng = make_rng(seed)
    z = rng.normal(0.0, logit_scale, size=(n, k))
    p = np.exp(log_softmax(z, axis=1))
    u = rng.random(n)
    labels = np.minimum((np.cumsum(p, axis=1) < u[:, None]).sum(axis=1), k - 1)
    emitted = true_temperature * z
    conf = np.exp(log_softmax(emitted, axis=1)).max(axis=1)
    correct = (np.argmax(emitted, axis=1) == labels).astype(np.int8)
    return EvaluationSet.from_arrays(np.clip(conf, 0.0, 1.0), correct,
                                     logits=emitted, labels=labels, name=name)


def gen_scored_model(n: int, accuracy: float, separability: float = 2.0, seed: int = 0,
                     name: str = "model") -> EvaluationSet:
    """A stand-in for a trained classifier's (confidence, correctness) dump.

    Exactly ``floor(n * accuracy + 0.5)`` predictions are correct.  Latent
    scores are N(separability, 1) for correct and N(0, 1) for wrong
    predictions, mapped to confidence by ``sigmoid(score + 2)``; the expected
    AUROC is ``Phi(separability / sqrt(2))``.  ``separability=inf`` puts
    correct predictions on (0.5, 1] and wrong ones on [0, 0.5).
    """
    n = _count(n)
    if not 0.0 < accuracy < 1.0:
        raise BadParams(f"accuracy must lie in (0, 1), got {accuracy!r}")
    if not separability >= 0:
        raise BadParams(f"separability must be non-negative, got {separability!r}")
    rng = make_rng(seed)
    n_ok = _round_half_up(n * accuracy)
    n_bad = n - n_ok
    if math.isinf(separability):
        r_ok = 0.5 + 0.5 * (1.0 - rng.random(n_ok))
        r_bad = 0.5 * rng.random(n_bad)
    else:
        r_ok = expit(rng.normal(separability, 1.0, size=n_ok) + 2.0)
        r_bad = expit(rng.normal(0.0, 1.0, size=n_bad) + 2.0)
    r = np.concatenate([r_ok, r_bad])
    c = np.concatenate([np.ones(n_ok, np.int8), np.zeros(n_bad, np.int8)])
    order = rng.permutation(n)
    return EvaluationSet.from_arrays(r[order], c[order], name=name)


_KINDS = {
    "calibrated": gen_calibrated,
    "undetectable": gen_undetectable_error,
    "discrete": gen_discrete,
    "logits": gen_logits,
    "scored": gen_scored_model,
}


def generate(kind: str, **params) -> EvaluationSet:
    """Dispatch to a generator by short name (used by the CLI)."""
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise BadParams(f"unknown generator kind {kind!r}; choose from {sorted(_KINDS)}") from None
    return fn(**params)
