"""Brute-force reference implementations used as independent oracles.

These deliberately avoid the sorting/cumulative-sum route of the library:
every threshold is evaluated from scratch with boolean masks.
"""

import itertools
import math

import numpy as np
import mpmath


def auroc_pairs(r, c):
    """Mann-Whitney statistic over all (wrong, correct) pairs, ties 1/2."""
    wrong = [x for x, k in zip(r, c) if k == 0]
    right = [x for x, k in zip(r, c) if k == 1]
    total = 0.0
    for w in wrong:
        for g in right:
            total += 1.0 if w < g else 0.5 if w == g else 0.0
    return total / (len(wrong) * len(right))


def aupr_enum(r, c):
    """Average precision of flagging wrong predictions at every threshold."""
    r = np.asarray(r, dtype=float)
    wrong = np.asarray(c) == 0
    pos = wrong.sum()
    area, prev = 0.0, 0.0
    for t in sorted(set(r.tolist())):
        flagged = r <= t
        tp = np.sum(flagged & wrong)
        recall = tp / pos
        precision = tp / flagged.sum()
        area += (recall - prev) * precision
        prev = recall
    return float(area)


def rc_points_enum(r, loss):
    r = np.asarray(r, dtype=float)
    loss = np.asarray(loss, dtype=float)
    pts = []
    for t in sorted(set(r.tolist()), reverse=True):
        covered = r >= t
        pts.append((covered.mean(), loss[covered].mean()))
    return pts


def aurc_enum(r, loss):
    """Trapezoid under the RC points with a flat extension to coverage 0."""
    pts = rc_points_enum(r, loss)
    area = pts[0][0] * pts[0][1]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return float(area)


def normal_quantile_mp(p, dps=40):
    """Standard normal quantile to ``dps`` digits via mpmath's erfinv."""
    with mpmath.workdps(dps):
        return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def set_partitions(items):
    """Every partition of ``items`` into non-empty groups."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def nll_grid_argmin(logits, labels, lo=0.01, hi=100.0, num=20001):
    """Temperature on a dense log grid minimising the softmax NLL."""
    z = np.asarray(logits, float)
    idx = np.arange(z.shape[0])
    best_t, best = None, math.inf
    for t in np.exp(np.linspace(math.log(lo), math.log(hi), num)):
        s = z / t
        m = s.max(axis=1, keepdims=True)
        v = np.mean(np.log(np.exp(s - m).sum(axis=1)) + m[:, 0] - s[idx, labels])
        if v < best:
            best_t, best = t, v
    return best_t
