import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from oracles import nll_grid_argmin
from uqeval import (EqualRangeBinning, TemperatureScaling, accuracy, apply_temperature,
                    fit_temperature, validate)
from uqeval.exceptions import MissingLogits
from uqeval.synth import gen_logits


@pytest.fixture(scope="module")
def calibrated():
    return gen_logits(20_000, k=5, true_temperature=1.0, seed=11)


def test_identity_optimum(calibrated):
    assert fit_temperature(calibrated).temperature_ == pytest.approx(1.0, rel=0.05)


def test_matches_grid_oracle():
    s = gen_logits(2_000, k=4, true_temperature=1.7, seed=5)
    t = fit_temperature(s).temperature_
    ref = nll_grid_argmin(s.logits, s.labels, lo=1.0, hi=3.0, num=4001)
    assert t == pytest.approx(ref, abs=1e-3)


def test_stationary_point():
    s = gen_logits(3_000, k=3, true_temperature=0.6, seed=6)
    z, y = s.logits, s.labels
    idx = np.arange(len(y))

    def dnll(t):
        # d/dT of mean NLL = mean(z_y - E_p[z]) / T^2
        q = z / t
        p = np.exp(q - q.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        return np.mean(z[idx, y] - (p * z).sum(axis=1)) / t ** 2

    root = brentq(dnll, 0.05, 20.0, xtol=1e-12)
    assert fit_temperature(s).temperature_ == pytest.approx(root, abs=1e-4)


def test_missing_logits():
    with pytest.raises(MissingLogits):
        fit_temperature(validate([(0.9, 1), (0.2, 0)]))
    with pytest.raises(MissingLogits):
        apply_temperature(validate([(0.9, 1)]), 2.0)


def test_apply_unit_temperature(calibrated):
    out = apply_temperature(calibrated, 1.0)
    np.testing.assert_allclose(out.confidence, calibrated.confidence, atol=1e-12)


def test_apply_huge_temperature(calibrated):
    out = apply_temperature(calibrated, 1e6)
    np.testing.assert_allclose(out.confidence, 1 / 5, atol=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 100.0))
def test_correctness_unchanged(t):
    s = gen_logits(500, k=6, true_temperature=1.3, seed=1)
    out = apply_temperature(s, t)
    np.testing.assert_array_equal(out.correct, s.correct)
    assert accuracy(out) == accuracy(s)


def test_heldout_ece_does_not_increase():
    s = gen_logits(40_000, k=10, true_temperature=2.0, seed=8)
    half = len(s) // 2
    fit_part, test_part = s.subset(slice(0, half)), s.subset(slice(half, None))
    model = fit_temperature(fit_part)
    before = EqualRangeBinning(10).fit(test_part).ece_
    after = EqualRangeBinning(10).fit(apply_temperature(test_part, model)).ece_
    assert after <= before


def test_estimator_api():
    s = gen_logits(1_000, k=3, true_temperature=1.5, seed=2)
    est = TemperatureScaling()
    with pytest.raises(NotFittedError):
        est.transform(s.logits)
    est.fit(s.logits, s.labels)
    proba = est.predict_proba(s.logits)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    np.testing.assert_array_equal(est.predict(s.logits), np.argmax(s.logits, axis=1))
    assert clone(est).get_params() == {"bounds": (1e-2, 1e2), "xatol": 1e-8}
    assert est.temperature_ == fit_temperature(s).temperature_
