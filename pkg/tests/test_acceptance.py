"""Acceptance criteria, one test each.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists a
PASS/FAIL line per criterion.  Runtime bounds are checked inside the tests.
"""

import itertools
import time

import numpy as np
import pytest

from oracles import auroc_pairs, aupr_enum, aurc_enum, normal_quantile_mp, set_partitions
from uqeval import (AdaptiveBinning, Dominance, EqualRangeBinning, EvaluationSet, accuracy,
                    apply_temperature, aupr, auroc, aurc, dominates, ece, fit_temperature,
                    perturb_m, rc_curve, roc_curve, true_ece_discrete, z_score)
from uqeval.calibration import audit_adaptive_bins, bins_from_assignment
from uqeval.cli import main
from uqeval.io import write_dump
from uqeval.synth import (gen_calibrated, gen_discrete, gen_logits, gen_scored_model,
                          gen_undetectable_error)


def _random_set(rng, n):
    """Confidences on a coarse grid (many ties) or continuous, both classes present."""
    if rng.random() < 0.5:
        r = rng.integers(0, rng.integers(2, 12), size=n) / 10.0
        r = np.minimum(r, 1.0)
    else:
        r = rng.random(n)
    c = (rng.random(n) < rng.uniform(0.2, 0.9)).astype(np.int8)
    c[0], c[1] = 0, 1
    loss = None
    if rng.random() < 0.3:
        loss = np.where(c == 1, rng.uniform(0, 0.3, n), rng.uniform(0.5, 1, n))
    return EvaluationSet.from_arrays(r, c, loss=loss)


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    for _ in range(200):
        s = _random_set(rng, int(rng.integers(2, 201)))
        r, c = s.confidence.tolist(), s.correct.tolist()
        assert abs(auroc(s) - auroc_pairs(r, c)) <= 1e-9
        assert abs(aupr(s) - aupr_enum(r, c)) <= 1e-9
        assert abs(aurc(s) - aurc_enum(r, s.losses)) <= 1e-9
    assert time.perf_counter() - start < 10


def _pair(rng):
    n = int(rng.integers(4, 40))
    k = int(rng.integers(1, n))
    c = np.zeros(n, np.int8)
    c[:k] = 1
    grid = int(rng.integers(2, 8))

    def conf():
        if rng.random() < 0.5:
            return rng.integers(0, grid + 1, size=n) / grid
        return rng.random(n)

    a = EvaluationSet.from_arrays(conf(), rng.permutation(c))
    mode = rng.random()
    if mode < 0.4:
        b = EvaluationSet.from_arrays(conf(), rng.permutation(c))
    else:
        # swap a correct and a wrong confidence: a controlled ranking change
        r = a.confidence.copy()
        i = rng.choice(np.flatnonzero(a.correct == 1))
        j = rng.choice(np.flatnonzero(a.correct == 0))
        r[i], r[j] = r[j], r[i]
        b = EvaluationSet.from_arrays(r, a.correct)
    return a, b


def test_criterion_2_roc_rc_dominance_equivalence():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    seen = {d: 0 for d in Dominance}
    violations = []
    for trial in range(1000):
        a, b = _pair(rng)
        assert accuracy(a) == accuracy(b)
        d_roc = dominates(roc_curve(a), roc_curve(b))
        d_rc = dominates(rc_curve(a), rc_curve(b))
        seen[d_roc] += 1
        if d_roc is not d_rc:
            violations.append((trial, d_roc, d_rc))
    assert violations == []
    assert seen[Dominance.A_DOMINATES] > 0 and seen[Dominance.B_DOMINATES] > 0
    assert seen[Dominance.INCOMPARABLE] > 0
    assert time.perf_counter() - start < 30


def test_criterion_3_binned_ece_underestimates():
    start = time.perf_counter()
    levels = [0.2, 0.4, 0.6, 0.8]
    counts = [10, 20, 30, 40]
    cases = 0
    for L in (2, 3, 4):
        for signs in itertools.product((-1, 0, 1), repeat=L):
            s = gen_discrete([(levels[i], levels[i] + 0.1 * signs[i], counts[i])
                              for i in range(L)])
            truth = true_ece_discrete(s)
            for part in set_partitions(range(L)):
                group = {levels[i]: g for g, members in enumerate(part) for i in members}
                assign = np.array([group[r] for r in s.confidence])
                est = ece(bins_from_assignment(s.confidence, s.correct, assign), len(s))
                mixes = any({signs[i] for i in members} >= {-1, 1} for members in part)
                assert est <= truth + 1e-12
                assert (truth - est > 1e-12) == mixes
                cases += 1
    assert cases == sum(3 ** L * b for L, b in ((2, 2), (3, 5), (4, 15)))
    assert time.perf_counter() - start < 5


def test_criterion_4_perturbation_trend():
    base = gen_scored_model(10_000, 0.953, separability=2.2, seed=0)
    rows = []
    for m in (0, 20, 100, 300):
        s = perturb_m(base, m)
        rows.append((accuracy(s), auroc(s), aupr(s), aurc(s)))
    assert [round(100 * r[0], 2) for r in rows] == [95.30, 95.10, 94.30, 92.30]
    for col in (1, 2, 3):
        vals = [r[col] for r in rows]
        assert all(x < y for x, y in zip(vals, vals[1:])), (col, vals)


def test_criterion_5_undetectable_error():
    s = gen_undetectable_error(100_000, seed=0)
    er = EqualRangeBinning(10).fit(s)
    top = er.bins_[-1]
    assert top.lo >= 0.9 and abs(top.gap) <= 0.03
    ad = AdaptiveBinning(0.2).fit(s)
    assert any(b.lo >= 0.9 and b.hi <= 0.97 and abs(b.gap) >= 0.2 for b in ad.bins_)


def test_criterion_6_adaptive_audit():
    sets = [gen_calibrated(10_000, (1, 1), seed=1), gen_calibrated(10_000, (20, 0.5), seed=1),
            gen_undetectable_error(100_000, seed=0)]
    fitted = [AdaptiveBinning(0.2).fit(s) for s in sets]
    need = 0.25 * z_score(0.2) ** 2
    for est in fitted:
        assert audit_adaptive_bins(est.bins_, 0.2) == []
        for b in est.bins_[1:]:
            assert b.count >= need / max(b.width, 1e-3) ** 2
    uniform, peaked = fitted[0], fitted[1]
    assert np.mean(sets[1].confidence > 0.95) > 0.5
    assert uniform.n_bins_used_ > peaked.n_bins_used_


def test_criterion_7_temperature_recovery():
    s = gen_logits(100_000, 10, true_temperature=2.0, seed=0)
    train, held = s.subset(np.arange(0, 50_000)), s.subset(np.arange(50_000, 100_000))
    t_full = fit_temperature(s).temperature_
    assert 1.9 <= t_full <= 2.1
    model = fit_temperature(train)
    after = apply_temperature(held, model)
    before_ece = EqualRangeBinning(10).fit(held).ece_
    after_ece = EqualRangeBinning(10).fit(after).ece_
    assert after_ece <= before_ece
    np.testing.assert_array_equal(after.correct, held.correct)
    assert accuracy(after) == accuracy(held)
    full_after = apply_temperature(s, t_full)
    assert accuracy(full_after) == accuracy(s)


def test_criterion_8_z_score():
    assert abs(z_score(0.2) - 1.2816) <= 1e-3
    assert abs(z_score(0.05) - 1.9600) <= 1e-3
    for alpha in (0.2, 0.05):
        assert z_score(alpha) == pytest.approx(normal_quantile_mp(1 - alpha / 2), abs=1e-9)


def test_criterion_9_calibrated_sampler():
    for seed in range(10):
        s = gen_calibrated(100_000, seed=seed)
        assert EqualRangeBinning(10).fit(s).ece_ <= 0.01
        assert AdaptiveBinning(0.2).fit(s).ece_ <= 0.015


def _snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def _run_all(work, inputs, capsys):
    work.mkdir()
    out = []
    cmds = [
        ["eval", inputs / "model.csv", "--out", work / "eval", "--curves", "--diagrams",
         "--scheme", "equal-range:10", "--scheme", "adaptive:0.2", "--scheme", "equal-size:15"],
        ["eval", inputs / "logits.jsonl", "--out", work / "eval2", "--curves"],
        ["sweep", inputs / "manifest.json", "--out", work / "sweep", "--jobs", 2],
        ["diagram", inputs / "model.csv", "--scheme", "adaptive:0.2", "--out", work / "d.svg"],
        ["calibrate", inputs / "logits.jsonl", "--out", work / "cal.jsonl",
         "--report", work / "cal.json"],
        ["synth", "--kind", "undetectable", "--n", 10_000, "--seed", 3, "--out", work / "u.csv"],
        ["synth", "--kind", "logits", "--n", 500, "--temperature", 1.5, "--out", work / "l.jsonl"],
        ["synth", "--kind", "discrete", "--levels", "0.3:0.5:40,0.9:0.7:60", "--out",
         work / "d.csv"],
    ]
    for cmd in cmds:
        code = main([str(a) for a in cmd])
        assert code == 0, cmd
        out.append(capsys.readouterr().out)
    return _snapshot(work), out


def test_criterion_10_cli_determinism(tmp_path, capsys):
    inputs = tmp_path / "in"
    inputs.mkdir()
    base = gen_scored_model(5_000, 0.9, seed=11)
    write_dump(base, inputs / "model.csv")
    write_dump(perturb_m(base, 50), inputs / "small.csv")
    write_dump(gen_logits(3_000, 5, 1.7, seed=2), inputs / "logits.jsonl")
    (inputs / "manifest.json").write_text(
        '{"models": [{"name": "big", "parameter_count": 20, "path": "model.csv"},'
        ' {"name": "small", "parameter_count": 10, "path": "small.csv"}]}')
    first, out1 = _run_all(tmp_path / "run1", inputs, capsys)
    second, out2 = _run_all(tmp_path / "run2", inputs, capsys)
    assert len(first) >= 15
    assert first == second
    # stdout echoes the written paths, which name the run directory
    assert [o.replace("run1", "run2") for o in out1] == out2
