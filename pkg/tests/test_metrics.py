from __future__ import annotations

import numpy as np
import pytest

from meshsal.metrics import cc, evaluate_pair, format_metrics_row, kld, se, sim


def test_cc_self_is_one(rng):
    x = rng.uniform(size=50)
    assert cc(x, x) == pytest.approx(1.0, abs=1e-12)


def test_cc_negated_is_minus_one(rng):
    x = rng.uniform(size=50)
    assert cc(x, -x + 3.0) == pytest.approx(-1.0, abs=1e-12)


def test_cc_affine_invariance(rng):
    x = rng.uniform(size=40)
    y = rng.uniform(size=40)
    base = cc(x, y)
    assert cc(2.5 * x + 1.0, y) == pytest.approx(base, abs=1e-12)
    assert cc(x, 0.3 * y - 7.0) == pytest.approx(base, abs=1e-12)


def test_cc_constant_raises():
    with pytest.raises(ValueError, match="constant map"):
        cc(np.full(10, 0.5), np.arange(10.0))


def test_cc_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        cc(np.zeros(3), np.zeros(4))


def test_sim_self_is_one(rng):
    p = rng.uniform(size=30)
    p /= p.sum()
    assert sim(p, p) == pytest.approx(1.0, abs=1e-12)


def test_sim_disjoint_supports_zero():
    p = np.array([0.5, 0.5, 0.0, 0.0])
    q = np.array([0.0, 0.0, 0.25, 0.75])
    assert sim(p, q) == 0.0


def test_sim_hand_value():
    assert sim(np.array([0.5, 0.5]), np.array([0.25, 0.75])) == pytest.approx(0.75, abs=1e-12)


def test_sim_autonormalizes_with_warning():
    with pytest.warns(RuntimeWarning, match="normalizing"):
        val = sim(np.array([1.0, 1.0]), np.array([0.25, 0.75]))
    assert val == pytest.approx(0.75)


def test_kld_self_is_zero(rng):
    p = rng.uniform(size=25)
    p /= p.sum()
    assert kld(p, p) == pytest.approx(0.0, abs=1e-9)


def test_kld_hand_value():
    # 0.5*ln2 + 0.5*ln(2/3) = 0.14384...
    val = kld(np.array([0.5, 0.5]), np.array([0.25, 0.75]))
    assert val == pytest.approx(0.1438, abs=1e-3)


def test_kld_nonnegative_random_pairs(rng):
    for _ in range(1000):
        p = rng.uniform(size=8)
        q = rng.uniform(size=8)
        p /= p.sum()
        q /= q.sum()
        assert kld(p, q) >= -1e-12


def test_kld_zero_mass_terms_ignored():
    p = np.array([0.0, 1.0])
    q = np.array([0.5, 0.5])
    assert kld(p, q) == pytest.approx(np.log(2.0), abs=1e-9)


def test_se_basics(rng):
    x = rng.uniform(size=20)
    assert se(x, x) == 0.0
    assert se(x + 0.1, x) == pytest.approx(0.01, abs=1e-12)
    y = rng.uniform(size=20)
    assert se(x, y) == pytest.approx(se(y, x), abs=1e-15)


def test_metrics_order_independence(rng):
    p = rng.uniform(size=30)
    q = rng.uniform(size=30)
    perm = rng.permutation(30)
    ps, qs = p / p.sum(), q / q.sum()
    assert kld(ps[perm], qs[perm]) == pytest.approx(kld(ps, qs), abs=1e-12)
    assert sim(ps[perm], qs[perm]) == pytest.approx(sim(ps, qs), abs=1e-12)
    assert cc(p[perm], q[perm]) == pytest.approx(cc(p, q), abs=1e-12)


def test_evaluate_pair_and_row_format(rng):
    gt = rng.uniform(0.1, 1.0, size=40)
    m = evaluate_pair(gt, gt)
    assert m["cc"] == pytest.approx(1.0)
    assert m["sim"] == pytest.approx(1.0)
    assert m["kld"] == pytest.approx(0.0, abs=1e-9)
    assert m["se"] == pytest.approx(0.0, abs=1e-15)
    row = format_metrics_row(m)
    assert row == "CC=1.0000 SIM=1.0000 KLD=0.0000 SE=0.0000"
