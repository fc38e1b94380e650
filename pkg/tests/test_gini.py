import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ginical.core import Dataset, DegenerateResponse, InvalidInput, TiePolicy, TiesNotAllowed
from ginical.gini import (
    DenominatorMethod,
    auc,
    count_inversions,
    gini_binary,
    gini_denominator,
    gini_eco,
    gini_ml,
    mean_abs_difference,
    somers_d,
)


def brute_concordance(y, m):
    c = d = ny = 0
    for i, j in itertools.combinations(range(len(y)), 2):
        if y[i] == y[j]:
            continue
        ny += 1
        s = np.sign(y[i] - y[j]) * np.sign(m[i] - m[j])
        c += s > 0
        d += s < 0
    return c, d, ny


def brute_auc(y, m):
    pos = [b for a, b in zip(y, m) if a == 1]
    neg = [b for a, b in zip(y, m) if a == 0]
    return sum((p > q) + 0.5 * (p == q) for p in pos for q in neg) / (len(pos) * len(neg))


def test_small_binary_example():
    ds = Dataset([0, 0, 1, 1], [0.1, 0.4, 0.3, 0.9])
    assert auc(ds) == 0.75
    rep = gini_binary(ds)
    assert rep.gini_ml == pytest.approx(0.5, abs=1e-15)
    assert rep.auc == 0.75 and rep.somers_d == pytest.approx(0.5)
    assert brute_auc(ds.responses, ds.predictions) == 0.75


def test_perfect_and_reversed_order():
    y = np.array([1.0, 2, 3, 4])
    assert gini_ml(Dataset(y, y)).gini_ml == pytest.approx(1.0, abs=1e-15)
    assert gini_ml(Dataset(y, -y)).gini_ml == pytest.approx(-1.0, abs=1e-15)


def test_two_point_example():
    assert gini_ml(Dataset([0, 2], [0, 2])).gini_ml == 1.0


def test_three_point_example():
    ds = Dataset([1, 2, 3], [1, 3, 2])
    assert somers_d(ds) == pytest.approx(1 / 3, abs=1e-15)
    # trapezoid areas on the grid {1/3, 2/3}: CAP (2/6, 5/6), self-CAP (3/6, 5/6)
    cap = (2 / 6 + 5 / 6 + 0.5) / 3
    self_cap = (3 / 6 + 5 / 6 + 0.5) / 3
    assert gini_ml(ds).gini_ml == pytest.approx((cap - 0.5) / (self_cap - 0.5), abs=1e-14)


def test_two_point_eco_conventions():
    assert gini_eco([0.0, 2.0]) == 1.0
    assert gini_eco([0.0, 2.0], unbiased=False) == 0.5


def test_gini_eco_uniform():
    rng = np.random.default_rng(0)
    assert gini_eco(rng.random(100_000)) == pytest.approx(1 / 3, abs=0.01)


def test_gini_eco_constant_is_zero():
    assert gini_eco([2.0, 2.0, 2.0]) == 0.0


def test_gini_eco_errors():
    with pytest.raises(InvalidInput):
        gini_eco([1.0, -1.0])
    with pytest.raises(DegenerateResponse):
        gini_eco([0.0, 0.0])


@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=30))
def test_mean_abs_difference_brute(v):
    a = np.asarray(v)
    diffs = np.abs(a[:, None] - a[None, :])
    n = a.size
    assert mean_abs_difference(a, False) == pytest.approx(diffs.sum() / n**2, rel=1e-9, abs=1e-9)
    assert mean_abs_difference(a, True) == pytest.approx(diffs.sum() / (n * (n - 1)), rel=1e-9, abs=1e-9)


def test_pairwise_plugin_equals_self_cap():
    rng = np.random.default_rng(1)
    for _ in range(20):
        y = rng.gamma(2.0, 1.0, int(rng.integers(2, 500)))
        a = gini_denominator(y, DenominatorMethod.PAIRWISE_GENERAL, unbiased=False)
        b = gini_denominator(y, DenominatorMethod.CONTINUOUS_SELF_CAP)
        assert a == pytest.approx(b, abs=1e-13)
        n = y.size
        assert gini_denominator(y, DenominatorMethod.PAIRWISE_GENERAL) == pytest.approx(a * n / (n - 1), rel=1e-12)


def test_constant_responses_are_degenerate():
    with pytest.raises(DegenerateResponse):
        gini_ml(Dataset([2, 2, 2], [1, 2, 3]))


def test_auc_matches_brute_force_and_scipy():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(4, 60))
        y = (rng.random(n) < 0.5).astype(float)
        y[:2] = [0, 1]
        m = rng.integers(0, 6, n).astype(float)
        ds = Dataset(y, m)
        value = auc(ds)
        assert value == pytest.approx(brute_auc(y, m), abs=1e-12)
        u = stats.mannwhitneyu(m[y == 1], m[y == 0]).statistic
        assert value == pytest.approx(u / (y.sum() * (n - y.sum())), abs=1e-12)
        assert somers_d(ds) == pytest.approx(2 * value - 1, abs=1e-12)


def test_somers_d_matches_brute_force_and_scipy():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(3, 50))
        y = rng.integers(0, 5, n).astype(float)
        y[0] = 7
        m = rng.integers(0, 5, n).astype(float)
        c, d, ny = brute_concordance(y, m)
        value = somers_d(Dataset(y, m))
        assert value == (c - d) / ny
        assert value == pytest.approx(stats.somersd(y, m).statistic, abs=1e-12)


def test_count_inversions_brute_force():
    rng = np.random.default_rng(4)
    for n in (0, 1, 2, 3, 7, 64, 65, 300):
        s = rng.integers(0, 20, n)
        brute = sum(s[i] > s[j] for i in range(n) for j in range(i + 1, n))
        assert count_inversions(s) == brute


def test_gini_is_invariant_to_permuting_records():
    rng = np.random.default_rng(5)
    y = rng.gamma(2.0, 1.0, 200)
    m = np.round(rng.random(200), 1)
    base = gini_ml(Dataset(y, m), rank_stats=False).gini_ml
    for _ in range(1000):
        p = rng.permutation(200)
        assert gini_ml(Dataset(y[p], m[p]), rank_stats=False).gini_ml == pytest.approx(base, abs=1e-12)


@settings(max_examples=50)
@given(st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_scale_invariance(c, seed):
    rng = np.random.default_rng(seed)
    y = rng.gamma(2.0, 1.0, 50)
    m = rng.random(50)
    a = gini_ml(Dataset(y, m), rank_stats=False).gini_ml
    b = gini_ml(Dataset(c * y, m), rank_stats=False).gini_ml
    assert a == pytest.approx(b, abs=1e-12)


def test_binary_gini_equals_two_auc_minus_one_random():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 400))
        y = (rng.random(n) < 0.2).astype(float)
        if y.sum() in (0, n):
            continue
        m = np.round(rng.random(n), 2)
        rep = gini_binary(Dataset(y, m))
        assert rep.gini_ml == pytest.approx(2 * rep.auc - 1, abs=1e-12)
        assert rep.somers_d == pytest.approx(rep.gini_ml, abs=1e-12)


def test_gini_binary_requires_binary():
    with pytest.raises(InvalidInput):
        gini_binary(Dataset([0, 2], [1, 2]))


def test_strict_tie_policy():
    with pytest.raises(TiesNotAllowed):
        gini_ml(Dataset([1, 2, 3], [1, 1, 2]), tie_policy=TiePolicy.STRICT)


def test_gini_identity_pairing_in_sample():
    from ginical.autocal import bin_means

    rng = np.random.default_rng(7)
    y = rng.gamma(2.0, 1.0, 1000)
    m = bin_means(y, y + rng.normal(0, 1, 1000), 10)
    for method in DenominatorMethod:
        if method is DenominatorMethod.BINARY:
            continue
        rep = gini_ml(Dataset(y, m), method)
        assert rep.gini_ml == pytest.approx(rep.gini_eco / rep.denominator_scale, abs=1e-9)


def test_report_json_roundtrip():
    import json

    rep = gini_ml(Dataset([1, 2, 3], [1, 3, 2]))
    d = json.loads(rep.to_json())
    assert d["denominator_method"] == "self-cap" and d["auc"] is None and d["n"] == 3
