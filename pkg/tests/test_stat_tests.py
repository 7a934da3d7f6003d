import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ztree.errors import DegenerateSample, IncompatibleTest, UnsupportedTest
from ztree.stat_tests import (TestKind, TreatmentGroupSample, ZScore,
                              differential_effect_z, logrank_z, mann_whitney_z,
                              midranks, select_test, tie_term, two_proportion_z,
                              welch_t_z)

# ---------------------------------------------------------------------------
# Independent oracles


def two_prop_oracle(sa, na, sb, nb):
    p = (sa + sb) / (na + nb)
    return (sa / na - sb / nb) / math.sqrt(p * (1 - p) * (1 / na + 1 / nb))


def u_pairwise_oracle(a, b):
    """Exhaustive pairwise comparison, ties count one half."""
    return sum((x > y) + 0.5 * (x == y) for x in a for y in b)


def welch_oracle(a, b):
    ma, mb = np.mean(a), np.mean(b)
    va, vb = np.var(a, ddof=1), np.var(b, ddof=1)
    return (ma - mb) / math.sqrt(va / len(a) + vb / len(b))


def logrank_oracle(ta, ea, tb, eb):
    """One risk-table row per distinct event time."""
    times = sorted(set(list(ta) + list(tb)))
    o = e = v = 0.0
    for t in times:
        na = sum(1 for x in ta if x >= t)
        nb = sum(1 for x in tb if x >= t)
        da = sum(1 for x, ev in zip(ta, ea) if x == t and ev)
        db = sum(1 for x, ev in zip(tb, eb) if x == t and ev)
        d, n = da + db, na + nb
        if d == 0:
            continue
        o += da
        e += d * na / n
        if n > 1:
            v += d * na * nb * (n - d) / (n * n * (n - 1))
    return (o - e) / math.sqrt(v)


def diff_effect_oracle(s1, s0, c1, c0, kind):
    def arm(vals):
        m = np.mean(vals)
        if kind == "binary":
            return m, m * (1 - m) / len(vals)
        return m, np.var(vals, ddof=1) / len(vals)

    m1s, v1s = arm(s1)
    m0s, v0s = arm(s0)
    m1c, v1c = arm(c1)
    m0c, v0c = arm(c0)
    return ((m1s - m0s) - (m1c - m0c)) / math.sqrt(v1s + v0s + v1c + v0c)


def binary_arm(successes, n):
    return np.r_[np.ones(successes), np.zeros(n - successes)]


# ---------------------------------------------------------------------------
# Frozen spec examples (values computed with the oracles above)


def test_two_proportion_examples():
    assert two_proportion_z(30, 100, 10, 100).value == pytest.approx(3.535533905932737, abs=1e-12)
    assert two_proportion_z(25, 50, 50, 100).value == 0.0
    with pytest.raises(DegenerateSample):
        two_proportion_z(0, 10, 0, 10)


def test_welch_examples():
    assert welch_t_z([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]).value == pytest.approx(-1.0, abs=1e-12)
    a = [1.0, 2.0, 7.5, 3.0]
    assert welch_t_z(a, a).value == 0.0
    with pytest.raises(DegenerateSample):
        welch_t_z([2, 2, 2], [5, 5, 5])


def test_mann_whitney_examples():
    z = mann_whitney_z([1, 2, 3], [4, 5, 6])
    assert u_pairwise_oracle([1, 2, 3], [4, 5, 6]) == 0.0
    assert z.value == pytest.approx(-1.9639610121239315, abs=1e-12)
    assert mann_whitney_z([1, 5, 9, 2], [1, 5, 9, 2]).value == 0.0
    # ties keep sigma positive
    assert mann_whitney_z([1, 1, 2, 2], [1, 1, 2, 2]).value == 0.0
    with pytest.raises(DegenerateSample):
        mann_whitney_z([3, 3, 3], [3, 3, 3])


def test_logrank_examples():
    z = logrank_z([1, 2], [1, 1], [3, 4], [1, 1])
    assert z.value == pytest.approx(7 / math.sqrt(17), abs=1e-12)  # = 1.6977...
    assert round(z.value, 4) == 1.6977
    same = logrank_z([1, 3, 5], [1, 0, 1], [1, 3, 5], [1, 0, 1])
    assert same.value == 0.0
    with pytest.raises(DegenerateSample):
        logrank_z([1, 2], [0, 0], [3, 4], [0, 0])


def test_differential_effect_examples(rng):
    # continuous: build arms with exact mean/variance via affine scaling
    def arm_with(n, mean, var):
        base = rng.normal(size=n)
        base = (base - base.mean()) / base.std(ddof=1)
        return mean + math.sqrt(var) * base

    sub = TreatmentGroupSample(arm_with(50, 2.0, 1.0), arm_with(50, 1.0, 1.0))
    comp = TreatmentGroupSample(arm_with(50, 1.0, 1.0), arm_with(50, 1.0, 1.0))
    z = differential_effect_z(sub, comp, "continuous")
    assert z.value == pytest.approx(3.5355339059327378, abs=1e-9)

    sub_b = TreatmentGroupSample(binary_arm(40, 100), binary_arm(20, 100))
    comp_b = TreatmentGroupSample(binary_arm(20, 100), binary_arm(20, 100))
    zb = differential_effect_z(sub_b, comp_b, "binary")
    assert zb.value == pytest.approx(2.3570226039551585, abs=1e-12)

    same = TreatmentGroupSample(binary_arm(30, 80), binary_arm(10, 40))
    assert differential_effect_z(same, same, "binary").value == 0.0

    with pytest.raises(DegenerateSample):
        zero = TreatmentGroupSample(binary_arm(0, 10), binary_arm(0, 10))
        differential_effect_z(zero, zero, "binary")


# ---------------------------------------------------------------------------
# Randomized agreement with the plug-in oracles (acceptance criterion 1 runs
# these at volume; here a quick regression layer)


@pytest.mark.parametrize("seed", range(20))
def test_two_proportion_random_agreement(seed):
    r = np.random.default_rng(seed)
    na, nb = int(r.integers(2, 200)), int(r.integers(2, 200))
    sa, sb = int(r.integers(0, na + 1)), int(r.integers(0, nb + 1))
    if sa + sb == 0 or sa + sb == na + nb:
        return
    assert two_proportion_z(sa, na, sb, nb).value == pytest.approx(
        two_prop_oracle(sa, na, sb, nb), abs=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_welch_random_agreement(seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=int(r.integers(2, 40)))
    b = r.normal(2.0, 3.0, size=int(r.integers(2, 40)))
    assert welch_t_z(a, b).value == pytest.approx(welch_oracle(a, b), abs=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_mann_whitney_u_matches_pairwise(seed):
    r = np.random.default_rng(seed)
    na = int(r.integers(1, 8))
    nb = int(r.integers(max(1, 4 - na), 12 - na + 1))
    a = r.integers(0, 5, na).astype(float)
    b = r.integers(0, 5, nb).astype(float)
    pooled = np.r_[a, b]
    ranks = midranks(pooled)
    u_mid = ranks[:na].sum() - na * (na + 1) / 2.0
    assert u_mid == pytest.approx(u_pairwise_oracle(a, b), abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_logrank_random_agreement(seed):
    r = np.random.default_rng(seed)
    na, nb = int(r.integers(2, 30)), int(r.integers(2, 30))
    ta = r.integers(1, 10, na).astype(float)
    tb = r.integers(1, 10, nb).astype(float)
    ea = r.integers(0, 2, na)
    eb = r.integers(0, 2, nb)
    if ea.sum() + eb.sum() == 0:
        return
    try:
        z = logrank_z(ta, ea, tb, eb)
    except DegenerateSample:
        return
    assert z.value == pytest.approx(logrank_oracle(ta, ea, tb, eb), abs=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_diff_effect_random_agreement(seed):
    r = np.random.default_rng(seed)
    arms = [r.normal(size=int(r.integers(2, 30))) for _ in range(4)]
    z = differential_effect_z(TreatmentGroupSample(arms[0], arms[1]),
                              TreatmentGroupSample(arms[2], arms[3]), "continuous")
    assert z.value == pytest.approx(
        diff_effect_oracle(arms[0], arms[1], arms[2], arms[3], "continuous"), abs=1e-10)


# ---------------------------------------------------------------------------
# Properties

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite_floats, min_size=2, max_size=25),
       st.lists(finite_floats, min_size=2, max_size=25))
def test_welch_antisymmetric_and_shift_invariant(a, b):
    try:
        z_ab = welch_t_z(a, b)
    except DegenerateSample:
        return
    assert welch_t_z(b, a).value == -z_ab.value  # exact
    shifted = welch_t_z([x + 7.25 for x in a], [x + 7.25 for x in b])
    assert shifted.value == pytest.approx(z_ab.value, rel=1e-7, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=20),
       st.lists(st.integers(0, 6), min_size=2, max_size=20))
def test_mann_whitney_antisymmetric_and_shift_invariant(a, b):
    try:
        z_ab = mann_whitney_z(a, b)
    except DegenerateSample:
        return
    assert mann_whitney_z(b, a).value == -z_ab.value  # exact
    shifted = mann_whitney_z([x + 3 for x in a], [x + 3 for x in b])
    assert shifted.value == z_ab.value


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.integers(1, 60), st.integers(1, 60))
def test_two_proportion_antisymmetric(sa, na, sb, nb):
    sa, sb = min(sa, na), min(sb, nb)
    try:
        z_ab = two_proportion_z(sa, na, sb, nb)
    except DegenerateSample:
        return
    assert two_proportion_z(sb, nb, sa, na).value == -z_ab.value  # exact


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 8), st.booleans()), min_size=2, max_size=15),
       st.lists(st.tuples(st.integers(1, 8), st.booleans()), min_size=2, max_size=15))
def test_logrank_antisymmetric(a, b):
    ta, ea = [t for t, _ in a], [int(e) for _, e in a]
    tb, eb = [t for t, _ in b], [int(e) for _, e in b]
    try:
        z_ab = logrank_z(ta, ea, tb, eb)
    except DegenerateSample:
        return
    assert logrank_z(tb, eb, ta, ea).value == -z_ab.value  # exact


def test_diff_effect_antisymmetric(rng):
    for _ in range(20):
        arms = [rng.normal(size=int(rng.integers(2, 20))) for _ in range(4)]
        sub = TreatmentGroupSample(arms[0], arms[1])
        comp = TreatmentGroupSample(arms[2], arms[3])
        z1 = differential_effect_z(sub, comp, "continuous")
        z2 = differential_effect_z(comp, sub, "continuous")
        assert z2.value == -z1.value  # exact


def test_zscore_fields():
    z = ZScore(-2.5)
    assert z.magnitude == 2.5
    assert z.direction == -1
    assert ZScore(0.0).direction == 0
    with pytest.raises(ValueError):
        ZScore(float("inf"))


def test_tie_term():
    assert tie_term([1, 1, 2, 2]) == (8 - 2) * 2
    assert tie_term([1, 2, 3]) == 0.0


# ---------------------------------------------------------------------------
# select_test


def test_select_test_defaults():
    assert select_test("binary", False) == TestKind.TWO_PROPORTION_Z
    assert select_test("continuous", False) == TestKind.MANN_WHITNEY_U
    assert select_test("time-to-event", False) == TestKind.LOG_RANK
    assert select_test("binary", True) == TestKind.DIFF_EFFECT_BINARY
    assert select_test("continuous", True) == TestKind.DIFF_EFFECT_CONTINUOUS


def test_select_test_override_and_errors():
    assert select_test("continuous", False, TestKind.WELCH_T) == TestKind.WELCH_T
    with pytest.raises(UnsupportedTest):
        select_test("time-to-event", True)
    with pytest.raises(IncompatibleTest):
        select_test("binary", False, TestKind.WELCH_T)
