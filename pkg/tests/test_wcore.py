import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsp.wcore import (
    EnumerationCapError,
    SupportSet,
    as_weights,
    best_weighted_k_term,
    enumerate_weighted_supports,
    global_sign_error,
    is_weighted_k_sparse,
    normalize_global_sign,
    sigma_k,
    weighted_card,
    weighted_l0,
    weighted_l1,
)


def brute_force_k_term(x, w, k):
    """Exhaustive search; ties go to the lexicographically smallest support."""
    n = len(x)
    best, best_val = (), 0.0
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            if math.fsum(w[i] ** 2 for i in S) <= k * (1 + 1e-12):
                val = math.fsum(w[i] * abs(x[i]) for i in S)
                if val > best_val or (val == best_val and S < best):
                    best, best_val = S, val
    return best, weighted_l1(x, w) - best_val


@pytest.mark.parametrize(
    "x, w, expected",
    [
        ((1, 0, 3), (1, 2, 3), 10.0),
        ((0, 0, 0), (1, 2, 3), 0.0),
        ((0.5, 0.5), (1, 1), 2.0),
    ],
)
def test_weighted_l0_examples(x, w, expected):
    assert weighted_l0(x, w, zero_tol=0) == expected


def test_weighted_l0_relative_zero_tol():
    assert weighted_l0([1.0, 1e-12, 0.0], [1, 2, 3]) == 1.0
    assert weighted_l0([1.0, 1e-12, 0.0], [1, 2, 3], zero_tol=0) == 5.0


@pytest.mark.parametrize("x, w, expected", [((1, -2), (1, 3), 7.0), ((0, 0), (1, 3), 0.0)])
def test_weighted_l1_examples(x, w, expected):
    assert weighted_l1(x, w) == expected


def test_weighted_l1_unit_weights_is_l1():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = rng.standard_normal(rng.integers(1, 20))
        assert abs(weighted_l1(x, np.ones(x.size)) - np.abs(x).sum()) <= 1e-12 * (1 + np.abs(x).sum())


@pytest.mark.parametrize("k, expected", [(10, True), (9, False)])
def test_is_weighted_k_sparse_boundary(k, expected):
    assert is_weighted_k_sparse([1, 0, 3], [1, 2, 3], k, zero_tol=0) is expected


def test_zero_signal_is_sparse_for_any_budget():
    assert is_weighted_k_sparse([0, 0], [1, 1], 0.5)


def test_weights_below_one_rejected():
    with pytest.raises(ValueError, match="w_i >= 1"):
        as_weights([1.0, 0.9])
    with pytest.raises(ValueError):
        as_weights([1.0, np.inf])
    with pytest.raises(ValueError, match="mismatch"):
        weighted_l1([1, 2, 3], [1, 1])


@pytest.mark.parametrize(
    "w, k, maximal, expected",
    [
        ((1, 1), 1, False, {(), (0,), (1,)}),
        ((1, 2), 4, False, {(), (0,), (1,)}),
        ((1, 1, 1), 3, True, {(0, 1, 2)}),
        ((2, 1, 1), 2, True, {(1, 2)}),
    ],
)
def test_enumerate_supports_examples(w, k, maximal, expected):
    got = [s.indices for s in enumerate_weighted_supports(w, k, maximal=maximal)]
    assert len(got) == len(set(got))
    assert set(got) == expected


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError) as exc:
        list(enumerate_weighted_supports(np.ones(30), 2))
    assert exc.value.estimate == 2 ** 30


@settings(max_examples=60, deadline=None)
@given(
    w=st.lists(st.floats(1.0, 3.0), min_size=1, max_size=8),
    k=st.floats(0.5, 12.0),
)
def test_enumeration_matches_brute_force(w, k):
    n = len(w)
    every = {
        S
        for r in range(n + 1)
        for S in itertools.combinations(range(n), r)
        if weighted_card(S, w) <= k * (1 + 1e-12)
    }
    got = [s.indices for s in enumerate_weighted_supports(w, k)]
    assert set(got) == every and len(got) == len(every)
    maximal = {S for S in every if not any(set(S) < set(T) for T in every)}
    assert {s.indices for s in enumerate_weighted_supports(w, k, maximal=True)} == maximal


def test_support_set_card():
    s = SupportSet.from_indices([2, 0], [1, 2, 3])
    assert s.indices == (0, 2)
    assert abs(s.weighted_card - 10.0) <= 1e-12


def test_best_k_term_examples():
    S, sig = best_weighted_k_term([3, 2, 2], [2, 1, 1], 2)
    assert S.indices == (1, 2) and sig == 6.0
    S, sig = best_weighted_k_term([1, 1], [1, 1], 1)
    assert S.indices == (0,) and sig == 1.0
    S, sig = best_weighted_k_term([0, 5, 0, -1], [1, 1, 2, 1], 2)
    assert sig == 0.0


@pytest.mark.parametrize("integral", [True, False])
def test_best_k_term_matches_exhaustive(integral):
    rng = np.random.default_rng(11 if integral else 12)
    for _ in range(150):
        n = int(rng.integers(1, 11))
        if integral:
            w = np.sqrt(rng.integers(1, 5, n).astype(float))
        else:
            w = rng.uniform(1.0, 2.5, n)
        x = rng.standard_normal(n) * (rng.random(n) < 0.8)
        k = float(rng.uniform(0.5, 1.5 * n))
        S, sig = best_weighted_k_term(x, w, k)
        S_ref, sig_ref = brute_force_k_term(x, w, k)
        assert abs(sig - sig_ref) <= 1e-12 * (1 + weighted_l1(x, w))
        assert weighted_card(S.indices, w) <= k * (1 + 1e-12)


def test_best_k_term_denominator_path():
    x = np.array([3.0, 1.0, 2.0, 2.5])
    w = np.sqrt([1.5, 0.5 + 1, 2.0, 1.25])
    S1, s1 = best_weighted_k_term(x, w, 3.0, denominator=4)
    S2, s2 = best_weighted_k_term(x, w, 3.0)
    assert S1.indices == S2.indices and abs(s1 - s2) <= 1e-12


@settings(max_examples=80, deadline=None)
@given(
    x=st.lists(st.integers(-5, 5), min_size=1, max_size=7),
    data=st.data(),
)
def test_sigma_zero_iff_sparse(x, data):
    n = len(x)
    w = data.draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    k = data.draw(st.integers(1, 20))
    assert (sigma_k(x, w, k) == 0) == is_weighted_k_sparse(x, w, k, zero_tol=0)


def test_sigma_nonincreasing_in_k():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.standard_normal(8)
        w = rng.uniform(1, 2, 8)
        vals = [sigma_k(x, w, k) for k in np.linspace(0.5, 20, 15)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_l0_bounded_by_max_weight():
    rng = np.random.default_rng(4)
    for _ in range(200):
        x = rng.standard_normal(10) * (rng.random(10) < 0.5)
        w = rng.uniform(1, 3, 10)
        assert weighted_l0(x, w) <= np.max(w) ** 2 * np.count_nonzero(x) + 1e-12
        assert weighted_l0(x, np.ones(10)) == np.count_nonzero(x)


@pytest.mark.parametrize(
    "xhat, x0, expected",
    [((1, 2), (1, 2), 0.0), ((-1, -2), (1, 2), 0.0), ((1, 0), (0, 1), math.sqrt(2))],
)
def test_global_sign_error(xhat, x0, expected):
    assert global_sign_error(xhat, x0) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6), st.data())
def test_global_sign_error_symmetry(xhat, data):
    x0 = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(xhat), max_size=len(xhat)))
    xh, x0 = np.array(xhat), np.array(x0)
    e = global_sign_error(xh, x0)
    assert e == global_sign_error(-xh, x0) == global_sign_error(xh, -x0)


@pytest.mark.parametrize("x, expected", [((-1, 2), (1, -2)), ((0, -3), (0, 3)), ((0, 0), (0, 0))])
def test_normalize_global_sign(x, expected):
    assert np.array_equal(normalize_global_sign(x), expected)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6))
def test_normalize_idempotent_and_sign_invariant(x):
    x = np.array(x)
    f = normalize_global_sign(x)
    assert np.array_equal(normalize_global_sign(f), f)
    assert np.array_equal(normalize_global_sign(-x), f)
