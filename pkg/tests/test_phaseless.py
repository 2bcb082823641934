import numpy as np
import pytest

from wsp.cvxsolve import SolverConfig
from wsp.phaseless import (
    AllPatternsInfeasible,
    PhaselessObservation,
    canonical_sign_patterns,
    is_unique_l1_minimizer,
    solve_phaseless_altmin,
    solve_phaseless_exact,
    verify_unique_recovery,
)
from wsp.wcore import EnumerationCapError, global_sign_error, weighted_l1

A3 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def as_classes(sols):
    return sorted(tuple(np.round(s, 6)) for s in sols)


def test_one_dimensional():
    rep = solve_phaseless_exact([[1.0]], PhaselessObservation([5.0]), [1])
    assert rep.status == "ExactEnumeration"
    assert as_classes(rep.solutions) == [(5.0,)]
    assert rep.objective == pytest.approx(5.0)


def test_identity_has_two_classes():
    rep = solve_phaseless_exact(np.eye(2), PhaselessObservation([1.0, 2.0]), [1, 1])
    assert as_classes(rep.solutions) == [(1.0, -2.0), (1.0, 2.0)]
    assert rep.multiplicity == 2
    assert rep.objective == pytest.approx(3.0)


def test_three_row_instance_unique():
    rep = solve_phaseless_exact(A3, PhaselessObservation([1.0, 2.0, 3.0]), [1, 1])
    assert as_classes(rep.solutions) == [(1.0, 2.0)]
    assert rep.patterns_tried == 4 and rep.patterns_feasible == 1


def test_infeasible_magnitudes():
    with pytest.raises(AllPatternsInfeasible):
        solve_phaseless_exact(A3, PhaselessObservation([1.0, 1.0, 5.0]), [1, 1])


def test_pattern_cap():
    with pytest.raises(EnumerationCapError):
        solve_phaseless_exact(np.ones((17, 2)), PhaselessObservation(np.ones(17)), [1, 1])


def test_canonical_patterns_pin_zero_rows():
    S = canonical_sign_patterns([0.0, 2.0, 1.0, 0.0, 3.0])
    assert S.shape == (4, 5)
    assert np.all(S[:, [0, 1, 3]] == 1)
    assert len({tuple(r) for r in S}) == 4


def test_observation_validation():
    with pytest.raises(ValueError):
        PhaselessObservation([-1.0])
    with pytest.raises(ValueError):
        PhaselessObservation([1.0], eps=-0.1)


@pytest.mark.parametrize("seed", range(6))
def test_sign_flip_and_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 4))
    x0 = rng.standard_normal(4) * (rng.random(4) < 0.6)
    w = rng.uniform(1, 2, 4)
    base = solve_phaseless_exact(A, PhaselessObservation.from_signal(A, x0), w)
    flipped = solve_phaseless_exact(A, PhaselessObservation.from_signal(A, -x0), w)
    perm = rng.permutation(5)
    permuted = solve_phaseless_exact(A[perm], PhaselessObservation.from_signal(A[perm], x0), w)
    assert as_classes(base.solutions) == as_classes(flipped.solutions)
    assert len(base.solutions) == len(permuted.solutions)
    for s in permuted.solutions:
        assert min(global_sign_error(s, t) for t in base.solutions) <= 1e-6 * (1 + np.linalg.norm(s))
    # x0 is feasible for its own pattern
    assert base.objective <= weighted_l1(x0, w) + 1e-8 * (1 + base.objective)
    for s in base.solutions:
        assert np.linalg.norm(np.abs(A @ s) - np.abs(A @ x0)) <= 1e-7 * (1 + np.linalg.norm(A @ x0))


def test_noisy_solutions_respect_constraint():
    rng = np.random.default_rng(9)
    cfg = SolverConfig()
    for _ in range(10):
        A = rng.standard_normal((6, 4))
        x0 = rng.standard_normal(4)
        y = np.abs(A @ x0) + 0.05 * rng.standard_normal(6)
        y = np.maximum(y, 0)
        eps = 0.2
        rep = solve_phaseless_exact(A, PhaselessObservation(y, eps), np.ones(4), cfg)
        for s in rep.solutions:
            assert np.linalg.norm(np.abs(A @ s) - y) <= eps + 1e-7


def test_parallel_sweep_is_deterministic():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((7, 5))
    obs = PhaselessObservation.from_signal(A, rng.standard_normal(5))
    a = solve_phaseless_exact(A, obs, np.ones(5), workers=1)
    b = solve_phaseless_exact(A, obs, np.ones(5), workers=4)
    assert a.objective == b.objective
    assert all(np.array_equal(u, v) for u, v in zip(a.solutions, b.solutions))


def test_altmin_fixed_point_at_truth():
    x0 = np.array([1.0, 2.0])
    rep = solve_phaseless_altmin(A3, PhaselessObservation.from_signal(A3, x0), [1, 1], init=x0)
    assert rep.status == "Heuristic"
    np.testing.assert_allclose(rep.solutions[0], x0, atol=1e-7)
    assert rep.objective == pytest.approx(3.0, abs=1e-7)


def test_altmin_default_init_converges():
    rep = solve_phaseless_altmin(A3, PhaselessObservation([1.0, 2.0, 3.0]), [1, 1])
    np.testing.assert_allclose(rep.solutions[0], [1.0, 2.0], atol=1e-7)


def test_altmin_zero_observation():
    rep = solve_phaseless_altmin(A3, PhaselessObservation([0.0, 0.0, 0.0]), [1, 1])
    assert np.all(rep.solutions[0] == 0) and rep.objective == 0


def test_exact_dominates_altmin():
    rng = np.random.default_rng(12)
    compared = 0
    for _ in range(100):
        m = int(rng.integers(2, 11))
        A = rng.standard_normal((m, 4))
        obs = PhaselessObservation.from_signal(A, rng.standard_normal(4) * (rng.random(4) < 0.5))
        w = rng.uniform(1, 2, 4)
        ex = solve_phaseless_exact(A, obs, w)
        try:
            hm = solve_phaseless_altmin(A, obs, w, init=int(rng.integers(1 << 30)))
        except AllPatternsInfeasible:
            continue  # the heuristic may never reach a feasible pattern
        compared += 1
        assert hm.objective >= ex.objective - 1e-8 * (1 + ex.objective)
    assert compared >= 50


@pytest.mark.parametrize(
    "A, x0, expected",
    [(np.eye(2), [1.0, 2.0], False), (A3, [1.0, 2.0], True), ([[1.0]], [5.0], True)],
)
def test_verify_unique_recovery(A, x0, expected):
    assert verify_unique_recovery(A, x0, np.ones(len(x0))) is expected


def test_unique_l1_minimizer_detects_continuum():
    # every point of the segment between (1, 0) and (0, 1) is optimal
    assert not is_unique_l1_minimizer([[1.0, 1.0]], [1.0, 0.0], [1, 1])
    assert is_unique_l1_minimizer([[1.0, 1.0]], [1.0, 0.0], [1, 2])
