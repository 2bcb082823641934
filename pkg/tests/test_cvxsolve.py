import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsp.cvxsolve import (
    MeasurementEnsemble,
    SolverConfig,
    Status,
    WeightedBasisPursuit,
    lp_reference_solve,
    project_l2_ball,
    solve_wbp_denoise,
    solve_wbp_eq,
    weighted_soft_threshold,
)
from wsp.wcore import weighted_l1


def random_instance(rng, m=None, n=None):
    n = n or int(rng.integers(2, 9))
    m = m or int(rng.integers(1, n + 1))
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n) * (rng.random(n) < 0.5)
    w = rng.uniform(1, 2, n)
    return A, A @ x, w, x


@pytest.mark.parametrize(
    "A, b, w, x, obj",
    [
        ([[1, 1]], [2], [1, 2], [2, 0], 2.0),
        ([[1, 1]], [0], [1, 2], [0, 0], 0.0),
        (np.eye(2), [1, -2], [1, 1], [1, -2], 3.0),
    ],
)
def test_eq_examples(A, b, w, x, obj):
    rep = solve_wbp_eq(A, b, w)
    assert rep.status is Status.OPTIMAL
    np.testing.assert_allclose(rep.x, x, atol=1e-7)
    assert rep.objective == pytest.approx(obj, abs=1e-7)
    ref = lp_reference_solve(A, b, w)
    assert ref.objective == pytest.approx(obj, abs=1e-12)


def test_lp_reference_zero_rhs():
    ref = lp_reference_solve([[1, -1]], [0], [1, 1])
    assert ref.objective == 0 and np.all(ref.x == 0)


def test_lp_reference_cap():
    with pytest.raises(ValueError, match="limited"):
        lp_reference_solve(np.ones((2, 17)), [1, 1], np.ones(17))


def test_eq_infeasible():
    rep = solve_wbp_eq([[1, 0], [1, 0]], [1, 2], [1, 1])
    assert rep.status is Status.INFEASIBLE
    assert lp_reference_solve([[1, 0], [1, 0]], [1, 2], [1, 1]).status is Status.INFEASIBLE


def test_eq_matches_lp_oracle():
    rng = np.random.default_rng(21)
    for _ in range(60):
        A, b, w, _ = random_instance(rng)
        rep = solve_wbp_eq(A, b, w)
        ref = lp_reference_solve(A, b, w)
        assert rep.ok and ref.ok
        assert abs(rep.objective - ref.objective) <= 1e-6 * (1 + ref.objective)
        assert np.linalg.norm(A @ rep.x - b) <= 1e-8 * (1 + np.linalg.norm(b))


def test_eq_matches_scipy_linprog():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(22)
    for _ in range(40):
        A, b, w, _ = random_instance(rng)
        n = A.shape[1]
        c = np.concatenate([w, w])
        res = linprog(c, A_eq=np.hstack([A, -A]), b_eq=b, bounds=(0, None), method="highs")
        rep = solve_wbp_eq(A, b, w)
        assert abs(rep.objective - res.fun) <= 1e-6 * (1 + res.fun)


def test_report_invariants():
    rng = np.random.default_rng(23)
    cfg = SolverConfig()
    for _ in range(30):
        A, b, w, x = random_instance(rng)
        rep = solve_wbp_eq(A, b, w, cfg)
        assert rep.feasibility_residual <= cfg.feas_tol * (1 + np.linalg.norm(b))
        assert rep.objective == pytest.approx(weighted_l1(rep.x, w), abs=1e-12)
        # dominance over the generating witness
        assert rep.objective <= weighted_l1(x, w) + 1e-8 * (1 + rep.objective)


def test_denoise_examples():
    rep = solve_wbp_denoise([[1]], [5], [1], 1.0)
    assert rep.ok and rep.x[0] == pytest.approx(4.0, abs=1e-8)
    rep = solve_wbp_denoise([[1, 2], [3, 4]], [0.3, 0.4], [1, 1], 0.5)
    assert rep.ok and rep.objective == 0.0


def test_denoise_infeasible():
    rep = solve_wbp_denoise([[1, 0], [1, 0]], [1, 3], [1, 1], 0.5)
    assert rep.status is Status.INFEASIBLE


def test_denoise_eps_zero_matches_eq():
    rng = np.random.default_rng(24)
    for _ in range(100):
        A, b, w, _ = random_instance(rng)
        e = solve_wbp_eq(A, b, w)
        d = solve_wbp_denoise(A, b, w, 0.0)
        assert abs(e.objective - d.objective) <= 1e-6 * (1 + e.objective)


def test_denoise_matches_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(25)
    for _ in range(15):
        A, b, w, _ = random_instance(rng)
        b = b + 0.1 * rng.standard_normal(b.size)
        eps = float(rng.uniform(0.05, 0.5)) * np.linalg.norm(b)
        rep = solve_wbp_denoise(A, b, w, eps)
        if rep.status is Status.INFEASIBLE:
            continue
        z = cp.Variable(A.shape[1])
        prob = cp.Problem(cp.Minimize(w @ cp.abs(z)), [cp.norm(A @ z - b, 2) <= eps])
        prob.solve()
        assert abs(rep.objective - prob.value) <= 1e-5 * (1 + prob.value)
        assert np.linalg.norm(A @ rep.x - b) <= eps + 1e-8


def test_denoise_homogeneity_and_monotonicity():
    rng = np.random.default_rng(26)
    for _ in range(20):
        A, b, w, _ = random_instance(rng)
        eps = 0.2 * np.linalg.norm(b)
        base = solve_wbp_denoise(A, b, w, eps).objective
        scaled = solve_wbp_denoise(A, 3.0 * b, w, 3.0 * eps).objective
        assert scaled == pytest.approx(3.0 * base, rel=1e-8, abs=1e-10)
        objs = [solve_wbp_denoise(A, b, w, e).objective for e in np.linspace(0, 0.9, 6) * np.linalg.norm(b)]
        assert all(a >= c - 1e-8 for a, c in zip(objs, objs[1:]))


@pytest.mark.parametrize(
    "v, w, lam, expected",
    [((3, -3), (1, 2), 1.0, (2, -1)), ((3, -3), (1, 2), 0.0, (3, -3)), ((3, -3), (1, 2), 3.0, (0, 0))],
)
def test_soft_threshold_examples(v, w, lam, expected):
    np.testing.assert_array_equal(weighted_soft_threshold(v, w, lam), expected)


@settings(max_examples=200, deadline=None)
@given(v=st.floats(-10, 10), w=st.floats(1, 5), lam=st.floats(0, 5))
def test_soft_threshold_is_prox(v, w, lam):
    z = weighted_soft_threshold([v], [w], lam)[0]
    f = lambda t: 0.5 * (t - v) ** 2 + lam * w * abs(t)
    grid = np.linspace(-12, 12, 24001)
    assert f(z) <= np.min(f(grid)) + 1e-9


@pytest.mark.parametrize(
    "r, c, eps, expected",
    [((1, 1), (1, 1), 1.0, (1, 1)), ((3, 4), (1, 1), 0.0, (1, 1)), ((3, 4), (0, 0), 5.0, (3, 4)), ((6, 8), (0, 0), 5.0, (3, 4))],
)
def test_project_l2_ball(r, c, eps, expected):
    np.testing.assert_allclose(project_l2_ball(r, c, eps), expected)


def test_ensemble_is_read_only():
    ens = MeasurementEnsemble([[1.0, 2.0]], "explicit")
    with pytest.raises(ValueError):
        ens.A[0, 0] = 3.0
    assert ens.m == 1 and ens.N == 2
    with pytest.raises(ValueError):
        MeasurementEnsemble([[np.nan]])


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(feas_tol=0)


def test_concurrent_solves_are_independent():
    from wsp._parallel import ordered_map

    rng = np.random.default_rng(27)
    A = rng.standard_normal((3, 6))
    bp = WeightedBasisPursuit(A, np.ones(6))
    bs = [A @ rng.standard_normal(6) for _ in range(12)]
    serial = [bp.solve_eq(b).objective for b in bs]
    threaded = ordered_map(lambda b: bp.solve_eq(b).objective, bs, workers=4)
    assert serial == threaded
