import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from switchsim import oracle
from switchsim.geometry import ProjectionError, project_cone, project_subspace, ssc_metrics
from switchsim.traffic import birkhoff_mixture


def rand_doubly_stochastic(n, rng, k=4):
    c = rng.random(k)
    c /= c.sum()
    return birkhoff_mixture(n, [(a, rng.permutation(n)) for a in c])


def e_row(n, i):
    x = np.zeros((n, n))
    x[i] = 1
    return x


matrices = st.integers(2, 5).flatmap(
    lambda n: hnp.arrays(float, (n, n), elements=st.floats(-20, 20, allow_nan=False, width=64)))


def test_subspace_fixes_elements_of_s():
    x = e_row(3, 0) + 2 * e_row(3, 2).T
    d = project_subspace(x)
    assert np.allclose(d.parallel, x, atol=1e-12) and np.allclose(d.perp, 0, atol=1e-12)


def test_subspace_hand_example():
    d = project_subspace([[1, 0], [0, 0]])
    assert np.allclose(d.parallel, [[0.75, 0.25], [0.25, -0.25]], atol=1e-12)
    assert np.allclose(d.perp, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-12)


@given(matrices)
@settings(max_examples=200, deadline=None)
def test_subspace_residual_is_orthogonal_to_generators(x):
    d = project_subspace(x)
    assert np.abs(d.parallel + d.perp - x).max() <= 1e-9
    assert np.abs(d.perp.sum(0)).max() <= 1e-9 and np.abs(d.perp.sum(1)).max() <= 1e-9


@given(matrices, st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=150, deadline=None)
def test_subspace_linear_and_idempotent(x, a, b):
    y = np.roll(x, 1, axis=0) - 0.5
    P = lambda z: project_subspace(z).parallel  # noqa: E731
    assert np.abs(P(P(x)) - P(x)).max() <= 1e-9
    assert np.abs(P(a * x + b * y) - (a * P(x) + b * P(y))).max() <= 1e-9


def test_subspace_facet_invariance(rng):
    for _ in range(20):
        x = rng.normal(size=(4, 4))
        par = project_subspace(x).parallel
        for _ in range(3):
            nu = rand_doubly_stochastic(4, rng)
            assert (par * nu).sum() == pytest.approx(x.sum() / 4, abs=1e-9)


def test_cone_fixes_points_of_k():
    x = 2 * e_row(3, 1) + e_row(3, 0).T
    assert np.allclose(project_cone(x).parallel, x, atol=1e-9)


def test_cone_zero_example():
    d = project_cone([[2, -2], [-2, 2]])
    assert np.allclose(d.parallel, 0, atol=1e-9)


def test_cone_matches_active_set_oracle(rng):
    worst = 0.0
    for _ in range(200):
        x = rng.uniform(-10, 10, size=(3, 3))
        worst = max(worst, np.linalg.norm(project_cone(x).parallel - oracle.active_set_projection(x)))
    assert worst <= 1e-6


@given(matrices)
@settings(max_examples=200, deadline=None)
def test_cone_postconditions(x):
    d = project_cone(x)
    par, perp = d.parallel, d.perp
    assert np.abs(par + perp - x).max() <= 1e-9
    in_s = project_subspace(par).perp
    assert np.abs(in_s).max() <= 1e-6
    assert par.min() >= -1e-6
    assert abs((par * perp).sum()) <= 1e-6 * max(1.0, d.norm_parallel * d.norm_perp)


@given(matrices, st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_cone_nonexpansive(x, seed):
    y = x + np.random.default_rng(seed).normal(size=x.shape) * 3
    px, py = project_cone(x).parallel, project_cone(y).parallel
    assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-6


def test_cone_obtuse_angle(rng):
    # <x_par_K, y_perp_K> <= 0 for all x, y
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        x, y = rng.normal(size=(n, n)) * 5, rng.normal(size=(n, n)) * 5
        assert (project_cone(x).parallel * project_cone(y).perp).sum() <= 1e-6


def test_cone_facet_invariance(rng):
    for _ in range(50):
        x = rng.normal(size=(4, 4)) * 4
        par = project_cone(x).parallel
        ref = par.sum() / 4
        for _ in range(3):
            assert (par * rand_doubly_stochastic(4, rng)).sum() == pytest.approx(ref, abs=1e-6)


def test_perturbation_stays_in_capacity_closure(rng):
    n = 4
    nu = np.full((n, n), 1 / n)
    checked = 0
    for _ in range(200):
        q = rng.integers(0, 30, size=(n, n))
        perp = project_cone(q).perp
        norm = np.linalg.norm(perp)
        if norm < 1e-9:
            continue
        m = nu + nu.min() / norm * perp
        assert m.min() >= -1e-9
        assert m.sum(0).max() <= 1 + 1e-9 and m.sum(1).max() <= 1 + 1e-9
        checked += 1
    assert checked > 100


def test_ssc_metrics_examples():
    assert ssc_metrics(3 * e_row(3, 0).astype(int))[0] == pytest.approx(0, abs=1e-9)
    assert ssc_metrics(np.zeros((3, 3), int)) == (0.0, 0.0, 0.0)
    assert ssc_metrics([[1, 0], [0, 0]])[2] == pytest.approx(0.5, abs=1e-12)


def test_ssc_metrics_agree_with_projection(rng):
    for _ in range(100):
        q = rng.integers(0, 20, size=(4, 4))
        a, b, c = ssc_metrics(q)
        d = project_cone(q)
        assert a == pytest.approx(d.norm_perp, abs=1e-6)
        assert b == pytest.approx(d.norm_parallel, abs=1e-6)
        assert c == pytest.approx(project_subspace(q).norm_perp, abs=1e-9)


def test_cone_reports_non_convergence():
    with pytest.raises(ProjectionError):
        project_cone(np.array([[5.0, -3, 1], [-2, 4, -6], [1, 1, -1]]), tol=1e-15, max_iter=2)


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        project_subspace(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        project_cone(np.zeros(4))
