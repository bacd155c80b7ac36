import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dreamopt.constraints import AllSpace, Box, Simplex, make_constraint, project_simplex
from dreamopt.data import RobustLogRegData, partition
from dreamopt.errors import ConvergenceError, InvalidParameterError, ModeError
from dreamopt.problem import (
    QuadraticProblem,
    RobustLogRegProblem,
    SfoLedger,
    estimate_smoothness,
    primal_eval,
    reduced_gradient,
)
from oracles import (
    fd_grad,
    logreg_value,
    quad_value,
    simplex_by_bisection,
    simplex_grid,
)


def small_logreg(n_total=24, d=5, m=4, seed=0):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n_total, d)) / np.sqrt(d)
    labels = rng.choice([-1.0, 1.0], size=n_total)
    return RobustLogRegProblem(partition(RobustLogRegData(feats, labels), m, seed=seed))


def random_point(problem, rng, scale=1.0):
    x = scale * rng.normal(size=problem.d_x)
    y = rng.dirichlet(np.ones(problem.d_y))
    return np.concatenate([x, y])


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# robust logistic regression ------------------------------------------------------

def test_logreg_value_matches_oracle():
    pr = small_logreg()
    rng = np.random.default_rng(1)
    z = random_point(pr, rng)
    x, y = z[: pr.d_x], z[pr.d_x :]
    everyone = np.arange(pr.N)
    assert pr.value(z) == pytest.approx(logreg_value(pr.A, pr.b, everyone, x, y), rel=1e-12)
    for i in range(pr.m):
        local = logreg_value(pr.A, pr.b, pr.parts[i], x, y)
        assert pr.exact_local_value(i, z) == pytest.approx(local, rel=1e-12)


def test_logreg_network_value_is_mean_of_locals():
    pr = small_logreg()
    z = random_point(pr, np.random.default_rng(2))
    assert pr.value(z) == pytest.approx(np.mean([pr.exact_local_value(i, z) for i in range(pr.m)]))
    assert np.allclose(pr.grad(z), np.mean([pr.exact_local_grad(i, z) for i in range(pr.m)], axis=0))


def test_logreg_local_gradients_match_finite_differences():
    pr = small_logreg()
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = random_point(pr, rng)
        i = int(rng.integers(pr.m))
        idx = pr.parts[i]

        def fun(zz):
            return logreg_value(pr.A, pr.b, idx, zz[: pr.d_x], zz[pr.d_x :])

        assert rel_err(pr.exact_local_grad(i, z), fd_grad(fun, z)) <= 1e-5


def test_logreg_batch_gradient_with_repeats():
    pr = small_logreg()
    rng = np.random.default_rng(4)
    z = random_point(pr, rng)
    batch = pr.parts[1][[0, 0, 2, 3, 3, 3]]

    def fun(zz):
        return logreg_value(pr.A, pr.b, batch, zz[: pr.d_x], zz[pr.d_x :])

    assert rel_err(pr.stochastic_grad(1, z, batch), fd_grad(fun, z)) <= 1e-5


def test_logreg_gradient_large_margins_stay_finite():
    pr = small_logreg()
    z = random_point(pr, np.random.default_rng(5), scale=500.0)
    g = pr.grad(z)
    assert np.all(np.isfinite(g))
    assert np.isfinite(pr.value(z))


def test_logreg_draw_stays_on_agent():
    pr = small_logreg()
    rng = np.random.default_rng(6)
    batch = pr.draw(2, 200, rng)
    assert set(batch) <= set(pr.parts[2])
    assert np.array_equal(pr.full_batch(2), pr.parts[2])


def test_logreg_requires_partition():
    data = RobustLogRegData(np.ones((4, 2)), np.array([1.0, -1.0, 1.0, -1.0]))
    with pytest.raises(InvalidParameterError):
        RobustLogRegProblem(data)


def test_logreg_online_has_no_full_batch():
    pr = RobustLogRegProblem(small_logreg().data, online=True)
    assert pr.online
    with pytest.raises(ModeError):
        pr.full_batch(0)
    with pytest.raises(ModeError):
        pr.full_local_grad(0, np.zeros(pr.d))


def test_smoothness_estimate_bounds_hessian():
    pr = small_logreg(n_total=8, d=3, m=2)
    rng = np.random.default_rng(7)
    for _ in range(5):
        z = random_point(pr, rng)
        for j in range(pr.N):
            hess = np.stack([
                fd_grad(lambda zz, k=k: pr.stochastic_grad(0, zz, [j])[k], z, h=1e-5)
                for k in range(pr.d)
            ])
            assert np.linalg.norm(hess, 2) <= estimate_smoothness(pr.data) + 1e-4
    assert pr.L == estimate_smoothness(pr.data)


def test_logreg_primal_eval_kkt():
    pr = small_logreg()
    x = np.random.default_rng(8).normal(size=pr.d_x)
    value, y, grad_p = primal_eval(pr, x, tol=1e-10)
    assert Simplex().contains(y)
    # at the maximizer, no feasible direction increases f
    gy = pr.grad(np.concatenate([x, y]))[pr.d_x :]
    support = y > 1e-9
    assert np.ptp(gy[support]) <= 1e-8
    assert np.all(gy[~support] <= gy[support].max() + 1e-8)
    assert value == pytest.approx(pr.value(np.concatenate([x, y])))
    # the maximizer shifts weight towards high-loss samples
    losses = pr.losses(x)
    assert np.corrcoef(losses, y)[0, 1] > 0
    assert grad_p.shape == (pr.d_x,)


# quadratic fixture ---------------------------------------------------------------

def test_quadratic_gradients_match_finite_differences():
    pr = QuadraticProblem(m=3, dim=2, n=4, sigma=0.3, shift=0.7)
    rng = np.random.default_rng(9)
    for _ in range(10):
        z = rng.normal(size=pr.d)
        i = int(rng.integers(pr.m))
        h = pr.shifts[i]
        batch = np.array([0, 1, 1, 3])
        xi = pr._noise[batch].mean(axis=0)

        def fun(zz):
            return quad_value(zz[:2], zz[2:], xi, h)

        assert rel_err(pr.stochastic_grad(i, z, batch), fd_grad(fun, z)) <= 1e-7
        exact = fd_grad(lambda zz: quad_value(zz[:2], zz[2:], np.zeros(2), h), z)
        assert rel_err(pr.exact_local_grad(i, z), exact) <= 1e-7


def test_quadratic_shifts_cancel_and_offline_noise_is_zero_mean():
    pr = QuadraticProblem(m=5, dim=1, n=6, sigma=0.2, shift=1.3)
    assert abs(pr.shifts.sum()) < 1e-12
    z = np.array([0.4, -0.1])
    assert np.allclose(pr.grad(z), [-0.1, 0.5])
    for i in range(pr.m):
        full = pr.stochastic_grad(i, z, pr.full_batch(i))
        assert np.allclose(full, pr.exact_local_grad(i, z))


def test_quadratic_online_draws_are_rademacher():
    pr = QuadraticProblem(m=2, dim=3, sigma=0.5)
    xi = pr.draw(0, 4000, np.random.default_rng(10))
    assert xi.shape == (4000, 3)
    assert set(np.unique(xi)) == {-0.5, 0.5}
    assert abs(xi.mean()) < 0.03


def test_quadratic_vectorized_local_grads():
    pr = QuadraticProblem(m=4, dim=2, n=2, shift=0.5)
    zs = np.random.default_rng(11).normal(size=(4, 4))
    loop = np.stack([pr.exact_local_grad(i, zs[i]) for i in range(4)])
    assert np.allclose(pr.local_grads(zs), loop)


def test_quadratic_primal_is_half_square():
    pr = QuadraticProblem(m=2, dim=3, n=1)
    x = np.array([0.5, -1.0, 2.0])
    value, y, grad_p = primal_eval(pr, x, tol=1e-10)
    assert value == pytest.approx(0.5 * x @ x, abs=1e-9)
    assert np.allclose(y, x, atol=1e-9)
    assert np.allclose(grad_p, x, atol=1e-9)


def test_quadratic_box_primal():
    pr = QuadraticProblem(m=2, dim=1, n=1, constraint="box:0.5")
    # max_y xy - y^2/2 over |y| <= c is x^2/2 inside and c|x| - c^2/2 outside
    for x, expect in [(0.3, 0.045), (2.0, 0.875), (-1.0, 0.375)]:
        assert primal_eval(pr, np.array([x]))[0] == pytest.approx(expect, abs=1e-9)


def test_quadratic_rejects_bad_constants():
    with pytest.raises(InvalidParameterError):
        QuadraticProblem(m=2, L=0.5, mu=1.0)
    with pytest.raises(InvalidParameterError):
        QuadraticProblem(m=2, L=1.0, mu=0.0)


def test_online_problem_has_no_full_gradient():
    pr = QuadraticProblem(m=2, sigma=0.1)
    with pytest.raises(ModeError):
        pr.full_local_grads(np.zeros((2, 2)))


# ledgers -------------------------------------------------------------------------

def test_sfo_billing():
    pr = QuadraticProblem(m=3, dim=1, n=5, sigma=0.1)
    ledger = SfoLedger()
    pr.stochastic_grad(0, np.zeros(2), [0, 1, 2], ledger)
    pr.full_local_grad(1, np.zeros(2), ledger)
    pr.full_local_grads(np.zeros((3, 2)), ledger)
    assert ledger.calls == 3 + 5 + 15
    # diagnostics-style calls are free
    pr.local_grads(np.zeros((3, 2)))
    pr.grad(np.zeros(2))
    assert ledger.calls == 23
    with pytest.raises(InvalidParameterError):
        pr.stochastic_grad(0, np.zeros(2), [], ledger)


# reduced gradient and primal evaluation --------------------------------------------

def test_reduced_gradient_unconstrained_equals_gradient():
    pr = QuadraticProblem(m=2, dim=2, n=1)
    z = np.array([1.0, 2.0, 0.5, -0.5])
    assert np.allclose(reduced_gradient(pr, z, 0.5), pr.grad(z)[2:])


def test_reduced_gradient_zero_at_constrained_max():
    pr = small_logreg()
    x = np.zeros(pr.d_x)
    _, y, _ = primal_eval(pr, x, tol=1e-12)
    g = reduced_gradient(pr, np.concatenate([x, y]), 1.0 / pr.L)
    assert np.linalg.norm(g) <= 1e-11


def test_reduced_gradient_rejects_long_step():
    pr = QuadraticProblem(m=2, n=1, L=2.0)
    with pytest.raises(InvalidParameterError):
        reduced_gradient(pr, np.zeros(2), 0.6)


def test_primal_eval_reports_non_convergence():
    pr = small_logreg()
    with pytest.raises(ConvergenceError) as info:
        primal_eval(pr, np.ones(pr.d_x), tol=1e-14, max_iter=2)
    assert info.value.residual > 0
    with pytest.raises(InvalidParameterError):
        primal_eval(pr, np.ones(pr.d_x), tol=0.0)


# projections -----------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 5])
def test_simplex_projection_matches_bisection(n):
    rng = np.random.default_rng(n)
    for _ in range(300):
        v = rng.normal(scale=rng.choice([0.1, 1.0, 10.0]), size=n)
        assert np.max(np.abs(project_simplex(v[None])[0] - simplex_by_bisection(v))) <= 1e-9


@pytest.mark.parametrize("n,steps", [(2, 2000), (3, 200)])
def test_simplex_projection_matches_grid_search(n, steps):
    grid = simplex_grid(n, steps)
    rng = np.random.default_rng(12)
    for _ in range(20):
        v = rng.normal(size=n)
        best = grid[np.argmin(np.sum((grid - v) ** 2, axis=1))]
        # the nearest grid point is within one grid cell of the true projection
        assert np.max(np.abs(project_simplex(v[None])[0] - best)) <= 1.0 / steps + 1e-12


def test_simplex_projection_known_values():
    assert np.allclose(project_simplex(np.array([[2.0, 0.0]])), [[1.0, 0.0]])
    assert np.allclose(project_simplex(np.array([[0.0, 0.0, 0.0]])), [[1 / 3] * 3])
    # ties
    assert np.allclose(project_simplex(np.array([[1.0, 1.0, -5.0]])), [[0.5, 0.5, 0.0]])


simplex_vectors = arrays(np.float64, st.integers(1, 12),
                         elements=st.floats(-50, 50, allow_nan=False, width=64))


@settings(max_examples=200, deadline=None)
@given(v=simplex_vectors)
def test_simplex_projection_properties(v):
    s = Simplex()
    p = s.project(v)
    assert s.contains(p, 1e-12)
    assert np.array_equal(s.project(p), p)
    # variational inequality: <v - p, q - p> <= 0 for every vertex q
    for k in range(len(v)):
        q = np.zeros(len(v))
        q[k] = 1.0
        assert (v - p) @ (q - p) <= 1e-9 * (1 + np.abs(v).max())


def test_simplex_row_stacked():
    v = np.random.default_rng(13).normal(size=(6, 4))
    out = Simplex().project(v)
    assert np.allclose(out, [project_simplex(r[None])[0] for r in v])


def test_box_and_all_space():
    b = Box(0.5)
    assert np.array_equal(b.project([-1.0, 0.2, 3.0]), [-0.5, 0.2, 0.5])
    assert b.contains([0.5, -0.5]) and not b.contains([0.6])
    assert np.array_equal(AllSpace().project([1e9]), [1e9])
    assert not AllSpace().contains([np.inf])
    with pytest.raises(InvalidParameterError):
        Box(0.0)


def test_make_constraint():
    assert isinstance(make_constraint("simplex"), Simplex)
    assert make_constraint("box:2.5").c == 2.5
    assert isinstance(make_constraint("all-space"), AllSpace)
    with pytest.raises(InvalidParameterError):
        make_constraint("ball")
