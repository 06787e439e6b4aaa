import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhomog import (InsufficientCollarError, LiftedDirection, analytic_symbol, apply_levy,
                       apply_levy_lifted, build_kernel, exterior_grid, torus_grid)
from levyhomog.levy_kernel import levy_matrix_exterior, levy_matrix_torus

alphas = st.sampled_from([0.3, 0.5, 1.0, 1.5, 1.8])


def test_weights_positive_and_radii_rounded():
    k = build_kernel(1.2, 1 / 64, nu=0.05, far_radius=2.0)
    assert np.all(k.weights > 0)
    assert k.nu == pytest.approx(3 / 64)
    assert k.far_radius == pytest.approx(2.0)
    assert k.tail_constant == pytest.approx(4 * 2.0 ** -1.2 / 1.2)


@pytest.mark.parametrize("kw", [dict(alpha=0.0, h=0.1), dict(alpha=2.0, h=0.1),
                                dict(alpha=1.0, h=-1.0), dict(alpha=1.0, h=0.1, nu=0.01),
                                dict(alpha=1.0, h=0.1, far_radius=0.5)])
def test_build_kernel_rejects_bad_input(kw):
    with pytest.raises(ValueError):
        build_kernel(**kw)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_cosine_eigenfunction(alpha):
    n = 256
    k = build_kernel(alpha, 1 / n)
    u = torus_grid(n, f=lambda y: np.cos(2 * np.pi * 3 * y))
    sigma = analytic_symbol(alpha, 3)
    assert np.max(np.abs(apply_levy(k, u) + sigma * u.values)) <= 1e-3 * sigma


def test_symbol_truncated_radius_below_full():
    assert analytic_symbol(1.0, 2, radius=1.0) < analytic_symbol(1.0, 2)
    assert analytic_symbol(1.0, 0) == 0.0
    with pytest.raises(ValueError):
        analytic_symbol(1.0, -1)


@settings(max_examples=25, deadline=None)
@given(alphas, st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_linear_and_kills_constants(alpha, seed, c):
    n = 64
    k = build_kernel(alpha, 1 / n)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(n), rng.standard_normal(n)
    L = lambda w: apply_levy(k, torus_grid(n, f=lambda y: w))
    assert np.allclose(L(u + c * v), L(u) + c * L(v), atol=1e-9 * (1 + abs(c)) * n ** alpha)
    assert np.all(L(np.full(n, c)) == 0.0)


@settings(max_examples=25, deadline=None)
@given(alphas, st.integers(0, 2**31 - 1))
def test_maximum_point_gives_nonpositive_value(alpha, seed):
    n = 64
    k = build_kernel(alpha, 1 / n)
    u = np.random.default_rng(seed).standard_normal(n)
    i = int(np.argmax(u))
    assert apply_levy(k, torus_grid(n, f=lambda y: u))[i] <= 1e-12


def test_torus_matrix_matches_apply_and_is_monotone():
    n = 48
    k = build_kernel(0.8, 1 / n)
    A = levy_matrix_torus(k, n)
    u = np.sin(2 * np.pi * np.arange(n) / n) ** 3
    assert np.allclose(A @ u, apply_levy(k, torus_grid(n, f=lambda y: u)))
    off = A - np.diag(np.diag(A))
    assert np.all(off >= 0) and np.allclose(A.sum(axis=1), 0, atol=1e-9)


def test_exterior_needs_collar():
    k = build_kernel(1.0, 1 / 32, far_radius=1.0)
    with pytest.raises(InsufficientCollarError):
        apply_levy(k, exterior_grid(0, 1, 1 / 32, collar=0.5))
    u = exterior_grid(0, 1, 1 / 32, collar=1.0, outside=lambda x: np.ones_like(x))
    A, B = levy_matrix_exterior(k, u)
    assert A.shape[0] == u.interior.sum()


def test_lifted_constant_in_transverse_direction_matches_1d():
    n = 64
    k = build_kernel(1.0, 1 / n, fold_tail=False)
    y = np.arange(n) / n
    w = np.cos(2 * np.pi * y)[:, None] * np.ones((1, n))
    out = apply_levy_lifted(k, w, LiftedDirection((1.0, 0.5 ** 0.5)))
    sigma = analytic_symbol(1.0, 1, radius=k.far_radius)
    assert np.max(np.abs(out + sigma * w)) <= 5e-2 * sigma


def test_monotone_at_touching_point():
    n = 64
    k = build_kernel(1.3, 1 / n)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(n)
    v = u + rng.random(n)
    v[10] = u[10]
    L = lambda w: apply_levy(k, torus_grid(n, f=lambda y: w))
    assert L(u)[10] <= L(v)[10]


def test_far_radius_doubling_within_tail_bound():
    n = 64
    u = np.cos(2 * np.pi * np.arange(n) / n)
    base = build_kernel(0.8, 1 / n, far_radius=2.0, fold_tail=False)
    wide = build_kernel(0.8, 1 / n, far_radius=4.0, fold_tail=False)
    diff = np.abs(levy_matrix_torus(base, n) @ u - levy_matrix_torus(wide, n) @ u)
    assert diff.max() <= base.tail_bound(1.0)
