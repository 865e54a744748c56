import warnings

import numpy as np
import pytest

import oracles
from graphpde import comparison as cmp
from graphpde import linear, spectral
from graphpde.graph import (domain_laplacian_matrix, laplacian_matrix, normal_derivative_matrix,
                            random_graph, random_partition)
from graphpde.linear import LinearParabolicProblem as LPP

GRID = np.linspace(0.0, 1.0, 11)


def test_euler_oracle_matches_plain_loop(rng):
    a = -np.diag(rng.uniform(0.5, 2, 4)) + 0.1 * rng.normal(size=(4, 4))
    u0 = rng.normal(size=4)
    b0, b1 = rng.normal(size=(2, 4))
    fast = oracles.euler_affine(a, u0, b0, b1, 0.5, 1e-3)
    slow = oracles.euler_loop(a, u0, lambda s: b0 + b1 * s, 0.5, 1e-3)
    assert np.allclose(fast, slow, atol=1e-12)


def test_dirichlet_single_mode(example):
    g, p = example
    es = spectral.dirichlet_eigensystem(p)
    phi = es.eigenfunctions[:, 0]
    s = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", phi, p), GRID)
    expected = np.exp(-es.eigenvalues[0] * GRID)[:, None] * phi[None, :]
    assert np.max(np.abs(s.states[:, p.inner] - expected)) <= 1e-12
    assert np.all(s.states[:, p.outer] == 0)


def test_dirichlet_zero_data_stays_zero(example):
    g, p = example
    s = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.zeros(3), p), GRID)
    assert not np.any(s.states)


def test_dirichlet_example_against_euler(example):
    g, p = example
    u0 = np.array([8.0, 1.0, 0.5])
    s = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", u0, p), GRID)
    a, _ = oracles.interior_system(g, p, "dirichlet", 0.0)
    ref = oracles.euler_affine(a, u0, np.zeros(3), np.zeros(3), 1.0, 1e-5)
    assert np.max(np.abs(s.final[p.inner] - ref)) <= 1e-3


def test_dirichlet_forced_with_moving_boundary(example):
    g, p = example
    u0 = np.array([1.0, 2.0, 0.0])
    forcing = np.column_stack([GRID, 1 - GRID, 0.5 + 0 * GRID])
    boundary = np.column_stack([1 + GRID, 2 * GRID])
    s = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", u0, p, 0.3, forcing, boundary), GRID)
    a, bm = oracles.interior_system(g, p, "dirichlet", 0.3)
    drive = forcing + boundary @ bm.T
    ref = oracles.euler_piecewise(a, u0, GRID, drive, 1e-5)
    assert np.max(np.abs(s.final[p.inner] - ref)) <= 1e-3
    assert np.allclose(s.states[:, p.outer], boundary)


def test_neumann_constant_mode(example):
    g, p = example
    s = linear.solve_ibvp_neumann(LPP(g, "neumann", np.full(3, 0.7), p), GRID)
    assert np.allclose(s.states, 0.7, atol=1e-12)


def test_neumann_second_mode(example):
    g, p = example
    es = spectral.neumann_eigensystem(p)
    s = linear.solve_ibvp_neumann(LPP(g, "neumann", es.eigenfunctions[:, 1], p), GRID)
    expected = np.exp(-es.eigenvalues[1] * GRID)[:, None] * es.eigenfunctions[:, 1][None, :]
    assert np.max(np.abs(s.states[:, p.inner] - expected)) <= 1e-12


def test_neumann_mass_conservation(example, rng):
    g, p = example
    s = linear.solve_ibvp_neumann(LPP(g, "neumann", rng.uniform(0, 3, 3), p), np.linspace(0, 5, 51))
    mass = s.states[:, p.inner] @ g.measure[p.inner]
    assert np.max(np.abs(mass - mass[0])) <= 1e-10


def test_neumann_flux_data_against_euler(example):
    g, p = example
    u0 = np.array([8.0, 1.0, 0.5])
    forcing = np.column_stack([np.sin(GRID), np.ones_like(GRID), GRID])
    boundary = np.column_stack([1 + GRID, 2 * GRID ** 2])
    s = linear.solve_ibvp_neumann(LPP(g, "neumann", u0, p, 0.3, forcing, boundary), GRID)
    a, bm = oracles.interior_system(g, p, "neumann", 0.3)
    ref = oracles.euler_piecewise(a, u0, GRID, forcing + boundary @ bm.T, 1e-5)
    assert np.max(np.abs(s.final[p.inner] - ref)) <= 1e-3
    # the boundary values honour the flux data at every output time
    flux = (normal_derivative_matrix(p) @ s.states[:, p.closure].T).T
    assert np.max(np.abs(flux - boundary)) <= 1e-10


def test_cauchy_constants(example):
    g, _ = example
    s = linear.solve_cauchy(LPP(g, "cauchy", np.full(5, 2.5)), GRID)
    assert np.allclose(s.states, 2.5, atol=1e-12)
    s = linear.solve_cauchy(LPP(g, "cauchy", np.full(5, 2.5), shift=0.8), GRID)
    assert np.allclose(s.states, 2.5 * np.exp(-0.8 * GRID)[:, None], atol=1e-12)


def test_cauchy_random_forcing_against_euler(rng):
    g = random_graph(rng, 7)
    u0 = rng.uniform(0, 1, 7)
    forcing = rng.normal(size=(len(GRID), 7))
    s = linear.solve_cauchy(LPP(g, "cauchy", u0, shift=0.2, forcing=forcing), GRID)
    ref = oracles.euler_piecewise(oracles.full_system(g, 0.2), u0, GRID, forcing, 1e-5)
    assert np.max(np.abs(s.final - ref)) <= 1e-3


def test_callable_forcing_matches_samples(example):
    g, p = example
    fine = np.linspace(0, 1, 101)

    def h(t):
        return np.array([1 + t, 2 - t, 3 * t])
    s1 = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.zeros(3), p, forcing=h), fine)
    s2 = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.zeros(3), p,
                                         forcing=np.array([h(t) for t in fine])), fine)
    assert np.max(np.abs(s1.states - s2.states)) <= 1e-13


def test_linearity(rng):
    g = random_graph(rng, 6)
    p = random_partition(rng, g, 2)
    for kind in ("dirichlet", "neumann"):
        probs = [LPP(g, kind, rng.normal(size=p.n_interior), p, 0.4, rng.normal(size=(11, p.n_interior)),
                     rng.normal(size=(11, 2))) for _ in range(2)]
        al, be = 1.7, -0.6
        combo = LPP(g, kind, al * probs[0].u0 + be * probs[1].u0, p, 0.4,
                    al * probs[0].forcing + be * probs[1].forcing, al * probs[0].boundary + be * probs[1].boundary)
        s = [linear.solve_parabolic(q, GRID).states for q in (*probs, combo)]
        assert np.max(np.abs(s[2] - (al * s[0] + be * s[1]))) <= 1e-9


@pytest.mark.parametrize("kind", ["dirichlet", "neumann", "cauchy"])
def test_semigroup_restart(rng, kind):
    g = random_graph(rng, 6)
    p = None if kind == "cauchy" else random_partition(rng, g, 2)
    width = g.n if p is None else p.n_interior
    full = linear.solve_parabolic(LPP(g, kind, rng.normal(size=width), p, 0.1), np.linspace(0, 2, 21))
    dom = np.arange(g.n) if p is None else p.inner
    restart = linear.solve_parabolic(LPP(g, kind, full.states[8][dom], p, 0.1), np.linspace(0, 1.2, 13))
    assert np.max(np.abs(restart.final - full.final)) <= 1e-9


def test_dirichlet_nonnegative_data_stays_nonnegative(rng):
    for _ in range(10):
        g = random_graph(rng, 8)
        p = random_partition(rng, g, 2)
        prob = LPP(g, "dirichlet", rng.uniform(0, 1, p.n_interior), p, 0.5,
                   rng.uniform(0, 1, (11, p.n_interior)), rng.uniform(0, 1, 2))
        s = linear.solve_ibvp_dirichlet(prob, GRID)
        assert cmp.check_positivity(s, mode=cmp.NONNEG).ok
        assert cmp.certify_parabolic(s, g, p, k=-0.5).supersolution


def test_grid_must_be_uniform(example):
    g, p = example
    with pytest.raises(linear.SolverError):
        linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.ones(3), p), np.array([0.0, 0.1, 0.3]))
    with pytest.raises(linear.SolverError):
        linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.ones(3), p, forcing=lambda t: np.nan), GRID)


@pytest.mark.parametrize("rate, panels, expected", [
    (1.0, 1000, np.e - 1.0),
    (0.0, 1000, 1.0),
    (1e-14, 10, 1.0),
    (-3.0, 40, (1 - np.exp(-3.0)) / 3.0),
    (1.0, 7, np.e - 1.0),
    (2.0, 1, (np.exp(2.0) - 1) / 2.0),
])
def test_forcing_mode_integral_constant(rate, panels, expected):
    t = np.linspace(0, 1, panels + 1)
    assert linear.forcing_mode_integral(np.ones_like(t), t, rate) == pytest.approx(expected, abs=1e-10)


def test_forcing_mode_integral_zero_and_quadratic():
    t = np.linspace(0, 2, 9)
    assert linear.forcing_mode_integral(np.zeros(9), t, 1.3) == 0.0
    # int_0^2 e^{r s} s^2 ds with r = 0.7
    r = 0.7
    exact = np.exp(2 * r) * (4 / r - 4 / r ** 2 + 2 / r ** 3) - 2 / r ** 3
    assert linear.forcing_mode_integral(t ** 2, t, r) == pytest.approx(exact, abs=1e-12)
    with pytest.raises(linear.SolverError):
        linear.forcing_mode_integral(np.array([1.0, np.inf]), np.array([0.0, 1.0]), 1.0)


def test_elliptic_dirichlet_eigen_identity(example):
    g, p = example
    es = spectral.dirichlet_eigensystem(p)
    phi, lam, m = es.eigenfunctions[:, 0], es.eigenvalues[0], 0.75
    u = linear.solve_elliptic_shifted(g, "dirichlet", m, (lam + m) * phi, 0.0, partition=p)
    assert np.allclose(u[p.inner], phi, atol=1e-12)
    assert np.all(u[p.outer] == 0)


def test_elliptic_neumann_constant(example):
    g, p = example
    u = linear.solve_elliptic_shifted(g, "neumann", 2.0, 2.0 * 1.4, 0.0, partition=p)
    assert np.allclose(u, 1.4, atol=1e-12)


@pytest.mark.parametrize("kind", ["dirichlet", "neumann"])
def test_elliptic_residuals(rng, kind):
    g = random_graph(rng, 9)
    p = random_partition(rng, g, 3)
    rhs, data = rng.normal(size=p.n_interior), rng.normal(size=3)
    u = linear.solve_elliptic_shifted(g, kind, 0.6, rhs, data, partition=p)
    eq, bc = linear.elliptic_residual(g, kind, u, 0.6, rhs, data, partition=p)
    assert eq <= 1e-10 and bc <= 1e-10
    # direct check of the discrete equations
    uc = u[p.closure]
    assert np.allclose(-domain_laplacian_matrix(p) @ uc + 0.6 * uc[:p.n_interior], rhs, atol=1e-10)


def test_elliptic_drift_reduces_to_shift(rng):
    g = random_graph(rng, 8)
    rhs = rng.normal(size=8)
    plain = linear.solve_elliptic_shifted(g, "cauchy", 1.5, rhs, c=np.full(8, 0.3))
    drift = linear.solve_elliptic_shifted(g, "cauchy", 1.5, rhs, drift=np.zeros(8), c=np.full(8, 0.3))
    assert np.max(np.abs(plain - drift)) <= 1e-12
    direct = np.linalg.solve(-laplacian_matrix(g) + 1.8 * np.eye(8), rhs)
    assert np.allclose(plain, direct, atol=1e-12)


def test_elliptic_drift_coercivity_warning(rng):
    g = random_graph(rng, 6)
    b = np.full(6, 3.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u = linear.solve_elliptic_shifted(g, "cauchy", 1.0, np.ones(6), drift=b)
    assert any("coercivity" in str(w.message) for w in caught)
    eq, _ = linear.elliptic_residual(g, "cauchy", u, 1.0, np.ones(6), drift=b)
    assert eq <= 1e-10
    assert linear.coercivity_margin(6.0, b, np.zeros(6)) == pytest.approx(0.5)


def test_time_series_csv(example):
    g, p = example
    s = linear.solve_ibvp_dirichlet(LPP(g, "dirichlet", np.array([8.0, 1.0, 0.5]), p), GRID)
    lines = s.to_csv().splitlines()
    assert lines[0] == "t,x1,x2,x3,x4,x5"
    assert len(lines) == len(GRID) + 1
    first = [float(x) for x in lines[1].split(",")]
    assert first == [0.0, 8.0, 1.0, 0.5, 0.0, 0.0]
    row = [float(x) for x in lines[5].split(",")]
    assert row[1:] == s.states[4].tolist()
