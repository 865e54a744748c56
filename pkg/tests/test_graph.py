import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphpde import graph as gr
from graphpde.graph import DomainPartition, GraphError, WeightedGraph


def test_example_validates(example):
    g, p = example
    assert gr.validate(g, p).ok
    assert np.allclose(g.measure, [3, 2, 3, 1, 1])


def test_asymmetric_weight_is_reported(example):
    g, p = example
    w = g.weights.copy()
    w[g.index("x1"), g.index("x4")] = 2.0
    rep = gr.validate(WeightedGraph(g.vertices, w, g.measure), p)
    assert not rep.ok
    assert any("asymmetric" in v for v in rep.violations)


def test_moving_x2_to_boundary_still_valid(example):
    g, _ = example
    p = DomainPartition(g, ("x1", "x3"), ("x2", "x4", "x5"))
    assert gr.validate(g, p).ok


@pytest.mark.parametrize("mutation, needle", [
    ("self_loop", "self-loop"),
    ("measure", "nonpositive measure"),
    ("disconnect", "disconnected"),
    ("orphan_boundary", "no interior neighbor"),
    ("overlap", "overlap"),
    ("uncovered", "neither"),
    ("split_interior", "interior is not connected"),
])
def test_single_axiom_mutations_rejected(example, mutation, needle):
    g, p = example
    w, mu = g.weights.copy(), g.measure.copy()
    if mutation == "self_loop":
        w[0, 0] = 1.0
    elif mutation == "measure":
        mu[2] = 0.0
    elif mutation == "disconnect":
        w[2, 4] = w[4, 2] = 0.0
    g2 = WeightedGraph(g.vertices, w, mu)
    p2 = DomainPartition(g2, p.interior, p.boundary)
    if mutation == "orphan_boundary":
        p2 = DomainPartition(g2, ("x1", "x2", "x3", "x5"), ("x4",))
        p2 = DomainPartition(g2, ("x2", "x3", "x5"), ("x1", "x4"))
    elif mutation == "overlap":
        p2 = DomainPartition(g2, ("x1", "x2", "x3"), ("x3", "x4", "x5"))
    elif mutation == "uncovered":
        p2 = DomainPartition(g2, ("x1", "x2", "x3"), ("x4",))
    elif mutation == "split_interior":
        p2 = DomainPartition(g2, ("x2", "x4"), ("x1", "x3", "x5"))
    rep = gr.validate(g2, p2)
    assert any(needle in v for v in rep.violations), rep.violations


def test_random_fixture_graphs_validate(rng):
    for _ in range(30):
        g = gr.random_graph(rng, int(rng.integers(3, 12)))
        p = gr.random_partition(rng, g, 1 + int(rng.integers(2)))
        assert gr.validate(g, p).ok


def test_laplacian_of_constant_vanishes(example):
    g, p = example
    for x in g.vertices:
        assert gr.laplacian_full(g, np.full(5, 3.7), x) == pytest.approx(0.0, abs=1e-12)
    for x in p.interior:
        assert gr.laplacian_domain(p, np.full(5, -2.0), x) == pytest.approx(0.0, abs=1e-12)


def test_laplacian_hand_values(example):
    g, p = example
    u = np.array([8, 1, 0.5, 0, 0])
    assert gr.laplacian_full(g, u, "x1") == pytest.approx(-7.5, abs=1e-12)
    assert gr.laplacian_domain(p, u, "x2") == pytest.approx(3.25, abs=1e-12)
    assert gr.laplacian_domain(p, np.array([0, 0, 0, 1, 1.0]), "x1") == pytest.approx(1 / 3, abs=1e-12)


def test_operator_domain_errors(example):
    g, p = example
    with pytest.raises(GraphError):
        gr.laplacian_domain(p, np.zeros(5), "x4")
    with pytest.raises(GraphError):
        gr.normal_derivative(p, np.zeros(5), "x1")
    with pytest.raises(GraphError):
        gr.laplacian_full(g, np.zeros(5), "nope")


def test_normal_derivative_values(example):
    g, p = example
    assert gr.normal_derivative(p, np.full(5, 2.0), "x5") == pytest.approx(0.0, abs=1e-12)
    assert gr.normal_derivative(p, np.array([8, 1, 0.5, 0, 0]), "x4") == pytest.approx(-8.0, abs=1e-12)


def test_flux_balance_identity(example, rng):
    # interior mass of the Laplacian equals the mu-weighted outward flux
    g, p = example
    for _ in range(20):
        u = rng.normal(size=5)
        lhs = sum(g.measure[g.index(x)] * gr.laplacian_domain(p, u, x) for x in p.interior)
        rhs = sum(g.measure[g.index(z)] * gr.normal_derivative(p, u, z) for z in p.boundary)
        assert lhs == pytest.approx(rhs, abs=1e-12)
    u = np.array([1.0, 0, 0, 0, 0])
    lhs = sum(g.measure[g.index(x)] * gr.laplacian_domain(p, u, x) for x in p.interior)
    rhs = sum(g.measure[g.index(z)] * gr.normal_derivative(p, u, z) for z in p.boundary)
    assert lhs == pytest.approx(-1.0) and rhs == pytest.approx(-1.0)


def test_summation_by_parts(rng):
    for _ in range(10):
        g = gr.random_graph(rng, int(rng.integers(5, 11)))
        p = gr.random_partition(rng, g, 2)
        u = rng.normal(size=g.n)
        v = rng.normal(size=g.n)
        v[p.outer] = 0.0
        lhs = sum(-g.measure[g.index(x)] * gr.laplacian_domain(p, u, x) * v[g.index(x)] for x in p.interior)
        rhs = sum(g.measure[i] * gr.gradient_form(g, u, v, x) for i, x in enumerate(g.vertices))
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_gradient_form(example, rng):
    g, _ = example
    for _ in range(10):
        u, v, w = rng.normal(size=(3, 5))
        a, b = rng.normal(size=2)
        for x in g.vertices:
            assert gr.gradient_form(g, u, u, x) >= 0
            lhs = gr.gradient_form(g, a * u + b * w, v, x)
            assert lhs == pytest.approx(a * gr.gradient_form(g, u, v, x) + b * gr.gradient_form(g, w, v, x), abs=1e-12)
    assert all(gr.gradient_norm(g, np.full(5, 4.0), x) == 0 for x in g.vertices)


@pytest.mark.parametrize("b, u, x, expected", [
    (np.zeros(5), np.arange(5.0), "x1", 0.0),
    (np.ones(5), np.full(5, 2.0), "x3", 0.0),
    (np.ones(5), np.array([1.0, 0, 0, 0, 0]), "x2", 0.5),
])
def test_drift_dot_gradient(example, b, u, x, expected):
    g, _ = example
    assert gr.drift_dot_gradient(g, b, u, x) == pytest.approx(expected, abs=1e-12)


def test_drift_matrix_matches_pointwise(rng):
    g = gr.random_graph(rng, 7)
    b, u = rng.uniform(0, 2, 7), rng.normal(size=7)
    mat = gr.drift_matrix(g, b) @ u
    assert np.allclose(mat, [gr.drift_dot_gradient(g, b, u, x) for x in g.vertices], atol=1e-12)


def test_integrals_and_norms(example):
    g, p = example
    assert gr.integrate(g, np.ones(5), p.interior + p.boundary) == pytest.approx(10.0)
    assert gr.volume(g, p.interior) == pytest.approx(8.0)
    assert gr.sup_norm([8, 1, 0.5, 0, 0]) == 8
    phi = np.ones(5) / np.sqrt(10.0)
    assert gr.lp_norm(g, phi, 2) == pytest.approx(1.0)
    assert gr.lp_norm(g, [1, -3, 0, 0, 0], np.inf) == 3
    with pytest.raises(GraphError):
        gr.lp_norm(g, phi, 0.5)
    with pytest.raises(GraphError):
        gr.sup_norm([])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 10))
def test_laplacian_is_mu_self_adjoint_and_linear(seed, n):
    rng = np.random.default_rng(seed)
    g = gr.random_graph(rng, n)
    lap = gr.laplacian_matrix(g)
    u, v = rng.normal(size=(2, n))
    assert gr.mu_inner(g, lap @ u, v) == pytest.approx(gr.mu_inner(g, u, lap @ v), abs=1e-10)
    pointwise = np.array([gr.laplacian_full(g, u, x) for x in g.vertices])
    assert np.allclose(pointwise, lap @ u, atol=1e-12)
    assert np.allclose(lap @ (2 * u - v), 2 * lap @ u - lap @ v, atol=1e-12)


def test_graph_file_roundtrip(example):
    g, p = example
    g2, p2 = gr.parse_graph_text(gr.format_graph(g, p))
    assert g2.vertices == g.vertices
    assert np.array_equal(g2.weights, g.weights)
    assert np.array_equal(g2.measure, g.measure)
    assert p2.interior == p.interior and p2.boundary == p.boundary


def test_graph_file_degree_measure():
    text = "[vertices]\na, degree, interior\nb, degree, boundary\nc, 0.5, plain\n[edges]\na, b, 2\na, c, 1\n"
    g, p = gr.parse_graph_text(text)
    assert np.allclose(g.measure, [3, 2, 0.5])
    assert p.interior == ("a",)


@pytest.mark.parametrize("text, needle", [
    ("[vertices]\na, 1, plain\nb, 1, plain\n[edges]\na, b, 1\nb, a, 1\n", "duplicate edge"),
    ("[vertices]\na, 1, plain\n[edges]\na, a, 1\n", "self-loop"),
    ("[vertices]\na, 1, plain\nb, 1, plain\n[edges]\na, b, -1\n", "positive"),
    ("[vertices]\na, 1, plain\n[edges]\na, z, 1\n", "unknown vertex"),
    ("[vertices]\na, 1, sideways\n", "bad role"),
    ("a, b, 1\n", "outside a section"),
])
def test_graph_file_rejects(text, needle):
    with pytest.raises(GraphError, match=needle):
        gr.parse_graph_text(text)
