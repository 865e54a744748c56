"""Acceptance criteria, one test each; every test records a pass/fail line.

Run directly with ``python tests/test_acceptance.py`` or through pytest; the
lines are printed in the terminal summary either way.
"""
import sys
import time

import numpy as np
import pytest

import conftest
import oracles
from graphpde import dynamics as dyn
from graphpde import linear, spectral, suites
from graphpde.cli import DEMO_DT, DEMO_STRIDE, DEMO_T, DEMO_U0
from graphpde.graph import example_graph, random_graph
from graphpde.monotone import Reaction, elliptic_monotone

SQ13 = np.sqrt(13.0)


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_dirichlet_eigenvalues():
    _, p = example_graph()
    t0 = time.perf_counter()
    es = spectral.dirichlet_eigensystem(p)
    elapsed = time.perf_counter() - t0
    expected = np.sort([(5 - SQ13) / 6, (5 + SQ13) / 6, 4 / 3])
    err = float(np.max(np.abs(es.eigenvalues - expected)))
    record(1, err <= 1e-10 and elapsed < 0.01,
           f"max eigenvalue error {err:.2e} (<= 1e-10), runtime {elapsed * 1e3:.2f} ms (< 10 ms)")


def test_criterion_2_extinction_below_threshold():
    _, p = example_graph()
    t0 = time.perf_counter()
    out = dyn.classify_logistic_dirichlet(p, 0.1, 1.0, np.array(DEMO_U0), DEMO_T, DEMO_DT, DEMO_STRIDE)
    elapsed = time.perf_counter() - t0
    ev = out.evidence
    ok = out.outcome == dyn.EXTINCTION and ev["final_sup"] <= 1e-3 and ev["tail_monotone"] and elapsed < 1.0
    record(2, ok, f"a=0.1 sup at T=200 {ev['final_sup']:.2e} (<= 1e-3), tail monotone {ev['tail_monotone']}, "
                  f"runtime {elapsed:.2f} s (< 1 s)")


def test_criterion_3_establishment_above_threshold():
    g, p = example_graph()
    out = dyn.classify_logistic_dirichlet(p, 1.8, 1.0, np.array(DEMO_U0), DEMO_T, DEMO_DT, DEMO_STRIDE)
    steady = elliptic_monotone(p, "dirichlet", Reaction.logistic(1.8, 1.0))
    dist = float(np.max(np.abs(out.series.final - steady.minimal)))
    # residual against the hand-built interior operator, not the package Laplacian
    a, _ = oracles.interior_system(g, p, "dirichlet", 0.0)
    u = steady.minimal[p.inner]
    resid = float(np.max(np.abs(a @ u + 1.8 * u - u ** 2)))
    ok = dist <= 1e-4 and resid <= 1e-8 and steady.gap <= 1e-7
    record(3, ok, f"a=1.8 terminal-vs-steady {dist:.2e} (<= 1e-4), elliptic residual {resid:.2e} (<= 1e-8), "
                  f"min/max gap {steady.gap:.2e} (<= 1e-7)")


def test_criterion_4_neumann_logistic():
    _, p = example_graph()
    out = dyn.classify_logistic_neumann(p, 1.0, 1.0, np.full(3, 0.1), T=50.0)
    s = out.series
    exact = oracles.logistic_exact(1.0, 1.0, 0.1, s.times)
    u = s.states[:, p.closure]
    slack = out.evidence["sandwich_slack"]
    # both scalar bounds coincide with the closed form since u0 is constant
    below = float(np.max(exact[:, None] - u))
    above = float(np.max(u - exact[:, None]))
    dist = out.evidence["distance_to_constant"]
    ok = dist <= 1e-6 and below <= slack and above <= slack and out.evidence["sandwich_ok"]
    record(4, ok, f"distance to a/b {dist:.2e} (<= 1e-6), sandwich violation "
                  f"{max(below, above, 0.0):.2e} within slack {slack:.2e} at {len(s.times)} output times")


def test_criterion_5_kpp_cauchy():
    rng = np.random.default_rng(5)
    g = random_graph(rng, 10)
    u0 = np.zeros(10)
    u0[int(rng.integers(10))] = 0.01
    out = dyn.classify_kpp_cauchy(g, Reaction.kpp(), u0, T=100.0)
    dist = out.evidence["distance_to_constant"]
    ok = g.is_connected() and out.hypotheses_ok and dist <= 1e-6
    record(5, ok, f"10-vertex random graph, spike 0.01, distance to 1 at T=100 {dist:.2e} (<= 1e-6)")


def test_criterion_6_allen_cahn():
    g, _ = example_graph()
    f = Reaction.allen_cahn(0.3)
    low = dyn.classify_allen_cahn(g, f, np.full(5, 0.05), T=100.0)
    high = dyn.classify_allen_cahn(g, f, np.full(5, 0.5), T=100.0)
    s0 = dyn.s_of_rho(f, 0.3, 0.0)[0]
    n_rho = len(low.criterion_2c)
    sup_low = low.evidence["final_sup"]
    dist_high = high.evidence["distance_to_one"]
    ok = n_rho > 0 and sup_low < 1e-3 and dist_high <= 1e-6 and abs(s0 - 0.1225) <= 1e-12
    record(6, ok, f"{n_rho} admissible rho, decayed sup {sup_low:.2e} (< 1e-3), u0=0.5 distance to 1 "
                  f"{dist_high:.2e} (<= 1e-6), s(0) = {s0!r} (|s(0)-0.1225| <= 1e-12)")


def _oracle_drive(prob, times):
    n_t = len(times)
    forcing = np.broadcast_to(prob.forcing, (n_t, len(prob.domain))) if prob.forcing is not None \
        else np.zeros((n_t, len(prob.domain)))
    if prob.kind == "cauchy":
        return oracles.full_system(prob.graph, prob.shift), forcing
    a, bmat = oracles.interior_system(prob.graph, prob.partition, prob.kind, prob.shift)
    bvals = np.broadcast_to(prob.boundary, (n_t, len(prob.partition.outer)))
    return a, forcing + bvals @ bmat.T


def test_criterion_7_oracle_equivalence():
    rng = np.random.default_rng(7)
    times = np.linspace(0.0, 1.0, 11)
    errs, ratios = [], []
    for i in range(20):
        prob = suites.random_linear_problem(rng, ("dirichlet", "neumann", "cauchy")[i % 3], times)
        sol = linear.solve_parabolic(prob, times).final[prob.domain]
        a, drive = _oracle_drive(prob, times)
        e1 = float(np.max(np.abs(sol - oracles.euler_piecewise(a, prob.initial(), times, drive, 1e-5))))
        e2 = float(np.max(np.abs(sol - oracles.euler_piecewise(a, prob.initial(), times, drive, 5e-6))))
        errs.append(e1)
        ratios.append(e1 / e2)
    ok = max(errs) <= 1e-3 and all(1.7 <= r <= 2.3 for r in ratios)
    record(7, ok, f"20 problems, worst discrepancy at t=1 {max(errs):.2e} (<= 1e-3), halving ratios in "
                  f"[{min(ratios):.3f}, {max(ratios):.3f}] (within [1.7, 2.3])")


def test_criterion_8_heat_kernel():
    g, p = example_graph()
    rng = np.random.default_rng(8)
    res = suites.heat_kernel_suite(rng, trials=10)
    worst = dict(res)
    for es in (spectral.full_eigensystem(g), spectral.dirichlet_eigensystem(p), spectral.neumann_eigensystem(p)):
        k0 = spectral.heat_kernel(es, 0.0).entries
        worst["identity"] = max(worst["identity"], float(np.max(np.abs(k0 - np.eye(es.size)))))
        worst["min_entry"] = min(worst["min_entry"], float(spectral.heat_kernel(es, 0.1).entries.min()))
        mu = es.weights
        for t in (0.1, 1.0, 10.0):
            mk = mu[:, None] * spectral.heat_kernel(es, t).entries
            worst["balance"] = max(worst["balance"], float(np.max(np.abs(mk - mk.T))))
    for t in (0.1, 1.0, 10.0):
        rows = spectral.heat_kernel(spectral.full_eigensystem(g), t).entries.sum(axis=1)
        worst["row_sum"] = max(worst["row_sum"], float(np.max(np.abs(rows - 1.0))))
    ok = (res["passed"] and worst["identity"] == 0.0 and worst["min_entry"] > 0
          and worst["row_sum"] <= 1e-10 and worst["balance"] <= 1e-10)
    record(8, ok, f"identity defect {worst['identity']:.1e} (== 0), min K(t=0.1) {worst['min_entry']:.2e} (> 0), "
                  f"row-sum defect {worst['row_sum']:.1e}, balance defect {worst['balance']:.1e} (<= 1e-10)")


def test_criterion_9_comparison_suites():
    rng = np.random.default_rng(9)
    mp = suites.max_principle_suite(rng, trials=200)
    order = suites.ordering_suite(rng, trials=100)
    ok = mp["passed"] and order["passed"]
    record(9, ok, f"{mp['trials'] - len(mp['failures'])}/200 linear solves certified and nonnegative "
                  f"(worst min {mp['worst_minimum']:.1e}); {order['trials'] - len(order['failures'])}/100 "
                  f"semilinear pairs ordered (worst gap {order['worst_gap']:.1e})")


def test_criterion_10_monotone_chains():
    rng = np.random.default_rng(10)
    worst, slowest, failed = 0.0, 0.0, []
    t_all = time.perf_counter()
    runs = suites.steady_runs(rng, n_random=5)
    for name, run in runs:
        t0 = time.perf_counter()
        res = run()
        slowest = max(slowest, time.perf_counter() - t0)
        scale = max(1.0, float(np.max(np.abs(res.minimal))), float(np.max(np.abs(res.maximal))))
        worst = max(worst, max(res.chain_defects().values()) / scale)
        if not res.chains_hold(1e-12):
            failed.append(name)
    total = time.perf_counter() - t_all
    ok = not failed and worst <= 1e-12 and total < 10.0
    record(10, ok, f"{len(runs) - len(failed)}/{len(runs)} steady runs with monotone chains, worst relative "
                   f"defect {worst:.1e} (<= 1e-12), slowest run {slowest:.2f} s, total {total:.2f} s (< 10 s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
