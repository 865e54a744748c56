"""Randomized invariant suites behind the ``props`` subcommand."""
from __future__ import annotations

import numpy as np

from . import comparison as cmp
from . import spectral
from .dynamics import Scenario, comparison_dt_limit, integrate
from .graph import example_graph, random_graph, random_partition
from .linear import LinearParabolicProblem, solve_parabolic
from .monotone import Bracket, Reaction, cauchy_elliptic_monotone, elliptic_monotone


def heat_kernel_suite(rng: np.random.Generator, trials: int = 10, tol: float = 1e-10) -> dict:
    worst = {"identity": 0.0, "min_entry": np.inf, "row_sum": 0.0, "balance": 0.0, "semigroup": 0.0}
    for _ in range(trials):
        g = random_graph(rng, int(rng.integers(5, 11)))
        p = random_partition(rng, g, int(rng.integers(1, 3)))
        for es in (spectral.full_eigensystem(g), spectral.dirichlet_eigensystem(p)):
            mu = es.weights
            worst["identity"] = max(worst["identity"], float(np.max(np.abs(
                spectral.heat_kernel(es, 0.0).entries - np.eye(es.size)))))
            k01 = spectral.heat_kernel(es, 0.1).entries
            worst["min_entry"] = min(worst["min_entry"], float(k01.min()))
            for t in (0.1, 1.0, 10.0):
                k = spectral.heat_kernel(es, t).entries
                worst["balance"] = max(worst["balance"], float(np.max(np.abs(mu[:, None] * k - (mu[:, None] * k).T))))
                if es.kind == spectral.FULL:
                    worst["row_sum"] = max(worst["row_sum"], float(np.max(np.abs(k.sum(axis=1) - 1.0))))
            ks = spectral.heat_kernel(es, 0.3).entries @ spectral.heat_kernel(es, 0.7).entries
            worst["semigroup"] = max(worst["semigroup"], float(np.max(np.abs(ks - spectral.heat_kernel(es, 1.0).entries))))
    ok = worst["identity"] == 0.0 and worst["min_entry"] > 0 and all(
        worst[k] <= tol for k in ("row_sum", "balance", "semigroup"))
    return {"passed": bool(ok), "trials": trials, **worst}


def random_linear_problem(rng: np.random.Generator, kind: str, times):
    """Nonnegative data: u0, constant-in-time boundary data and piecewise-linear forcing."""
    g = random_graph(rng, int(rng.integers(5, 11)))
    p = None if kind == "cauchy" else random_partition(rng, g, int(rng.integers(1, 3)))
    width = g.n if p is None else p.n_interior
    u0 = rng.uniform(0, 2, width) * (rng.random(width) < 0.7)
    forcing = rng.uniform(0, 1, (len(times), width)) * (rng.random((1, width)) < 0.5)
    boundary = None if p is None else rng.uniform(0, 1, len(p.outer))
    shift = float(rng.uniform(-1, 2))
    return LinearParabolicProblem(g, kind, u0, p, shift, forcing, boundary)


def max_principle_suite(rng: np.random.Generator, trials: int = 200) -> dict:
    times = np.linspace(0.0, 1.0, 101)
    failures = []
    worst_min = np.inf
    for i in range(trials):
        kind = ("dirichlet", "neumann", "cauchy")[i % 3]
        prob = random_linear_problem(rng, kind, times)
        series = solve_parabolic(prob, times)
        p = prob.partition
        if kind == "dirichlet":
            bc = dict(alpha=1.0, beta=0.0)
        else:
            bc = dict(alpha=0.0, beta=1.0)
        cert = cmp.certify_parabolic(series, prob.graph, p, k=-prob.shift, **bc)
        dom = None if p is None else p.closure
        pos = cmp.check_positivity(series, dom, cmp.NONNEG, tol=1e-10)
        worst_min = min(worst_min, pos.minimum)
        if not (cert.supersolution and pos.ok):
            failures.append({"trial": i, "kind": kind, "verdict": cert.verdict, "minimum": pos.minimum})
    return {"passed": not failures, "trials": trials, "failures": failures, "worst_minimum": worst_min}


def _random_reaction(rng):
    pick = int(rng.integers(3))
    if pick == 0:
        return Reaction.logistic(float(rng.uniform(0.1, 3.0)), float(rng.uniform(0.5, 2.0)))
    if pick == 1:
        return Reaction.allen_cahn(float(rng.uniform(0.1, 0.9)))
    return Reaction.kpp()


def ordering_suite(rng: np.random.Generator, trials: int = 100, T: float = 2.0, tol: float = 1e-10) -> dict:
    failures = []
    worst = np.inf
    for i in range(trials):
        g = random_graph(rng, int(rng.integers(5, 11)))
        f = _random_reaction(rng)
        kind = ("dirichlet", "neumann", "cauchy")[i % 3]
        p = None if kind == "cauchy" else random_partition(rng, g, int(rng.integers(1, 3)))
        lo = rng.uniform(0, 1, g.n)
        hi = lo + rng.uniform(0, 0.5, g.n)
        dt = min(1e-2, 0.5 * comparison_dt_limit(f, 0.0, float(hi.max()) + 1.0))
        runs = []
        for u0 in (lo, hi):
            data = None if p is None else 0.0
            runs.append(integrate(Scenario(g, kind, f, u0, T, dt, 10, p, data)))
        rep = cmp.assert_ordering(runs[1], runs[0], tol=tol)
        worst = min(worst, rep.min_gap)
        if not rep.ok:
            failures.append({"trial": i, "kind": kind, "first_crossing": rep.first_crossing})
    return {"passed": not failures, "trials": trials, "failures": failures, "worst_gap": worst}


def steady_runs(rng: np.random.Generator, n_random: int = 5):
    """The monotone-iteration runs checked for chain monotonicity."""
    g, p = example_graph()
    runs = [("example a=1.8", lambda: elliptic_monotone(p, "dirichlet", Reaction.logistic(1.8, 1.0))),
            ("example a=0.1", lambda: elliptic_monotone(p, "dirichlet", Reaction.logistic(0.1, 1.0))),
            ("example neumann", lambda: elliptic_monotone(
                p, "neumann", Reaction.logistic(1.0, 1.0), bracket=Bracket(np.full(5, 0.25), np.full(5, 1.0)))),
            ("kpp cauchy", lambda: cauchy_elliptic_monotone(
                g, Reaction.kpp(), Bracket(np.full(5, 0.01), np.ones(5)))),
            ("allen-cahn cauchy", lambda: cauchy_elliptic_monotone(
                g, Reaction.allen_cahn(0.3), Bracket(np.zeros(5), np.full(5, 0.3))))]
    for k in range(n_random):
        gr = random_graph(rng, int(rng.integers(5, 11)))
        pr = random_partition(rng, gr, 2)
        lam1 = float(spectral.dirichlet_eigensystem(pr).eigenvalues[0])
        a = float(lam1 + rng.uniform(0.2, 2.0))
        runs.append((f"random dirichlet {k}", lambda pr=pr, a=a: elliptic_monotone(
            pr, "dirichlet", Reaction.logistic(a, 1.0))))
    return runs


def chain_suite(rng: np.random.Generator, n_random: int = 5, rel: float = 1e-12) -> dict:
    results = []
    for name, run in steady_runs(rng, n_random):
        res = run()
        results.append({"run": name, "chains_hold": res.chains_hold(rel), "iterations": res.iterations,
                        "gap": res.gap, **res.chain_defects()})
    return {"passed": all(r["chains_hold"] for r in results), "runs": results}


def run_all(seed: int, quick: bool = False) -> dict:
    rng = np.random.default_rng(seed)
    scale = 10 if quick else 1
    return {"heat_kernel": heat_kernel_suite(rng, max(2, 10 // scale)),
            "maximum_principle": max_principle_suite(rng, max(6, 200 // scale)),
            "ordering": ordering_suite(rng, max(3, 100 // scale)),
            "monotone_chains": chain_suite(rng, max(1, 5 // scale))}
