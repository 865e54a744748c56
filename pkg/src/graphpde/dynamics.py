"""Semilinear time integration and long-time behaviour classifiers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import spectral
from .graph import (DomainPartition, WeightedGraph, domain_laplacian_matrix, laplacian_matrix,
                    normal_derivative_matrix)
from .linear import CAUCHY, DIRICHLET, NEUMANN, TimeSeries, elliptic_residual
from .monotone import Reaction, elliptic_monotone, lipschitz_constant

EXTINCTION = "Extinction"
TO_STATE = "ConvergenceToState"
TO_CONSTANT = "ConvergenceToConstant"
UNDECIDED = "Undecided"

EXTINCTION_LEVEL = 1e-3
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class BlowUpError(RuntimeError):
    def __init__(self, time: float):
        super().__init__(f"non-finite state at t = {time:.6g}")
        self.time = time


@dataclass
class Scenario:
    graph: WeightedGraph
    kind: str
    reaction: Reaction
    u0: np.ndarray
    T: float
    dt: float = 1e-3
    stride: int = 1
    partition: DomainPartition | None = None
    boundary: Callable | np.ndarray | float | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0 or self.stride < 1:
            raise ValueError("need dt > 0, T > 0 and stride >= 1")
        if self.kind not in (DIRICHLET, NEUMANN, CAUCHY):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind != CAUCHY and self.partition is None:
            raise ValueError(f"{self.kind} scenarios need a partition")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def initial_state(self) -> np.ndarray:
        """u0 over all vertices; interior-only data is padded with boundary values at t=0."""
        g = self.graph
        u0 = np.asarray(self.u0, dtype=float)
        if u0.ndim == 0:
            u = np.full(g.n, float(u0))
        elif u0.shape == (g.n,):
            u = u0.copy()
        elif self.partition is not None and u0.shape == (self.partition.n_interior,):
            u = np.zeros(g.n)
            u[self.partition.inner] = u0
            if self.kind == NEUMANN:
                u[self.partition.outer] = spectral.neumann_extension(self.partition) @ u0
        else:
            raise ValueError(f"initial data has shape {u0.shape}")
        if self.kind == DIRICHLET:
            u[self.partition.outer] = self.boundary_at(0.0)
        return u

    def boundary_at(self, t: float) -> np.ndarray:
        nb = len(self.partition.outer)
        bd = self.boundary
        if bd is None:
            return np.zeros(nb)
        val = bd(t) if callable(bd) else bd
        return np.broadcast_to(np.asarray(val, dtype=float), (nb,))


def integrate(s: Scenario) -> TimeSeries:
    """IMEX stepping (I - dt Delta) u^{n+1} = u^n + dt f(u^n) with boundary rows.

    Dirichlet rows set u = g, Neumann rows set du/dn = g, both at the new time.
    The implicit matrix is factored once.
    """
    g, dt = s.graph, s.dt
    n = g.n
    f = s.reaction
    if s.kind == CAUCHY:
        a = np.eye(n) - dt * laplacian_matrix(g)
        dom = np.arange(n)
        order = dom
    else:
        p = s.partition
        m = p.n_interior
        order = p.closure
        a = np.zeros((n, n))
        a[:m, :] = -dt * domain_laplacian_matrix(p)
        a[:m, :m] += np.eye(m)
        if s.kind == DIRICHLET:
            a[m:, m:] = np.eye(n - m)
        else:
            a[m:, :] = normal_derivative_matrix(p)
        dom = p.inner
    lu = lu_factor(a)
    # with small graphs one dense product per step is cheaper than a triangular solve
    inv = lu_solve(lu, np.eye(n))
    u = s.initial_state()
    steps = s.n_steps
    times = [0.0]
    states = [u.copy()]
    x = u[order]
    m = len(dom)
    rhs = np.zeros(n)
    live_boundary = s.kind != CAUCHY and callable(s.boundary)
    if s.kind != CAUCHY and not live_boundary:
        rhs[m:] = s.boundary_at(0.0)
    fn = f._f
    for k in range(1, steps + 1):
        t = k * dt
        xi = x[:m]
        rhs[:m] = xi + dt * fn(xi)
        if live_boundary:
            rhs[m:] = s.boundary_at(t)
        x = inv @ rhs
        if not np.all(np.isfinite(x)):
            raise BlowUpError(t)
        if k % s.stride == 0 or k == steps:
            out = np.empty(n)
            out[order] = x
            times.append(t)
            states.append(out)
    return TimeSeries(np.array(times), np.array(states), g.vertices,
                      {"scheme": "imex", "dt": dt, "kind": s.kind})


@dataclass
class Classification:
    outcome: str
    state: np.ndarray | None = None
    value: float | None = None
    lambda1: float | None = None
    threshold_margin: float | None = None
    criterion_2c: list = field(default_factory=list)
    steady_state: np.ndarray | None = None
    evidence: dict = field(default_factory=dict)
    expected: str | None = None
    hypotheses_ok: bool = True
    series: TimeSeries | None = None

    def as_dict(self) -> dict:
        return {"outcome": self.outcome, "expected": self.expected, "value": self.value,
                "state": self.state, "lambda1": self.lambda1, "threshold_margin": self.threshold_margin,
                "criterion_2c": self.criterion_2c, "steady_state": self.steady_state,
                "hypotheses_ok": self.hypotheses_ok, "evidence": self.evidence}


def _sup_trail(series: TimeSeries, dom) -> np.ndarray:
    return np.max(np.abs(series.states[:, dom]), axis=1)


def extinction_evidence(series: TimeSeries, dom, level: float = EXTINCTION_LEVEL, tail: float = 0.25) -> dict:
    """Final sup norm, monotone decrease over the trailing fraction, and log-slope of the tail."""
    trail = _sup_trail(series, dom)
    k0 = int(len(trail) * (1 - tail))
    tail_vals = trail[k0:]
    monotone = bool(np.all(np.diff(tail_vals) <= 1e-15 * max(1.0, tail_vals[0])))
    positive = tail_vals > 0
    slope = None
    if np.sum(positive) >= 2:
        tt = series.times[k0:][positive]
        slope = float(np.polyfit(tt, np.log(tail_vals[positive]), 1)[0])
    return {"final_sup": float(trail[-1]), "tail_monotone": monotone, "log_slope": slope,
            "level": level, "extinct": bool(trail[-1] <= level and monotone)}


def classify_logistic_dirichlet(partition: DomainPartition, a: float, b: float, u0, T: float = 200.0,
                                dt: float = 1e-2, stride: int = 10, data=0.0, state_tol: float = 1e-4,
                                tol: float = 1e-10) -> Classification:
    """Extinction when a <= lambda_1, convergence to the positive steady state when a > lambda_1."""
    if a <= 0 or b <= 0:
        raise ValueError("need a, b > 0")
    f = Reaction.logistic(a, b)
    lam1 = float(spectral.dirichlet_eigensystem(partition).eigenvalues[0])
    sc = Scenario(partition.graph, DIRICHLET, f, u0, T, dt, stride, partition, data)
    series = integrate(sc)
    dom = partition.inner
    margin = a - lam1
    expected = EXTINCTION if margin <= 1e-12 else TO_STATE
    ev = {"sup_trail": _sup_trail(series, dom)[:: max(1, len(series.times) // 200)]}
    out = Classification(UNDECIDED, lambda1=lam1, threshold_margin=margin, expected=expected, series=series)
    if expected == EXTINCTION:
        ext = extinction_evidence(series, dom)
        ev.update(ext)
        if ext["extinct"]:
            out.outcome = EXTINCTION
        elif ext["tail_monotone"] and ext["log_slope"] is not None and ext["log_slope"] < 0:
            # algebraic decay at the threshold: trend passes, level not yet reached
            out.outcome = EXTINCTION
            ev["slow_decay"] = True
    else:
        res = elliptic_monotone(partition, DIRICHLET, f, data, tol=tol)
        dist = float(np.max(np.abs(series.final - res.minimal)))
        ev.update({"distance_to_steady": dist, "steady_residual": res.residual,
                   "steady_gap": res.gap, "steady_iterations": res.iterations})
        out.steady_state = res.minimal
        if dist <= state_tol:
            out.outcome = TO_STATE
            out.state = series.final
    out.evidence = ev
    return out


def scalar_ode_bound(f: Callable, z0: float, T: float, dt: float = 1e-3, times=None):
    """Classical RK4 for z' = f(z). Returns (times, z); ``times`` optionally picks output points."""
    n = int(round(T / dt))
    z = np.empty(n + 1)
    z[0] = z0
    for k in range(n):
        y = z[k]
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        z[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(z[k + 1]) or abs(z[k + 1]) > 1e150:
            raise BlowUpError((k + 1) * dt)
    grid = np.linspace(0.0, n * dt, n + 1)
    if times is None:
        return grid, z
    return np.asarray(times, dtype=float), np.interp(times, grid, z)


def classify_logistic_neumann(partition: DomainPartition, a: float, b: float, u0, T: float = 50.0,
                              dt: float = 1e-3, stride: int = 10, tol: float = 1e-6) -> Classification:
    """Convergence to a/b, with the trajectory sandwiched between the scalar logistic ODE solutions."""
    if a <= 0 or b <= 0:
        raise ValueError("need a, b > 0")
    f = Reaction.logistic(a, b)
    sc = Scenario(partition.graph, NEUMANN, f, u0, T, dt, stride, partition, None)
    series = integrate(sc)
    dom = partition.closure
    u_init = series.states[0, partition.inner]
    lo, hi = float(u_init.min()), float(u_init.max())
    ode = lambda z: z * (a - b * z)  # noqa: E731
    _, z_lo = scalar_ode_bound(ode, lo, T, dt, series.times)
    _, z_hi = scalar_ode_bound(ode, hi, T, dt, series.times)
    slack = 10 * dt * (1 + float(np.max(np.abs(series.states))))
    u = series.states[:, dom]
    below = float(np.max(z_lo[:, None] - u))
    above = float(np.max(u - z_hi[:, None]))
    dist = float(np.max(np.abs(series.final[dom] - a / b)))
    out = Classification(UNDECIDED, value=a / b, expected=TO_CONSTANT, series=series)
    out.evidence = {"distance_to_constant": dist, "sandwich_slack": slack,
                    "sandwich_lower_violation": below, "sandwich_upper_violation": above,
                    "sandwich_ok": bool(below <= slack and above <= slack)}
    if dist <= tol:
        out.outcome = TO_CONSTANT
    return out


def kpp_hypotheses(f: Reaction, samples: int = 401) -> dict:
    """Sample checks: f(0) = f(1) = 0, f > 0 on (0,1), f(u)/u nonincreasing on (0,1]."""
    u = np.linspace(0.0, 1.0, samples)[1:]
    vals = f(u)
    ratio = vals / u
    ends = abs(float(f(np.array([0.0]))[0])) <= 1e-12 and abs(float(f(np.array([1.0]))[0])) <= 1e-12
    positive = bool(np.all(vals[:-1] > 0))
    increases = np.diff(ratio) > 1e-12
    checks = {"endpoints_zero": bool(ends), "positive_inside": positive,
              "ratio_nonincreasing": bool(not np.any(increases))}
    if np.any(increases):
        checks["ratio_increase_at"] = float(u[1:][np.argmax(increases)])
    checks["ok"] = all(v for k, v in checks.items() if isinstance(v, bool))
    return checks


def classify_kpp_cauchy(graph: WeightedGraph, f: Reaction, u0, T: float = 100.0, dt: float = 1e-3,
                        stride: int = 100, tol: float = 1e-6) -> Classification:
    """Convergence to the constant 1; hypothesis failures are flagged but the run still happens."""
    hyp = kpp_hypotheses(f)
    u0 = graph.function(u0)
    series = integrate(Scenario(graph, CAUCHY, f, u0, T, dt, stride))
    dist = float(np.max(np.abs(series.final - 1.0)))
    out = Classification(UNDECIDED, value=1.0, expected=TO_CONSTANT, hypotheses_ok=hyp["ok"], series=series)
    out.evidence = {"hypotheses": hyp, "distance_to_constant": dist,
                    "initial_nonneg": bool(np.all(u0 >= 0) and np.any(u0 > 0))}
    if dist <= tol:
        out.outcome = TO_CONSTANT
    return out


def _golden_max(fn, lo, hi, iters=200):
    a, b = lo, hi
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < 1e-15 * max(1.0, abs(a)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def s_of_rho(f: Reaction, alpha: float, rho: float, samples: int = 401) -> tuple[float, float]:
    """sup over u in (alpha, 1) of f(u) / (u - rho), returned as (value, argmax).

    Polynomial reactions use the stationary points (roots of f'(u)(u - rho) - f(u))
    together with the endpoint limits; other reactions a sampled maximum refined
    by golden-section search.
    """
    if not 0 <= rho < alpha:
        raise ValueError("rho must lie in [0, alpha)")
    ratio = lambda u: float(f(np.array([u]))[0] / (u - rho))  # noqa: E731
    if f.poly is not None:
        from numpy.polynomial import Polynomial
        q = f.poly.deriv() * Polynomial([-rho, 1.0]) - f.poly
        cands = [alpha, 1.0]
        if q.degree() >= 1:
            cands += [r.real for r in np.atleast_1d(q.roots()) if abs(r.imag) < 1e-10 and alpha < r.real < 1]
        vals = [ratio(u) for u in cands]
        k = int(np.argmax(vals))
        return float(vals[k]), float(cands[k])
    grid = np.linspace(alpha, 1.0, samples + 2)[1:-1]
    vals = np.array([ratio(u) for u in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    x, v = _golden_max(ratio, lo, hi)
    if vals[k] > v:
        return float(vals[k]), float(grid[k])
    return float(v), float(x)


def allen_cahn_criterion(graph: WeightedGraph, f: Reaction, u0, alpha: float | None = None,
                         n_rho: int = 256) -> dict:
    """Scan rho_k = alpha k / n_rho for e^{1/2} [u0 - rho]^+ mu(x) < alpha - rho at every vertex."""
    alpha = f.params.get("alpha") if alpha is None else alpha
    if alpha is None:
        raise ValueError("need the intermediate root alpha")
    u0 = graph.function(u0)
    mu = graph.measure
    admissible, s_vals, best_slack = [], [], None
    for k in range(n_rho):
        rho = alpha * k / n_rho
        slack = (alpha - rho) - np.exp(0.5) * np.maximum(u0 - rho, 0.0) * mu
        if np.all(slack > 0):
            admissible.append(rho)
            s_vals.append(s_of_rho(f, alpha, rho)[0])
        if best_slack is None or slack.min() > best_slack[1].min():
            best_slack = (rho, slack)
    rho_b, slack_b = best_slack
    return {"alpha": alpha, "admissible_rho": admissible, "s_values": s_vals,
            "holds": bool(admissible), "s0": s_of_rho(f, alpha, 0.0)[0],
            "best_rho": rho_b, "vertex_slack": dict(zip(graph.vertices, slack_b.tolist())),
            "binding_vertex": graph.vertices[int(np.argmin(slack_b))],
            "propagation": bool(np.all(u0 > alpha))}


def classify_allen_cahn(graph: WeightedGraph, f: Reaction, u0, T: float = 100.0, dt: float = 1e-3,
                        stride: int = 100, tol: float = 1e-6) -> Classification:
    """Use the criterion scan to predict the limit, then confirm by integration."""
    crit = allen_cahn_criterion(graph, f, u0)
    expected = EXTINCTION if crit["holds"] else TO_CONSTANT if crit["propagation"] else None
    series = integrate(Scenario(graph, CAUCHY, f, graph.function(u0), T, dt, stride))
    dom = np.arange(graph.n)
    ext = extinction_evidence(series, dom)
    dist_one = float(np.max(np.abs(series.final - 1.0)))
    out = Classification(UNDECIDED, expected=expected, series=series,
                         criterion_2c=crit["admissible_rho"])
    out.evidence = {"criterion": crit, **ext, "distance_to_one": dist_one}
    if expected == EXTINCTION and ext["extinct"]:
        out.outcome = EXTINCTION
    elif expected == TO_CONSTANT and dist_one <= tol:
        out.outcome, out.value = TO_CONSTANT, 1.0
    return out


def steady_state_detect(series: TimeSeries, window: int, tol: float,
                        residual: Callable | None = None) -> tuple[np.ndarray, float] | None:
    """Terminal state and the time from which it holds, or None.

    Detection needs the sup-variation over the trailing ``window`` samples to be
    at most ``tol`` and, if given, ``residual(state) <= 10 tol``. The reported
    time is the end of the earliest window from which the series stays within
    ``tol`` of its final value.
    """
    states = series.states
    if len(states) < window or window < 1:
        return None
    tail = states[-window:]
    if float(np.max(tail.max(axis=0) - tail.min(axis=0))) > tol:
        return None
    final = states[-1]
    if residual is not None and residual(final) > 10 * tol:
        return None
    dev = np.max(np.abs(states - final), axis=1)
    outside = np.nonzero(dev > tol / 2)[0]
    start = 0 if not len(outside) else outside[-1] + 1
    idx = min(start + window - 1, len(states) - 1)
    return final.copy(), float(series.times[idx])


def logistic_steady_residual(partition: DomainPartition, a: float, b: float, data=0.0) -> Callable:
    f = Reaction.logistic(a, b)

    def resid(u):
        eq, bc = elliptic_residual(partition.graph, DIRICHLET, u, 0.0, f(u[partition.inner]), data,
                                   partition=partition)
        return max(eq, bc)
    return resid


def comparison_dt_limit(f: Reaction, lo: float, hi: float) -> float:
    """Steps below 1 / Lipschitz keep the explicit reaction update order preserving."""
    m = lipschitz_constant(f, lo, hi, safety=1.0)
    return np.inf if m == 0 else 1.0 / m
