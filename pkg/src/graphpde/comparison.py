"""Numerical certificates for maximum and comparison principles.

A certificate evaluates the residual of ``v_t - Delta v - k v - source`` on a
sampled trajectory together with boundary and initial margins, and decides
whether the trajectory is a supersolution, a subsolution, both or neither.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import (DomainPartition, WeightedGraph, domain_laplacian_matrix, drift_matrix,
                    laplacian_matrix, normal_derivative_matrix)
from .linear import TimeSeries

SUPER, SUB, BOTH, NEITHER = "Supersolution", "Subsolution", "Both", "Neither"
PARABOLIC_IBVP, PARABOLIC_CAUCHY = "ParabolicIBVP", "ParabolicCauchy"
ELLIPTIC_BVP, ELLIPTIC_CAUCHY = "EllipticBVP", "EllipticCauchy"
NONNEG, STRICT = "Nonneg", "StrictInterior"
STRICT_FACTOR = 1e-14


def _verdict(lows, highs, tol):
    sup = all(v >= -tol for v in lows)
    sub = all(v <= tol for v in highs)
    if sup and sub:
        return BOTH
    return SUPER if sup else SUB if sub else NEITHER


@dataclass
class ResidualCertificate:
    kind: str
    min_residual: float
    min_boundary: float
    min_initial: float
    verdict: str
    tolerance: float
    max_residual: float = 0.0
    max_boundary: float = 0.0
    max_initial: float = 0.0
    location: dict = field(default_factory=dict)

    @property
    def supersolution(self) -> bool:
        return self.verdict in (SUPER, BOTH)

    @property
    def subsolution(self) -> bool:
        return self.verdict in (SUB, BOTH)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "verdict": self.verdict, "tolerance": self.tolerance,
                "min_residual": self.min_residual, "max_residual": self.max_residual,
                "min_boundary": self.min_boundary, "max_boundary": self.max_boundary,
                "min_initial": self.min_initial, "max_initial": self.max_initial,
                "location": self.location}


def default_tolerance(series: TimeSeries) -> float:
    dt = series.times[1] - series.times[0]
    return float(10.0 * dt * (1.0 + np.max(np.abs(series.states))))


def time_derivative(series: TimeSeries) -> np.ndarray:
    """Centered differences at interior times, first-order one-sided at the ends."""
    t, u = series.times, series.states
    if len(t) < 3:
        raise ValueError("need at least 3 time samples")
    d = np.empty_like(u)
    d[1:-1] = (u[2:] - u[:-2]) / (t[2:] - t[:-2])[:, None]
    d[0] = (u[1] - u[0]) / (t[1] - t[0])
    d[-1] = (u[-1] - u[-2]) / (t[-1] - t[-2])
    return d


def _as_field(value, n_times, width):
    if value is None:
        return np.zeros((n_times, width))
    arr = np.asarray(value, dtype=float)
    return np.broadcast_to(arr, (n_times, width)) if arr.ndim < 2 else arr


def certify_parabolic(series: TimeSeries, graph: WeightedGraph, partition: DomainPartition | None = None,
                      k=0.0, source: Callable | None = None, alpha=1.0, beta=0.0,
                      boundary_data=None, initial_data=None, tol: float | None = None) -> ResidualCertificate:
    """Certify ``v_t - Delta v - k v - source(t, v) >= 0`` (or <= 0) on a trajectory.

    ``source(t, v_domain)`` may depend on the state, which turns the check into a
    sub/supersolution test for a semilinear problem. The boundary margin is
    ``alpha v + beta dv/dn - boundary_data`` on the boundary and the initial margin
    ``v(., 0) - initial_data`` on the domain. Without a partition the problem is
    posed on the whole vertex set.
    """
    tol = default_tolerance(series) if tol is None else tol
    v, t = series.states, series.times
    vt = time_derivative(series)
    if partition is None:
        dom = np.arange(graph.n)
        lap = laplacian_matrix(graph) @ v.T
        kind = PARABOLIC_CAUCHY
    else:
        dom = partition.inner
        lap = domain_laplacian_matrix(partition) @ v[:, partition.closure].T
        kind = PARABOLIC_IBVP
    kk = _as_field(k, len(t), len(dom))
    res = vt[:, dom] - lap.T - kk * v[:, dom]
    if source is not None:
        res = res - np.array([np.broadcast_to(source(ti, vi[dom]), (len(dom),)) for ti, vi in zip(t, v)])
    # the residual is a statement about t in (0, T]
    inner = res[1:]
    i_lo = np.unravel_index(np.argmin(inner), inner.shape)
    loc = {"residual": {"time": float(t[1 + i_lo[0]]), "vertex": graph.vertices[dom[i_lo[1]]]}}
    init = v[0, dom] - _as_field(initial_data, 1, len(dom))[0]
    loc["initial"] = {"time": 0.0, "vertex": graph.vertices[dom[int(np.argmin(init))]]}
    if partition is None:
        bmin = bmax = 0.0
    else:
        vb = v[:, partition.outer]
        flux = (normal_derivative_matrix(partition) @ v[:, partition.closure].T).T
        a = _as_field(alpha, len(t), len(partition.outer))
        b = _as_field(beta, len(t), len(partition.outer))
        if np.any(a < 0) or np.any(b < 0) or np.any(a + b <= 0):
            raise ValueError("boundary operator needs alpha, beta >= 0 with alpha + beta > 0")
        margin = a * vb + b * flux - _as_field(boundary_data, len(t), len(partition.outer))
        bmin, bmax = float(margin.min()), float(margin.max())
        j = np.unravel_index(np.argmin(margin), margin.shape)
        loc["boundary"] = {"time": float(t[j[0]]), "vertex": graph.vertices[partition.outer[j[1]]]}
    lows = (float(inner.min()), bmin, float(init.min()))
    highs = (float(inner.max()), bmax, float(init.max()))
    return ResidualCertificate(kind, *lows, _verdict(lows, highs, tol), tol, *highs, location=loc)


@dataclass
class OrderingReport:
    ok: bool
    min_gap: float
    strict_margin: float
    first_crossing: float | None
    location: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "min_gap": self.min_gap, "strict_margin": self.strict_margin,
                "first_crossing": self.first_crossing, "location": self.location}


def assert_ordering(upper: TimeSeries, lower: TimeSeries, tol: float = 1e-10,
                    domain=None) -> OrderingReport:
    """Check upper >= lower - tol everywhere; ``strict_margin`` is min(upper - lower) over domain x (0, T]."""
    if upper.states.shape != lower.states.shape or not np.allclose(upper.times, lower.times, rtol=0, atol=1e-14):
        raise ValueError("series live on different grids")
    gap = upper.states - lower.states
    bad = np.nonzero(np.any(gap < -tol, axis=1))[0]
    first, loc = None, {}
    if len(bad):
        first = float(upper.times[bad[0]])
        loc = {"time": first, "vertex": upper.vertices[int(np.argmin(gap[bad[0]]))]}
    dom = np.arange(gap.shape[1]) if domain is None else np.asarray(domain)
    strict = float(gap[1:, dom].min()) if len(gap) > 1 else float(gap[:, dom].min())
    return OrderingReport(not len(bad), float(gap.min()), strict, first, loc)


def certify_elliptic(graph: WeightedGraph, u, rhs=0.0, c=0.0, drift=None,
                     partition: DomainPartition | None = None, kind: str = "dirichlet",
                     boundary_data=0.0, reaction: Callable | None = None,
                     tol: float = 1e-10) -> ResidualCertificate:
    """Classify u by the sign of ``-Delta u - b.grad u + c u - rhs - reaction(u)``.

    Without a partition the operator acts on the whole graph. With a partition
    the residual is taken on the interior and the boundary margin is
    ``u - data`` (Dirichlet) or ``du/dn - data`` (Neumann).
    """
    u = graph.function(u)
    if partition is None:
        dom = np.arange(graph.n)
        a = -laplacian_matrix(graph)
        if drift is not None:
            a = a - drift_matrix(graph, drift)
        lu = a @ u
        ekind = ELLIPTIC_CAUCHY
    else:
        if drift is not None:
            raise ValueError("drift is only supported without a boundary")
        dom = partition.inner
        lu = -domain_laplacian_matrix(partition) @ u[partition.closure]
        ekind = ELLIPTIC_BVP
    res = lu + np.broadcast_to(np.asarray(c, dtype=float), (len(dom),)) * u[dom] \
        - np.broadcast_to(np.asarray(rhs, dtype=float), (len(dom),))
    if reaction is not None:
        res = res - reaction(u[dom])
    loc = {"residual": {"vertex": graph.vertices[dom[int(np.argmin(res))]]}}
    bmin = bmax = 0.0
    if partition is not None:
        if kind == "dirichlet":
            margin = u[partition.outer] - boundary_data
        elif kind == "neumann":
            margin = normal_derivative_matrix(partition) @ u[partition.closure] - boundary_data
        else:
            raise ValueError(f"unknown boundary kind {kind!r}")
        margin = np.atleast_1d(margin)
        bmin, bmax = float(margin.min()), float(margin.max())
    lows = (float(res.min()), bmin, 0.0)
    highs = (float(res.max()), bmax, 0.0)
    return ResidualCertificate(ekind, *lows, _verdict(lows, highs, tol), tol, *highs, location=loc)


@dataclass
class PositivityReport:
    mode: str
    ok: bool
    minimum: float
    threshold: float
    location: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"mode": self.mode, "ok": self.ok, "minimum": self.minimum,
                "threshold": self.threshold, "location": self.location}


def check_positivity(values, domain=None, mode: str = NONNEG, tol: float = 1e-12) -> PositivityReport:
    """Nonneg: min >= -tol. StrictInterior: min over domain x (0, T] > 1e-14 * sup norm.

    ``values`` is a TimeSeries or a single function; ``domain`` restricts the
    vertices (e.g. the interior) and defaults to all of them.
    """
    if isinstance(values, TimeSeries):
        arr, times, names = values.states, values.times, values.vertices
    else:
        arr = np.atleast_2d(np.asarray(values, dtype=float))
        times, names = np.zeros(1), None
    dom = np.arange(arr.shape[1]) if domain is None else np.asarray(domain)
    if mode == STRICT:
        sub = arr[1:, dom] if len(arr) > 1 else arr[:, dom]
        offset = 1 if len(arr) > 1 else 0
        threshold = STRICT_FACTOR * float(np.max(np.abs(arr))) if arr.size else 0.0
        ok = sub.size > 0 and float(sub.min()) > threshold
    elif mode == NONNEG:
        sub, offset, threshold = arr[:, dom], 0, -tol
        ok = float(sub.min()) >= threshold
    else:
        raise ValueError(f"unknown positivity mode {mode!r}")
    i, j = np.unravel_index(np.argmin(sub), sub.shape)
    loc = {"time": float(times[i + offset]), "vertex": names[dom[j]] if names else int(dom[j])}
    return PositivityReport(mode, bool(ok), float(sub.min()), threshold, loc)
