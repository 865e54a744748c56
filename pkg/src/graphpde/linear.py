"""Spectral solutions of linear parabolic problems and direct linear elliptic solves.

Parabolic solutions are built mode by mode::

    v_j(t) = exp(-r_j t) v_j(0) + int_0^t exp(-r_j (t - s)) h_j(s) ds,   r_j = lambda_j + c

with the forcing integral evaluated by exponentially weighted Simpson
(product) quadrature on a refined grid, exact for forcing that is quadratic
between sub-grid nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from . import spectral
from .graph import (DomainPartition, WeightedGraph, laplacian_matrix, drift_matrix,
                    normal_derivative_matrix, domain_laplacian_matrix)

DIRICHLET, NEUMANN, CAUCHY = "dirichlet", "neumann", "cauchy"
REFINE = 10
SERIES_CUTOFF = 0.5


class SolverError(RuntimeError):
    pass


@dataclass
class TimeSeries:
    """States in host-graph vertex order, one row per grid time."""

    times: np.ndarray
    states: np.ndarray
    vertices: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (len(self.times), len(self.vertices)):
            raise ValueError("states must have shape (len(times), len(vertices))")

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.states[k]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        rows = ["t," + ",".join(self.vertices)]
        for t, row in zip(self.times, self.states):
            rows.append(",".join(f"{v:.17g}" for v in (t, *row)))
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        from .io import atomic_write
        atomic_write(Path(path), self.to_csv())


@dataclass
class LinearParabolicProblem:
    """u_t - Delta u + shift * u = forcing, with boundary data and initial state.

    ``forcing`` and ``boundary`` are None, a callable ``t -> values``, a
    constant (scalar or one value per vertex) or an array sampled on the output
    grid (rows = times). Forcing lives on the
    interior (or on V for Cauchy problems); boundary data on the boundary
    vertices in partition order.
    """

    graph: WeightedGraph
    kind: str
    u0: np.ndarray
    partition: DomainPartition | None = None
    shift: float = 0.0
    forcing: Callable | np.ndarray | None = None
    boundary: Callable | np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN, CAUCHY):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind != CAUCHY and self.partition is None:
            raise ValueError(f"{self.kind} problems need a partition")
        if self.kind == CAUCHY:
            self.partition = None
            if self.boundary is not None:
                raise ValueError("Cauchy problems take no boundary data")

    @property
    def domain(self) -> np.ndarray:
        return self.graph.indices(self.graph.vertices) if self.partition is None else self.partition.inner

    def initial(self) -> np.ndarray:
        u0 = np.asarray(self.u0, dtype=float)
        if u0.ndim == 0:
            return np.full(len(self.domain), float(u0))
        if u0.shape == (self.graph.n,):
            return u0[self.domain]
        if u0.shape == (len(self.domain),):
            return u0
        raise ValueError(f"initial data has shape {u0.shape}")


# --- quadrature --------------------------------------------------------------

def _moments(r, length):
    """int_0^L exp(-r s) s^k ds for k = 0, 1, 2, vectorised over r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = r * length
    m = np.empty((3, r.size))
    small = np.abs(x) < SERIES_CUTOFF
    if np.any(small):
        rs = r[small]
        for k in range(3):
            term = np.full(rs.size, length ** (k + 1))
            total = term / (k + 1)
            for n in range(1, 30):
                term = term * (-rs * length) / n
                total = total + term / (n + k + 1)
            m[k, small] = total
    big = ~small
    if np.any(big):
        rb = r[big]
        e = np.exp(-rb * length)
        m0 = -np.expm1(-rb * length) / rb
        m1 = (m0 - length * e) / rb
        m2 = (2.0 * m1 - length ** 2 * e) / rb
        m[0, big], m[1, big], m[2, big] = m0, m1, m2
    return m


def _quadratic_weights(r, h, length):
    """Weights for nodes at distance 0, h, 2h back from the end, integrated over [0, length]."""
    m0, m1, m2 = _moments(r, length)
    w_end = (m2 - 3 * h * m1 + 2 * h * h * m0) / (2 * h * h)
    w_mid = (2 * h * m1 - m2) / (h * h)
    w_start = (m2 - h * m1) / (2 * h * h)
    return w_end, w_mid, w_start


def duhamel(samples, h: float, rates) -> np.ndarray:
    """Values of int_0^{t_k} exp(-r (t_k - s)) f(s) ds at every even sub-grid node.

    ``samples`` has shape (K + 1, n_modes) on a uniform grid of spacing ``h``
    with K even; ``rates`` has length n_modes. Returns shape (K//2 + 1, n_modes).
    """
    f = np.asarray(samples, dtype=float)
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if f.ndim == 1:
        f = f[:, None]
    k = f.shape[0] - 1
    if k % 2:
        raise ValueError("need an even number of panels")
    out = np.zeros((k // 2 + 1, f.shape[1]))
    if k == 0:
        return out
    w_end, w_mid, w_start = _quadratic_weights(rates, h, 2 * h)
    pair = w_end * f[2::2] + w_mid * f[1::2] + w_start * f[0:-1:2]
    decay = np.exp(-2 * h * rates)
    for j in range(f.shape[1]):
        out[1:, j] = lfilter([1.0], [1.0, -decay[j]], pair[:, j])
    return out


def forcing_mode_integral(samples, times, rate: float, t: float | None = None) -> float:
    """int_0^t exp(rate * s) h(s) ds from samples of h on a uniform grid.

    Composite Simpson with exponential weights: exact whenever h is quadratic
    on each pair of panels. ``t`` must be a grid node (default: last node).
    """
    h_vals = np.asarray(samples, dtype=float)
    times = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(h_vals)):
        raise SolverError("non-finite forcing samples")
    if t is None:
        t = times[-1]
    k = int(round((t - times[0]) / (times[1] - times[0]))) if len(times) > 1 else 0
    if k == 0:
        return 0.0
    step = times[1] - times[0]
    if not np.allclose(np.diff(times[:k + 1]), step, rtol=1e-9, atol=0):
        raise SolverError("forcing samples must lie on a uniform grid")
    vals = h_vals[:k + 1]
    r = np.array([rate])
    if k % 2 == 0:
        d = duhamel(vals, step, r)[-1, 0]
    elif k == 1:
        # single panel: linear interpolation through the two end points
        m0, m1, _ = _moments(r, step)
        d = (m0[0] - m1[0] / step) * vals[1] + m1[0] / step * vals[0]
    else:
        d = duhamel(vals[:k], step, r)[-1, 0]
        w_end, w_mid, w_start = _quadratic_weights(r, step, step)
        d = np.exp(-rate * step) * d + w_end[0] * vals[k] + w_mid[0] * vals[k - 1] + w_start[0] * vals[k - 2]
    if rate == 0:
        return float(d)
    return float(np.exp(rate * (t - times[0])) * d)


# --- grids and sampling ----------------------------------------------------------

def _check_grid(times) -> tuple[np.ndarray, float]:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or times[0] != 0:
        raise SolverError("time grid must start at 0")
    if len(times) == 1:
        return times, 0.0
    step = times[1] - times[0]
    if step <= 0 or not np.allclose(np.diff(times), step, rtol=1e-9, atol=1e-15):
        raise SolverError("time grid must be uniform and increasing")
    return times, float(step)


def _sample(data, times, fine, width):
    """Evaluate callable data on the fine grid, or interpolate grid samples linearly."""
    if data is None:
        return np.zeros((len(fine), width))
    if callable(data):
        out = np.array([np.broadcast_to(np.asarray(data(t), dtype=float), (width,)) for t in fine])
    else:
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 0:
            return np.full((len(fine), width), float(arr))
        if arr.ndim == 1 and arr.shape == (width,):
            # constant in time
            return np.broadcast_to(arr, (len(fine), width)).copy()
        if arr.shape != (len(times), width):
            raise SolverError(f"sampled data must have shape {(len(times), width)}, got {arr.shape}")
        out = np.empty((len(fine), width))
        for j in range(width):
            out[:, j] = np.interp(fine, times, arr[:, j])
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite forcing or boundary data")
    return out


def _modal_solution(es, rates, c0, forcing_modes, times, step):
    """Mode coefficients on the output grid."""
    decay = np.exp(-np.outer(times, rates))
    coef = decay * c0[None, :]
    if forcing_modes is not None and len(times) > 1:
        d = duhamel(forcing_modes, step / REFINE, rates)
        coef = coef + d[::REFINE // 2]
    return coef


def _fine_grid(times, step):
    if len(times) == 1:
        return times.copy()
    return np.linspace(0.0, times[-1], (len(times) - 1) * REFINE + 1)


# --- parabolic solvers ---------------------------------------------------------------

def solve_ibvp_dirichlet(p: LinearParabolicProblem, times) -> TimeSeries:
    if p.kind != DIRICHLET:
        raise SolverError("expected a Dirichlet problem")
    times, step = _check_grid(times)
    part, g = p.partition, p.graph
    es = spectral.dirichlet_eigensystem(part)
    fine = _fine_grid(times, step)
    m, nb = part.n_interior, len(part.boundary)
    lift = g.weights[np.ix_(part.inner, part.outer)] / g.measure[part.inner][:, None]
    bvals = _sample(p.boundary, times, fine, nb)
    forcing = _sample(p.forcing, times, fine, m) + bvals @ lift.T
    rates = es.eigenvalues + p.shift
    coef = _modal_solution(es, rates, es.coefficients(p.initial()), es.coefficients(forcing), times, step)
    states = np.zeros((len(times), g.n))
    states[:, part.inner] = es.synthesize(coef)
    states[0, part.inner] = p.initial()
    states[:, part.outer] = bvals[::REFINE] if len(times) > 1 else bvals
    return TimeSeries(times, states, g.vertices, {"kind": DIRICHLET, "eigenvalues": es.eigenvalues.tolist()})


def neumann_lift_matrix(part: DomainPartition, sign: float = 1.0):
    """Map boundary flux data g to (I, u_hat) with sign*Delta u_hat = I on the interior.

    I is the constant sign * (int_boundary g dmu) / Vol(interior), which makes the
    problem compatible; u_hat has zero mu-mean on the interior and satisfies
    d u_hat / dn = g. Returns (i_row, lift) with I = i_row @ g and u_hat = lift @ g
    (u_hat over the closure, interior first).
    """
    g = part.graph
    m, nb = part.n_interior, len(part.boundary)
    mu_in, mu_out = g.measure[part.inner], g.measure[part.outer]
    vol = mu_in.sum()
    i_row = sign * mu_out / vol
    a = np.zeros((m + nb + 1, m + nb + 1))
    a[:m, :m + nb] = sign * domain_laplacian_matrix(part)
    a[m:m + nb, :m + nb] = normal_derivative_matrix(part)
    a[:m, -1] = 1.0
    a[-1, :m] = mu_in
    rhs = np.zeros((m + nb + 1, nb))
    rhs[:m, :] = i_row[None, :]
    rhs[m:m + nb, :] = np.eye(nb)
    sol = np.linalg.solve(a, rhs)
    if np.max(np.abs(sol[-1])) > 1e-8 * max(1.0, np.max(np.abs(sol))):
        raise SolverError("incompatible Neumann data")
    return i_row, sol[:-1]


def solve_ibvp_neumann(p: LinearParabolicProblem, times) -> TimeSeries:
    if p.kind != NEUMANN:
        raise SolverError("expected a Neumann problem")
    times, step = _check_grid(times)
    part, g = p.partition, p.graph
    es = spectral.neumann_eigensystem(part)
    fine = _fine_grid(times, step)
    m, nb = part.n_interior, len(part.boundary)
    rates = es.eigenvalues + p.shift
    forcing = _sample(p.forcing, times, fine, m)
    u0 = p.initial()
    if p.boundary is None:
        hat = np.zeros((len(fine), m + nb))
        i_vals = np.zeros(len(fine))
    else:
        i_row, lift = neumann_lift_matrix(part, sign=1.0)
        bvals = _sample(p.boundary, times, fine, nb)
        hat = bvals @ lift.T
        i_vals = bvals @ i_row
    hat_modes = es.coefficients(hat[:, :m])
    psi = es.coefficients(u0 - hat[0, :m])
    h_modes = es.coefficients(forcing + i_vals[:, None]) - p.shift * hat_modes
    coef = _modal_solution(es, rates, psi, h_modes, times, step)
    # the -d(u_hat)/dt part of the forcing, integrated by parts
    coarse_hat = hat_modes[::REFINE] if len(times) > 1 else hat_modes
    decay = np.exp(-np.outer(times, rates))
    coef -= coarse_hat - decay * hat_modes[0][None, :]
    if len(times) > 1:
        coef += rates[None, :] * duhamel(hat_modes, step / REFINE, rates)[::REFINE // 2]
    interior = es.synthesize(coef)
    states = np.zeros((len(times), g.n))
    coarse = hat[::REFINE] if len(times) > 1 else hat
    states[:, part.inner] = interior + coarse[:, :m]
    states[:, part.outer] = interior @ es.extension.T + coarse[:, m:]
    states[0, part.inner] = u0
    return TimeSeries(times, states, g.vertices, {"kind": NEUMANN, "eigenvalues": es.eigenvalues.tolist()})


def solve_cauchy(p: LinearParabolicProblem, times) -> TimeSeries:
    if p.kind != CAUCHY:
        raise SolverError("expected a Cauchy problem")
    times, step = _check_grid(times)
    g = p.graph
    es = spectral.full_eigensystem(g)
    fine = _fine_grid(times, step)
    rates = es.eigenvalues + p.shift
    forcing = _sample(p.forcing, times, fine, g.n)
    coef = _modal_solution(es, rates, es.coefficients(p.initial()), es.coefficients(forcing), times, step)
    states = es.synthesize(coef)
    states[0] = p.initial()
    return TimeSeries(times, states, g.vertices, {"kind": CAUCHY, "eigenvalues": es.eigenvalues.tolist()})


def solve_parabolic(p: LinearParabolicProblem, times) -> TimeSeries:
    return {DIRICHLET: solve_ibvp_dirichlet, NEUMANN: solve_ibvp_neumann,
            CAUCHY: solve_cauchy}[p.kind](p, times)


# --- elliptic solves -----------------------------------------------------------------

def coercivity_margin(shift: float, drift, c) -> float:
    """M + min c - |b|^2 / 2 - 1, with |b| the max-norm of the drift."""
    b = np.atleast_1d(np.asarray(drift, dtype=float))
    c0 = float(np.min(c))
    return float(shift + c0 - np.max(np.abs(b)) ** 2 / 2.0 - 1.0)


def solve_elliptic_shifted(graph: WeightedGraph, kind: str, shift: float, rhs,
                           data=None, partition: DomainPartition | None = None,
                           drift=None, c=None, eigensystem=None) -> np.ndarray:
    """Solve (-Delta + shift) u = rhs with boundary data, returning u on every vertex.

    Dirichlet and Cauchy problems use a dense LU solve; Neumann problems use the
    spectral quotient F_i / (K_i + shift) plus a boundary lift. The Cauchy form
    accepts a drift b and zeroth-order coefficient c:
    (-Delta - b.grad + c + shift) u = rhs.
    """
    if kind == CAUCHY:
        n = graph.n
        c = np.zeros(n) if c is None else graph.function(c)
        a = -laplacian_matrix(graph) + np.diag(c + shift)
        if drift is not None:
            b = graph.function(drift)
            if np.any(b < 0):
                raise SolverError("drift must be nonnegative")
            if coercivity_margin(shift, b, c) <= 0:
                warnings.warn("shift does not satisfy the coercivity margin", RuntimeWarning, stacklevel=2)
            a -= drift_matrix(graph, b)
        elif shift + np.min(c) <= 0:
            raise SolverError("shift plus coefficient must be positive")
        return np.linalg.solve(a, _vec(rhs, n))
    if partition is None:
        raise SolverError(f"{kind} problems need a partition")
    part = partition
    m, nb = part.n_interior, len(part.boundary)
    if shift <= 0:
        raise SolverError("shift must be positive")
    out = np.zeros(graph.n)
    rhs = _vec(rhs, m, full=graph.n, idx=part.inner)
    data = np.zeros(nb) if data is None else _vec(data, nb, full=graph.n, idx=part.outer)
    if kind == DIRICHLET:
        lift = graph.weights[np.ix_(part.inner, part.outer)] / graph.measure[part.inner][:, None]
        a = spectral.dirichlet_operator(part) + shift * np.eye(m)
        out[part.inner] = np.linalg.solve(a, rhs + lift @ data)
        out[part.outer] = data
        return out
    if kind == NEUMANN:
        es = eigensystem if eigensystem is not None else spectral.neumann_eigensystem(part)
        i_row, lift = neumann_lift_matrix(part, sign=-1.0)
        z = lift @ data
        f = rhs - i_row @ data - shift * z[:m]
        w_in = es.synthesize(es.coefficients(f) / (es.eigenvalues + shift))
        out[part.inner] = w_in + z[:m]
        out[part.outer] = es.extension @ w_in + z[m:]
        return out
    raise SolverError(f"unknown kind {kind!r}")


def _vec(v, n, full=None, idx=None):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    if v.shape == (n,):
        return v
    if full is not None and v.shape == (full,):
        return v[idx]
    raise SolverError(f"expected {n} values, got shape {v.shape}")


def elliptic_residual(graph: WeightedGraph, kind: str, u, shift: float, rhs, data=None,
                      partition: DomainPartition | None = None, drift=None, c=None):
    """(equation residual sup-norm, boundary residual sup-norm) of a shifted solve."""
    u = graph.function(u)
    if kind == CAUCHY:
        c = np.zeros(graph.n) if c is None else graph.function(c)
        a = -laplacian_matrix(graph) + np.diag(c + shift)
        if drift is not None:
            a -= drift_matrix(graph, drift)
        return float(np.max(np.abs(a @ u - _vec(rhs, graph.n)))), 0.0
    part = partition
    m, nb = part.n_interior, len(part.boundary)
    uc = u[part.closure]
    eq = -domain_laplacian_matrix(part) @ uc + shift * uc[:m] - _vec(rhs, m, graph.n, part.inner)
    data = np.zeros(nb) if data is None else _vec(data, nb, graph.n, part.outer)
    bc = uc[m:] if kind == DIRICHLET else normal_derivative_matrix(part) @ uc
    return float(np.max(np.abs(eq))), float(np.max(np.abs(bc - data)))
