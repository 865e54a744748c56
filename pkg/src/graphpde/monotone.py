"""Upper and lower solution iterations for semilinear elliptic and parabolic problems.

Each step solves the shifted linear problem
``(-Delta + M) u_{m+1} = f(u_m) + M u_m`` with M a Lipschitz bound of f on
the bracket, which makes the right-hand side nondecreasing in u_m and the
two sequences monotone.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from . import spectral
from .comparison import certify_elliptic
from .graph import DomainPartition, WeightedGraph
from .linear import (CAUCHY, DIRICHLET, NEUMANN, LinearParabolicProblem, TimeSeries,
                     coercivity_margin, elliptic_residual, solve_elliptic_shifted, solve_parabolic)

LIPSCHITZ_SAFETY = 1.1
SAMPLES = 1001


class IterationError(RuntimeError):
    pass


def _horner(coef):
    coef = [float(c) for c in coef[::-1]]

    def ev(u):
        out = coef[0] + 0.0 * u
        for c in coef[1:]:
            out = out * u + c
        return out
    return ev


class Reaction:
    """A reaction term f(u), vectorised over numpy arrays, with its derivative.

    Polynomial kinds keep their coefficients (lowest degree first) so that
    derivative bounds and suprema can be computed in closed form.
    """

    def __init__(self, kind: str, f: Callable | None = None, df: Callable | None = None,
                 coefficients=None, **params):
        self.kind = kind
        self.params = params
        self.poly = None if coefficients is None else Polynomial(np.asarray(coefficients, dtype=float))
        if self.poly is not None:
            self._f = _horner(self.poly.coef)
            self._df = _horner(self.poly.deriv().coef)
        else:
            if f is None or df is None:
                raise ValueError("custom reactions need f and df")
            self._f, self._df = f, df

    @classmethod
    def logistic(cls, a: float, b: float = 1.0):
        if b <= 0:
            raise ValueError("logistic needs b > 0")
        return cls("logistic", coefficients=[0.0, a, -b], a=a, b=b)

    @classmethod
    def kpp(cls, f=None, df=None, coefficients=None):
        """Default is the Fisher nonlinearity u(1 - u)."""
        if f is None and coefficients is None:
            coefficients = [0.0, 1.0, -1.0]
        return cls("kpp", f=f, df=df, coefficients=coefficients)

    @classmethod
    def allen_cahn(cls, alpha: float):
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        # u (u - alpha) (1 - u)
        return cls("allen_cahn", coefficients=[0.0, -alpha, 1.0 + alpha, -1.0], alpha=alpha)

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", coefficients=coefficients)

    @classmethod
    def zero(cls):
        return cls("polynomial", coefficients=[0.0])

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return np.asarray(self._f(u), dtype=float) + 0.0 * u

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        return np.asarray(self._df(u), dtype=float) + 0.0 * u

    @property
    def is_zero(self) -> bool:
        return self.poly is not None and not np.any(self.poly.coef)

    def describe(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.poly is not None:
            out["coefficients"] = self.poly.coef.tolist()
        return out

    def __repr__(self):
        return f"Reaction({self.describe()})"


def lipschitz_constant(f: Reaction, lo: float, hi: float, safety: float = LIPSCHITZ_SAFETY) -> float:
    """Bound on |f'| over [lo, hi], times the safety factor.

    Polynomials use the exact maximum (endpoints plus interior critical points
    of f'); other reactions a 1001-point sample.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
        raise ValueError("finite range with lo <= hi required")
    if f.poly is not None:
        d = f.poly.deriv()
        pts = [lo, hi]
        if d.degree() >= 2:
            crit = d.deriv().roots()
            pts += [r.real for r in np.atleast_1d(crit) if abs(r.imag) < 1e-12 and lo < r.real < hi]
        vals = np.abs(d(np.array(pts)))
    else:
        vals = np.abs(f.derivative(np.linspace(lo, hi, SAMPLES)))
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite derivative sample")
    return float(safety * vals.max())


@dataclass
class Bracket:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bracket bounds differ in shape")
        if np.any(self.lower > self.upper + 1e-12):
            raise IterationError("bracket inverted: lower exceeds upper")

    @property
    def range(self) -> tuple[float, float]:
        return float(self.lower.min()), float(self.upper.max())


@dataclass
class MonotoneResult:
    minimal: np.ndarray
    maximal: np.ndarray
    lower_iterates: list
    upper_iterates: list
    iterations: int
    increment: float
    gap: float
    residual: float
    shift: float
    tol: float
    info: dict = field(default_factory=dict)

    @property
    def unique(self) -> bool:
        return self.gap <= 100 * self.tol

    def chain_defects(self) -> dict:
        """Largest violations of the monotone chains (0 when they hold exactly)."""
        lo = np.array([np.asarray(x.states if isinstance(x, TimeSeries) else x) for x in self.lower_iterates])
        up = np.array([np.asarray(x.states if isinstance(x, TimeSeries) else x) for x in self.upper_iterates])
        inc_lo = float(max(0.0, np.max(lo[:-1] - lo[1:]))) if len(lo) > 1 else 0.0
        dec_up = float(max(0.0, np.max(up[1:] - up[:-1]))) if len(up) > 1 else 0.0
        cross = float(max(0.0, np.max(lo.max(axis=0) - up.min(axis=0))))
        return {"lower_nondecreasing": inc_lo, "upper_nonincreasing": dec_up, "lower_below_upper": cross}

    def chains_hold(self, rel: float = 1e-12) -> bool:
        vals = [np.asarray(x.states if isinstance(x, TimeSeries) else x) for x in (self.minimal, self.maximal)]
        scale = max(1.0, *(float(np.max(np.abs(v))) for v in vals))
        return all(v <= rel * scale for v in self.chain_defects().values())

    def as_dict(self) -> dict:
        return {"minimal": self.minimal, "maximal": self.maximal, "iterations": self.iterations,
                "increment": self.increment, "gap": self.gap, "residual": self.residual,
                "shift": self.shift, "unique": self.unique, "chains": self.chain_defects(), **self.info}


def _shift_for(f: Reaction, lo, hi) -> float:
    m = lipschitz_constant(f, lo, hi)
    return m if m > 0 else 1.0


def _run_pair(step, lower, upper, tol, max_iters, keep=True):
    lows, ups = [lower], [upper]
    lo, up = lower, upper
    inc = np.inf
    for it in range(1, max_iters + 1):
        lo_new, up_new = step(lo), step(up)
        inc = max(float(np.max(np.abs(lo_new - lo))), float(np.max(np.abs(up_new - up))))
        lo, up = lo_new, up_new
        if keep:
            lows.append(lo)
            ups.append(up)
        if inc <= tol:
            if not keep:
                lows.append(lo)
                ups.append(up)
            return lo, up, lows, ups, it, inc
    raise IterationError(f"no convergence in {max_iters} iterations (increment {inc:.3g})")


def default_dirichlet_bracket(partition: DomainPartition, f: Reaction, data=0.0, cap: float | None = None,
                              u0=None) -> Bracket:
    """Lower: delta * phi_1 with the largest delta in {2^-k} passing the subsolution check, else 0.

    Upper: a constant at least the positive equilibrium cap (a/b for logistic),
    the boundary data and max u0.
    """
    g = partition.graph
    es = spectral.dirichlet_eigensystem(partition)
    data = np.broadcast_to(np.asarray(data, dtype=float), (len(partition.outer),))
    if cap is None:
        cap = f.params["a"] / f.params["b"] if f.kind == "logistic" else 1.0
    top = max(cap, float(data.max()), 0.0 if u0 is None else float(np.max(u0)))
    upper = np.full(g.n, top)
    upper[partition.outer] = data
    lower = np.zeros(g.n)
    lower[partition.outer] = data
    phi = es.eigenfunctions[:, 0]
    for k in range(0, 64):
        delta = 2.0 ** -k
        cand = lower.copy()
        cand[partition.inner] = delta * phi
        if np.any(cand > upper):
            continue
        cert = certify_elliptic(g, cand, partition=partition, kind=DIRICHLET,
                                boundary_data=data, reaction=f, tol=0.0)
        if cert.subsolution:
            lower = cand
            break
    return Bracket(lower, upper)


def elliptic_monotone(partition: DomainPartition, kind: str, f: Reaction, data=0.0,
                      bracket: Bracket | None = None, tol: float = 1e-10, max_iters: int = 10000,
                      shift: float | None = None, keep_iterates: bool = True) -> MonotoneResult:
    """Minimal and maximal solutions of -Delta u = f(u) on the interior with boundary data."""
    if kind not in (DIRICHLET, NEUMANN):
        raise ValueError(f"unknown boundary kind {kind!r}")
    g = partition.graph
    nb = len(partition.outer)
    data = np.broadcast_to(np.asarray(data, dtype=float), (nb,)).copy()
    if bracket is None:
        if kind != DIRICHLET:
            raise ValueError("Neumann problems need an explicit bracket")
        bracket = default_dirichlet_bracket(partition, f, data)
    lo, hi = bracket.range
    m = _shift_for(f, lo, hi) if shift is None else shift
    for name, fn, want in (("lower", bracket.lower, "subsolution"), ("upper", bracket.upper, "supersolution")):
        cert = certify_elliptic(g, fn, partition=partition, kind=kind, boundary_data=data, reaction=f, tol=1e-9)
        if not getattr(cert, want):
            warnings.warn(f"{name} bound is not a certified {want}", RuntimeWarning, stacklevel=2)
    es = spectral.neumann_eigensystem(partition) if kind == NEUMANN else None
    inner = partition.inner

    def step(u):
        rhs = f(u[inner]) + m * u[inner]
        return solve_elliptic_shifted(g, kind, m, rhs, data, partition=partition, eigensystem=es)

    lower, upper, lows, ups, it, inc = _run_pair(step, bracket.lower, bracket.upper, tol, max_iters, keep_iterates)
    res = max(_elliptic_fixed_residual(g, partition, kind, f, lower, data),
              _elliptic_fixed_residual(g, partition, kind, f, upper, data))
    return MonotoneResult(lower, upper, lows, ups, it, inc, float(np.max(np.abs(upper - lower))),
                          res, m, tol, {"kind": kind})


def _elliptic_fixed_residual(g, partition, kind, f, u, data):
    eq, bc = elliptic_residual(g, kind, u, 0.0, f(u[partition.inner]), data, partition=partition)
    return max(eq, bc)


def cauchy_elliptic_monotone(graph: WeightedGraph, f: Reaction, bracket: Bracket, drift=None, c=0.0,
                             tol: float = 1e-10, max_iters: int = 10000, keep_iterates: bool = True) -> MonotoneResult:
    """Minimal and maximal solutions of -Delta u - b.grad u + c u = f(u) on the whole graph."""
    c = np.broadcast_to(np.asarray(c, dtype=float), (graph.n,)).copy()
    b = None if drift is None else graph.function(drift)
    if b is not None and np.any(b < 0):
        raise ValueError("drift must be nonnegative")
    bmax = 0.0 if b is None else float(np.max(b))
    lo, hi = bracket.range
    m_lip = lipschitz_constant(f, lo, hi)
    m = max(m_lip, 1.0 + bmax ** 2 / 2.0 - float(c.min())) + 1.0
    margin = coercivity_margin(m, 0.0 if b is None else b, c)
    cert_kw = dict(c=c, drift=b, reaction=f, tol=1e-9)
    if not certify_elliptic(graph, bracket.lower, **cert_kw).subsolution:
        warnings.warn("lower bound is not a certified subsolution", RuntimeWarning, stacklevel=2)
    if not certify_elliptic(graph, bracket.upper, **cert_kw).supersolution:
        warnings.warn("upper bound is not a certified supersolution", RuntimeWarning, stacklevel=2)

    def step(u):
        return solve_elliptic_shifted(graph, CAUCHY, m, f(u) + m * u, drift=b, c=c)

    lower, upper, lows, ups, it, inc = _run_pair(step, bracket.lower, bracket.upper, tol, max_iters, keep_iterates)

    def resid(u):
        return elliptic_residual(graph, CAUCHY, u, 0.0, f(u), drift=b, c=c)[0]

    return MonotoneResult(lower, upper, lows, ups, it, inc, float(np.max(np.abs(upper - lower))),
                          max(resid(lower), resid(upper)), m, tol,
                          {"kind": CAUCHY, "coercivity_margin": margin, "drift_norm": bmax})


@dataclass
class SemilinearProblem:
    """u_t - Delta u = f(u) with Dirichlet/Neumann boundary data or on the whole graph."""

    graph: WeightedGraph
    kind: str
    reaction: Reaction
    u0: np.ndarray
    partition: DomainPartition | None = None
    boundary: Callable | np.ndarray | float | None = None

    def linear(self, shift, forcing) -> LinearParabolicProblem:
        bd = self.boundary
        if bd is not None and not callable(bd) and np.ndim(bd) < 2:
            bd = np.broadcast_to(np.asarray(bd, dtype=float), (len(self.partition.outer),)).copy()
        return LinearParabolicProblem(self.graph, self.kind, self.u0, self.partition, shift, forcing,
                                      None if self.kind == CAUCHY else bd)

    @property
    def domain(self) -> np.ndarray:
        return np.arange(self.graph.n) if self.partition is None else self.partition.inner


def constant_bracket(problem: SemilinearProblem, times, lo: float, hi: float) -> tuple[TimeSeries, TimeSeries]:
    n = problem.graph.n
    times = np.asarray(times, dtype=float)
    mk = lambda v: TimeSeries(times, np.full((len(times), n), float(v)), problem.graph.vertices)  # noqa: E731
    return mk(lo), mk(hi)


def parabolic_monotone(problem: SemilinearProblem, times, bracket: tuple[TimeSeries, TimeSeries] | None = None,
                       tol: float = 1e-8, max_iters: int = 10000, keep_iterates: bool = True) -> MonotoneResult:
    """Picard iteration (u_k)_t - Delta u_k + M u_k = f(u_{k-1}) + M u_{k-1} from both bracket ends.

    Iterates are trajectories on the output grid; each one is fed back as
    piecewise-linear forcing of the next linear solve. The default bracket is
    the constants [min(0, u0), max(1, u0, boundary)] (or a/b for logistic).
    """
    times = np.asarray(times, dtype=float)
    f = problem.reaction
    if bracket is None:
        u0 = np.asarray(problem.u0, dtype=float)
        cap = f.params["a"] / f.params["b"] if f.kind == "logistic" else 1.0
        bd = problem.boundary
        bvals = [] if bd is None or callable(bd) else np.ravel(bd)
        hi = max([cap, float(np.max(u0)), *bvals])
        lo = min([0.0, float(np.min(u0)), *bvals])
        bracket = constant_bracket(problem, times, lo, hi)
    lower0, upper0 = bracket
    if np.any(lower0.states > upper0.states + 1e-12):
        raise IterationError("bracket trajectories are not ordered")
    lo, hi = float(lower0.states.min()), float(upper0.states.max())
    m = _shift_for(f, lo, hi)
    dom = problem.domain

    def step(states):
        forcing = f(states[:, dom]) + m * states[:, dom]
        return solve_parabolic(problem.linear(m, forcing), times).states

    lower, upper, lows, ups, it, inc = _run_pair(step, lower0.states, upper0.states, tol, max_iters, keep_iterates)
    wrap = lambda s: TimeSeries(times, s, problem.graph.vertices)  # noqa: E731
    lows = [wrap(s) for s in lows]
    ups = [wrap(s) for s in ups]
    # residual of the fixed point against one more linear solve without the shift
    res = max(float(np.max(np.abs(step(lower) - lower))), float(np.max(np.abs(step(upper) - upper))))
    return MonotoneResult(wrap(lower), wrap(upper), lows, ups, it, inc, float(np.max(np.abs(upper - lower))),
                          res, m, tol, {"kind": problem.kind})
