"""Weighted graphs, vertex partitions and the discrete operators acting on them.

Functions on a graph are plain 1-D numpy arrays indexed in vertex order.
Operators are exposed both pointwise (``laplacian_full(g, u, x)``) and as
dense matrices, which the solvers use.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-12


class GraphError(ValueError):
    """Raised for malformed graphs, partitions or graph files."""


class UnknownVertexError(GraphError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class WeightedGraph:
    """A finite, undirected, simple weighted graph with a vertex measure.

    ``weights`` is a dense symmetric ``(n, n)`` array; ``measure`` has length n.
    Construction does not validate; call :func:`validate` for a report.
    """

    vertices: tuple[str, ...]
    weights: np.ndarray
    measure: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.array(self.measure, dtype=float)
        w.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "measure", mu)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.vertices)})
        n = len(self.vertices)
        if w.shape != (n, n) or mu.shape != (n,):
            raise GraphError(f"shape mismatch: {n} vertices, weights {w.shape}, measure {mu.shape}")
        if len(self._index) != n:
            raise GraphError("duplicate vertex ids")

    @classmethod
    def from_edges(cls, vertices: Sequence[str], edges: Iterable[tuple[str, str, float]],
                   measure=None) -> "WeightedGraph":
        """Build a graph from ``(u, v, weight)`` triples.

        ``measure`` may be a mapping, a sequence in vertex order, or None for
        the degree measure mu(x) = sum_y w(x, y).
        """
        vertices = [str(v) for v in vertices]
        index = {v: i for i, v in enumerate(vertices)}
        w = np.zeros((len(vertices), len(vertices)))
        for a, b, wt in edges:
            i, j = index[str(a)], index[str(b)]
            w[i, j] = w[j, i] = float(wt)
        if measure is None:
            mu = w.sum(axis=1)
        elif isinstance(measure, dict):
            mu = np.array([float(measure[v]) for v in vertices])
        else:
            mu = np.asarray(measure, dtype=float)
        return cls(tuple(vertices), w, mu)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, x) -> int:
        if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
            if 0 <= x < self.n:
                return int(x)
            raise UnknownVertexError(f"vertex index {x} out of range")
        try:
            return self._index[str(x)]
        except KeyError:
            raise UnknownVertexError(f"unknown vertex {x!r}") from None

    def indices(self, xs) -> np.ndarray:
        return np.array([self.index(x) for x in xs], dtype=int)

    @property
    def degree(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def neighbors(self, x) -> np.ndarray:
        return np.flatnonzero(self.weights[self.index(x)] > 0)

    def edges(self) -> list[tuple[str, str, float]]:
        iu, ju = np.nonzero(np.triu(self.weights, 1))
        return [(self.vertices[i], self.vertices[j], float(self.weights[i, j]))
                for i, j in zip(iu, ju)]

    def function(self, values) -> np.ndarray:
        """Coerce a mapping or sequence into a vertex-ordered array."""
        if isinstance(values, dict):
            missing = set(self.vertices) - set(map(str, values))
            if missing:
                raise GraphError(f"function missing vertices {sorted(missing)}")
            return np.array([float(values[v]) for v in self.vertices])
        if np.isscalar(values):
            return np.full(self.n, float(values))
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.n,):
            raise GraphError(f"expected {self.n} values, got shape {arr.shape}")
        return arr

    def with_weight(self, x, y, value) -> "WeightedGraph":
        """Copy with a single directed weight entry changed (used to build bad inputs)."""
        w = self.weights.copy()
        w[self.index(x), self.index(y)] = value
        return WeightedGraph(self.vertices, w, self.measure)

    def induced_connected(self, idx: np.ndarray) -> bool:
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            return False
        sub = self.weights[np.ix_(idx, idx)] > 0
        seen = np.zeros(idx.size, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(sub[i] & ~seen):
                seen[j] = True
                stack.append(j)
        return bool(seen.all())

    def is_connected(self) -> bool:
        return self.induced_connected(np.arange(self.n))


@dataclass(frozen=True)
class DomainPartition:
    """Split of the host graph's vertices into an interior and its vertex boundary."""

    graph: WeightedGraph
    interior: tuple[str, ...]
    boundary: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "interior", tuple(str(v) for v in self.interior))
        object.__setattr__(self, "boundary", tuple(str(v) for v in self.boundary))

    @property
    def inner(self) -> np.ndarray:
        return self.graph.indices(self.interior)

    @property
    def outer(self) -> np.ndarray:
        return self.graph.indices(self.boundary)

    @property
    def closure(self) -> np.ndarray:
        """Indices of the closed domain, interior first then boundary."""
        return np.concatenate([self.inner, self.outer])

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def interior_flux_weights(self) -> np.ndarray:
        """Rows z in the boundary, columns y in the interior: w(z, y)."""
        return self.graph.weights[np.ix_(self.outer, self.inner)]


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def as_dict(self):
        return {"ok": self.ok, "violations": list(self.violations)}


def validate(graph: WeightedGraph, partition: DomainPartition | None = None) -> ValidationReport:
    """Check the graph axioms (and partition invariants); never raises."""
    bad = []
    w, mu = graph.weights, graph.measure
    if not np.all(np.isfinite(w)) or not np.all(np.isfinite(mu)):
        bad.append("non-finite weight or measure")
    if np.any(w < 0):
        bad.append("negative weight")
    asym = np.argwhere(np.abs(w - w.T) > ATOL)
    for i, j in asym[asym[:, 0] < asym[:, 1]]:
        bad.append(f"asymmetric weight between {graph.vertices[i]} and {graph.vertices[j]}")
    for i in np.flatnonzero(np.diag(w) != 0):
        bad.append(f"self-loop at {graph.vertices[i]}")
    for i in np.flatnonzero(~(mu > 0)):
        bad.append(f"nonpositive measure at {graph.vertices[i]}")
    if graph.n == 0:
        bad.append("empty graph")
    elif not graph.is_connected():
        bad.append("graph is disconnected")
    if partition is not None:
        bad.extend(_partition_violations(graph, partition))
    return ValidationReport(bad)


def _partition_violations(graph, p):
    bad = []
    try:
        inner, outer = p.inner, p.outer
    except KeyError as exc:
        return [str(exc)]
    common = set(p.interior) & set(p.boundary)
    if common:
        bad.append(f"interior and boundary overlap: {sorted(common)}")
    uncovered = set(graph.vertices) - set(p.interior) - set(p.boundary)
    if uncovered:
        bad.append(f"vertices in neither interior nor boundary: {sorted(uncovered)}")
    if not p.boundary:
        bad.append("boundary is empty")
    for z, iz in zip(p.boundary, outer):
        if not np.any(graph.weights[iz, inner] > 0):
            bad.append(f"boundary vertex {z} has no interior neighbor")
    if len(inner) == 0 or not graph.induced_connected(inner):
        bad.append("interior is not connected")
    return bad


# --- matrices -------------------------------------------------------------

def laplacian_matrix(graph: WeightedGraph) -> np.ndarray:
    """Dense matrix L with (L u)(x) = sum_y (u(y) - u(x)) w(y, x) / mu(x)."""
    w = graph.weights
    return (w - np.diag(w.sum(axis=1))) / graph.measure[:, None]


def domain_laplacian_matrix(p: DomainPartition) -> np.ndarray:
    """Rows for interior vertices, columns over the closure (interior first)."""
    return laplacian_matrix(p.graph)[np.ix_(p.inner, p.closure)]


def normal_derivative_matrix(p: DomainPartition) -> np.ndarray:
    """Rows for boundary vertices, columns over the closure (interior first)."""
    g = p.graph
    wzy = p.interior_flux_weights()
    mu_z = g.measure[p.outer]
    m = p.n_interior
    out = np.zeros((len(p.boundary), m + len(p.boundary)))
    out[:, :m] = -wzy / mu_z[:, None]
    out[:, m:] = np.diag(wzy.sum(axis=1) / mu_z)
    return out


def drift_matrix(graph: WeightedGraph, b) -> np.ndarray:
    """Matrix of u -> sum_y b(y) (u(y) - u(x)) sqrt(w(x, y) / (2 mu(x)))."""
    b = graph.function(b)
    coef = np.sqrt(graph.weights / (2.0 * graph.measure[:, None])) * b[None, :]
    return coef - np.diag(coef.sum(axis=1))


# --- pointwise operators ---------------------------------------------------

def laplacian_full(graph: WeightedGraph, u, x) -> float:
    i = graph.index(x)
    u = graph.function(u)
    return float(np.sum((u - u[i]) * graph.weights[:, i]) / graph.measure[i])


def _closure_values(p: DomainPartition, u) -> np.ndarray:
    """Accept values over the whole host graph or over the closure (interior first)."""
    u = np.asarray(u, dtype=float) if not isinstance(u, dict) else p.graph.function(u)
    if u.shape == (p.graph.n,):
        return u[p.closure]
    if u.shape == (len(p.closure),):
        return u
    raise GraphError(f"function has shape {u.shape}; expected {p.graph.n} or {len(p.closure)} values")


def laplacian_domain(p: DomainPartition, u, x) -> float:
    g = p.graph
    if str(x) not in p.interior:
        raise GraphError(f"{x!r} is not an interior vertex")
    uc = _closure_values(p, u)
    i = p.interior.index(str(x))
    return float(domain_laplacian_matrix(p)[i] @ uc)


def normal_derivative(p: DomainPartition, u, z) -> float:
    if str(z) not in p.boundary:
        raise GraphError(f"{z!r} is not a boundary vertex")
    uc = _closure_values(p, u)
    k = p.boundary.index(str(z))
    return float(normal_derivative_matrix(p)[k] @ uc)


def gradient_form(graph: WeightedGraph, u, v, x) -> float:
    i = graph.index(x)
    u, v = graph.function(u), graph.function(v)
    w = graph.weights[i]
    return float(np.sum(w * (u - u[i]) * (v - v[i])) / (2.0 * graph.measure[i]))


def gradient_norm(graph: WeightedGraph, u, x) -> float:
    return float(np.sqrt(max(gradient_form(graph, u, u, x), 0.0)))


def drift_dot_gradient(graph: WeightedGraph, b, u, x) -> float:
    i = graph.index(x)
    u, b = graph.function(u), graph.function(b)
    w = graph.weights[i]
    return float(np.sum(b * (u - u[i]) * np.sqrt(w / (2.0 * graph.measure[i]))))


# --- integrals and norms ---------------------------------------------------

def _subset(graph, subset):
    return np.arange(graph.n) if subset is None else graph.indices(subset)


def integrate(graph: WeightedGraph, u, subset=None) -> float:
    idx = _subset(graph, subset)
    return float(np.sum(graph.measure[idx] * graph.function(u)[idx]))


def volume(graph: WeightedGraph, subset=None) -> float:
    return float(np.sum(graph.measure[_subset(graph, subset)]))


def sup_norm(u) -> float:
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        raise GraphError("sup norm of an empty function")
    return float(np.max(np.abs(u)))


def lp_norm(graph: WeightedGraph, u, p: float = 2.0, subset=None) -> float:
    if p < 1:
        raise GraphError("p must be >= 1")
    idx = _subset(graph, subset)
    if idx.size == 0:
        raise GraphError("norm over an empty subset")
    u = graph.function(u)[idx]
    if np.isinf(p):
        return sup_norm(u)
    return float(np.sum(graph.measure[idx] * np.abs(u) ** p) ** (1.0 / p))


def mu_inner(graph: WeightedGraph, u, v) -> float:
    return float(np.sum(graph.measure * graph.function(u) * graph.function(v)))


# --- graph files -----------------------------------------------------------

def parse_graph_text(text: str) -> tuple[WeightedGraph, DomainPartition | None]:
    """Parse the two-section graph format.

    ::

        [vertices]
        # id, measure, role      (measure may be "degree")
        x1, degree, interior
        [edges]
        x1, x2, 1.0
    """
    section = None
    vertices, measures, roles, edges = [], [], [], []
    seen_edges = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("vertices", "edges"):
                raise GraphError(f"line {lineno}: unknown section {section!r}")
            continue
        fields = [f.strip() for f in next(csv.reader(io.StringIO(line)))]
        if section == "vertices":
            if len(fields) != 3:
                raise GraphError(f"line {lineno}: expected 'id, measure, role'")
            vid, meas, role = fields
            if role not in ("interior", "boundary", "plain"):
                raise GraphError(f"line {lineno}: bad role {role!r}")
            if vid in vertices:
                raise GraphError(f"line {lineno}: duplicate vertex {vid!r}")
            vertices.append(vid)
            measures.append(meas)
            roles.append(role)
        elif section == "edges":
            if len(fields) != 3:
                raise GraphError(f"line {lineno}: expected 'id1, id2, weight'")
            a, b, wt = fields
            try:
                wt = float(wt)
            except ValueError:
                raise GraphError(f"line {lineno}: bad weight {wt!r}") from None
            if a == b:
                raise GraphError(f"line {lineno}: self-loop at {a!r}")
            if not wt > 0:
                raise GraphError(f"line {lineno}: weight must be positive")
            key = frozenset((a, b))
            if key in seen_edges:
                raise GraphError(f"line {lineno}: duplicate edge {a}-{b}")
            for v in (a, b):
                if v not in vertices:
                    raise GraphError(f"line {lineno}: unknown vertex {v!r}")
            seen_edges.add(key)
            edges.append((a, b, wt))
        else:
            raise GraphError(f"line {lineno}: data outside a section")
    if not vertices:
        raise GraphError("no vertices")
    graph = WeightedGraph.from_edges(vertices, edges)
    deg = graph.degree
    try:
        mu = [deg[i] if m.lower() == "degree" else float(m) for i, m in enumerate(measures)]
    except ValueError as exc:
        raise GraphError(f"bad measure: {exc}") from None
    graph = WeightedGraph(graph.vertices, graph.weights, mu)
    interior = [v for v, r in zip(vertices, roles) if r == "interior"]
    boundary = [v for v, r in zip(vertices, roles) if r == "boundary"]
    if not interior and not boundary:
        return graph, None
    return graph, DomainPartition(graph, tuple(interior), tuple(boundary))


def read_graph(path) -> tuple[WeightedGraph, DomainPartition | None]:
    return parse_graph_text(Path(path).read_text())


def format_graph(graph: WeightedGraph, partition: DomainPartition | None = None) -> str:
    role = {v: "plain" for v in graph.vertices}
    if partition is not None:
        role.update({v: "interior" for v in partition.interior})
        role.update({v: "boundary" for v in partition.boundary})
    lines = ["[vertices]"]
    lines += [f"{v}, {float(graph.measure[i])!r}, {role[v]}" for i, v in enumerate(graph.vertices)]
    lines.append("[edges]")
    lines += [f"{a}, {b}, {float(w)!r}" for a, b, w in graph.edges()]
    return "\n".join(lines) + "\n"


def example_graph() -> tuple[WeightedGraph, DomainPartition]:
    """Five-vertex demo graph: interior triangle x1, x2, x3 with pendant boundary x4, x5.

    Unit weights and degree measure.
    """
    vertices = ["x1", "x2", "x3", "x4", "x5"]
    edges = [("x1", "x2", 1.0), ("x1", "x3", 1.0), ("x2", "x3", 1.0),
             ("x1", "x4", 1.0), ("x3", "x5", 1.0)]
    g = WeightedGraph.from_edges(vertices, edges)
    return g, DomainPartition(g, ("x1", "x2", "x3"), ("x4", "x5"))


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4,
                 weight_range=(0.5, 2.0), measure: str = "random") -> WeightedGraph:
    """Random connected graph: a random spanning tree plus Erdos-Renyi extras."""
    w = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        i, j = order[k], order[rng.integers(k)]
        w[i, j] = w[j, i] = rng.uniform(*weight_range)
    for i in range(n):
        for j in range(i + 1, n):
            if w[i, j] == 0 and rng.random() < p:
                w[i, j] = w[j, i] = rng.uniform(*weight_range)
    if measure == "degree":
        mu = w.sum(axis=1)
    else:
        mu = rng.uniform(0.5, 2.0, size=n)
    return WeightedGraph(tuple(f"v{i}" for i in range(n)), w, mu)


def random_partition(rng: np.random.Generator, graph: WeightedGraph, n_boundary: int = 2):
    """Pick a boundary set whose complement is connected and which touches it."""
    for _ in range(200):
        outer = rng.choice(graph.n, size=n_boundary, replace=False)
        inner = np.setdiff1d(np.arange(graph.n), outer)
        p = DomainPartition(graph, tuple(graph.vertices[i] for i in inner),
                            tuple(graph.vertices[i] for i in outer))
        if not _partition_violations(graph, p):
            return p
    raise GraphError("could not find a valid partition")
